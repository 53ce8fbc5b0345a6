#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "neurouser/cohort.hpp"
#include "neurouser/errors.hpp"

using namespace neurouser;

namespace {

std::vector<RatingObservation> series(const std::string& user, const std::string& item, std::vector<double> ratings) {
    std::vector<RatingObservation> out;
    for (std::size_t t = 0; t < ratings.size(); ++t) out.push_back({user, item, static_cast<int>(t + 1), ratings[t]});
    return out;
}

void append(std::vector<RatingObservation>& a, const std::vector<RatingObservation>& b) {
    a.insert(a.end(), b.begin(), b.end());
}

UserModel wad_model(double gain, const std::string& label = "") {
    PopulationParams p;
    p.gain = gain;
    return UserModel{build_population(p), {DecoderKind::WeightedAverage, UniformPrior{}, std::nullopt}, label};
}

// Pareto log-likelihood up to a constant, for the grid oracle
double pareto_loglik(double alpha, double xm, const std::vector<double>& x) {
    double ll = 0.0;
    for (double v : x) ll += std::log(alpha) + alpha * std::log(xm) - (alpha + 1) * std::log(v);
    return ll;
}

double grid_alpha(const std::vector<double>& x, double step = 1e-3) {
    const double xm = *std::min_element(x.begin(), x.end());
    double best = -INFINITY, arg = 0.0;
    for (double a = step; a < 50.0; a += step) {
        const double ll = pareto_loglik(a, xm, x);
        if (ll > best) {
            best = ll;
            arg = a;
        }
    }
    return arg;
}

} // namespace

TEST_CASE("simulate_cohort cardinality and ids") {
    const std::vector<UserModel> models{wad_model(10)};
    const std::vector<LatentAssignment> latent{{0, "i1", 3.2}};
    const auto obs = simulate_cohort(models, latent, 5, 1);
    REQUIRE(obs.size() == 5);
    for (int t = 0; t < 5; ++t) {
        CHECK(obs[t].user_id == "u0");
        CHECK(obs[t].item_id == "i1");
        CHECK(obs[t].trial == t + 1);
    }
    CHECK(simulate_cohort(models, latent, 5, 1) == obs);

    const std::vector<LatentAssignment> unknown{{3, "i1", 3.0}};
    CHECK_THROWS_AS(simulate_cohort(models, unknown, 5, 1), ValidationError);
    const std::vector<LatentAssignment> outside{{0, "i1", 9.0}};
    CHECK_THROWS_AS(simulate_cohort(models, outside, 5, 1), ValidationError);
}

TEST_CASE("a noiseless cohort is constant on every pair") {
    std::vector<UserModel> models{wad_model(1e4, "a"), wad_model(1e4, "b")};
    std::vector<LatentAssignment> latent;
    for (std::size_t u = 0; u < 2; ++u)
        for (int i = 0; i < 6; ++i) latent.push_back({u, "i" + std::to_string(i), 1.6 + 0.5 * i});
    const auto obs = simulate_cohort(models, latent, 5, 2);
    const auto usage = category_usage_histogram(obs, RatingScale{});
    CHECK(usage.pairs == 12);
    CHECK(usage.bins[0] == 12);
    CHECK(usage.constant_pair_fraction() == 1.0);
    CHECK(usage.constant_user_fraction() == 1.0);
    for (const auto& v : variance_samples(obs).samples) CHECK(v.variance == 0.0);
}

TEST_CASE("category usage") {
    std::vector<RatingObservation> obs;
    append(obs, series("u1", "a", {1, 2, 1, 2, 3}));
    append(obs, series("u1", "b", {4, 4, 4, 4, 4}));
    append(obs, series("u2", "a", {5, 5, 5}));
    append(obs, series("u2", "b", {2, 2}));
    append(obs, series("u3", "a", {1, 5}));
    const auto usage = category_usage_histogram(obs, RatingScale{});
    REQUIRE(usage.bins.size() == 5);
    CHECK(usage.bins == std::vector<std::size_t>{3, 1, 1, 0, 0});
    std::size_t total = 0;
    for (auto b : usage.bins) total += b;
    CHECK(total == usage.pairs);
    CHECK(usage.users == 3);
    CHECK(usage.constant_users == 1);
    CHECK(usage.constant_pair_fraction() == doctest::Approx(0.6));
    CHECK(usage.constant_user_fraction() == doctest::Approx(1.0 / 3));
}

TEST_CASE("variance samples") {
    SUBCASE("worked values") {
        CHECK(variance_samples(series("u", "i", {3, 3, 3, 3, 3})).samples[0].variance == 0.0);
        CHECK(variance_samples(series("u", "i", {1, 5})).samples[0].variance == doctest::Approx(4.0));
        // mean 3, squared deviations 1+0+1+0+4 = 6
        CHECK(variance_samples(series("u", "i", {2, 3, 2, 3, 5})).samples[0].variance == doctest::Approx(1.2));
        CHECK(variance_samples(series("u", "i", {2, 3, 2, 3, 5}), true).samples[0].variance == doctest::Approx(1.5));
    }
    SUBCASE("single trials are skipped") {
        auto v = variance_samples(series("u", "i", {4}));
        CHECK(v.samples.empty());
        CHECK(v.skipped == 1);
    }
    SUBCASE("zero exactly when all trials agree") {
        CHECK(variance_samples(series("u", "i", {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1})).samples[0].variance == 0.0);
        CHECK(variance_samples(series("u", "i", {0.3, 0.3, 0.3})).samples[0].variance == 0.0);
        CHECK(variance_samples(series("u", "i", {0.3, 0.3, 0.4})).samples[0].variance > 0.0);
    }
    SUBCASE("trial order does not matter") {
        std::vector<double> r{1, 4, 2, 2, 5, 3};
        const double v = variance_samples(series("u", "i", r)).samples[0].variance;
        std::sort(r.begin(), r.end());
        do {
            CHECK(variance_samples(series("u", "i", r)).samples[0].variance == doctest::Approx(v).epsilon(1e-14));
        } while (std::next_permutation(r.begin(), r.end()));
    }
    SUBCASE("per-user means") {
        std::vector<RatingObservation> obs;
        append(obs, series("u1", "a", {1, 5}));       // 4
        append(obs, series("u1", "b", {3, 3}));       // 0
        append(obs, series("u2", "a", {2, 3, 2, 3})); // 0.25
        const auto pu = per_user_variances(variance_samples(obs).samples);
        REQUIRE(pu.size() == 2);
        CHECK(pu[0].user_id == "u1");
        CHECK(pu[0].variance == doctest::Approx(2.0));
        CHECK(pu[1].variance == doctest::Approx(0.25));
        CHECK(pu[0].item_id.empty());
    }
}

TEST_CASE("group_by_pair orders pairs and trials") {
    std::vector<RatingObservation> obs{{"b", "x", 2, 4}, {"a", "y", 1, 1}, {"b", "x", 1, 3}, {"a", "x", 1, 2}};
    const auto g = group_by_pair(obs);
    REQUIRE(g.size() == 3);
    CHECK(g[0].user_id == "a");
    CHECK(g[0].item_id == "x");
    CHECK(g[2].ratings == std::vector<double>{3, 4});
}

TEST_CASE("Pareto ML fit") {
    SUBCASE("(2,4,8)") {
        const std::vector<double> x{2, 4, 8};
        const auto fit = pareto_ml_fit(x);
        CHECK(fit.x_m == 2.0);
        CHECK(fit.alpha == doctest::Approx(1.4427).epsilon(5e-5));
        CHECK(std::abs(fit.alpha - grid_alpha(x)) <= 1e-3);
    }
    SUBCASE("closed form agrees with a likelihood grid search") {
        Rng rng(10);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> x;
            for (int i = 0; i < 20; ++i) x.push_back(0.05 + 3.0 * rng.uniform());
            CHECK(std::abs(pareto_ml_fit(x).alpha - grid_alpha(x)) <= 1e-3);
        }
    }
    SUBCASE("zeros are excluded and counted") {
        const std::vector<double> x{0, 2, 0, 4, 8};
        const auto fit = pareto_ml_fit(x);
        CHECK(fit.n_used == 3);
        CHECK(fit.n_excluded == 2);
        CHECK(fit.alpha == doctest::Approx(pareto_ml_fit(std::vector<double>{2, 4, 8}).alpha));
    }
    SUBCASE("degenerate samples") {
        CHECK_THROWS_AS(pareto_ml_fit(std::vector<double>{1.5, 1.5, 1.5}), DegenerateFit);
        CHECK_THROWS_AS(pareto_ml_fit(std::vector<double>{0, 0, 3}), DegenerateFit);
        CHECK_THROWS_AS(pareto_ml_fit(std::vector<double>{}), DegenerateFit);
        CHECK_THROWS_AS(pareto_ml_fit(std::vector<double>{1, -2, 3}), ValidationError);
    }
    SUBCASE("alpha falls when a sample above x_m grows") {
        Rng rng(3);
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<double> x{0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.5 + rng.uniform()};
            const auto fit = pareto_ml_fit(x);
            auto it = std::max_element(x.begin(), x.end());
            *it += 0.1 + rng.uniform();
            CHECK(pareto_ml_fit(x).alpha < fit.alpha);
        }
    }
}

TEST_CASE("archetype cohorts") {
    const auto arch = default_archetypes();
    REQUIRE(arch.size() == 2);
    CHECK(arch[0].model.decoder.kind == DecoderKind::ModeValue);
    CHECK(arch[1].model.decoder.kind == DecoderKind::WeightedAverage);
    CHECK(arch[0].model.population.margin == 0.0);

    const auto c = make_archetype_cohort(arch, 6, 4, 9);
    REQUIRE(c.models.size() == 6);
    CHECK(c.models[0].label == "u01");
    CHECK(c.models[5].label == "u06");
    CHECK(c.archetype[0] == arch[0].name);
    CHECK(c.archetype[1] == arch[1].name);
    CHECK(c.archetype[2] == arch[0].name);
    CHECK(c.latent.size() == 24);
    std::set<std::string> items;
    for (const auto& l : c.latent) {
        CHECK(l.value >= 1.0);
        CHECK(l.value <= 5.0);
        items.insert(l.item_id);
    }
    CHECK(items == std::set<std::string>{"i01", "i02", "i03", "i04"});

    const auto again = make_archetype_cohort(arch, 6, 4, 9);
    CHECK(again.latent == c.latent);

    // extreme-raters draw mostly near the ends, middle-raters near 3
    const auto big = make_archetype_cohort(arch, 2, 2000, 4);
    int extreme_near_end = 0, middle_near_mid = 0;
    for (const auto& l : big.latent) {
        if (l.user == 0) extreme_near_end += std::abs(l.value - 3.0) > 1.0;
        else middle_near_mid += std::abs(l.value - 3.0) <= 1.0;
    }
    CHECK(extreme_near_end > 1200);
    CHECK(middle_near_mid > 1200);
}
