#include "neurouser/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <utility>

#include "neurouser/errors.hpp"

namespace neurouser {

namespace {

std::string numbered(char prefix, std::size_t k, std::size_t total)
{
    const std::size_t digits = std::max<std::size_t>(2, std::to_string(total).size());
    std::string n = std::to_string(k);
    return prefix + std::string(digits > n.size() ? digits - n.size() : 0, '0') + n;
}

std::string user_id_of(const UserModel& m, std::size_t index)
{
    return m.label.empty() ? "u" + std::to_string(index) : m.label;
}

} // namespace

std::vector<RatingObservation> simulate_cohort(std::span<const UserModel> models,
                                               std::span<const LatentAssignment> latent,
                                               std::size_t n_trials, std::uint64_t seed)
{
    std::vector<UserSimulator> sims;
    sims.reserve(models.size());
    for (const auto& m : models)
        sims.emplace_back(m);

    std::vector<RatingObservation> obs;
    obs.reserve(latent.size() * n_trials);
    for (std::size_t p = 0; p < latent.size(); ++p) {
        const auto& a = latent[p];
        if (a.user >= models.size())
            throw ValidationError("latent assignment refers to an unknown user");
        const RatingScale& scale = models[a.user].population.scale;
        if (!(a.value >= scale.min && a.value <= scale.max))
            throw ValidationError("latent value of item " + a.item_id + " lies outside the rating scale");
        const std::uint64_t pair_seed = derive_seed(seed, p);
        const std::string user = user_id_of(models[a.user], a.user);
        for (std::size_t t = 1; t <= n_trials; ++t) {
            Rng rng = derive_rng(pair_seed, t);
            obs.push_back({user, a.item_id, static_cast<int>(t), sims[a.user].rating(a.value, rng)});
        }
    }
    return obs;
}

std::vector<RatingSeries> group_by_pair(std::span<const RatingObservation> obs)
{
    std::map<std::pair<std::string, std::string>, std::vector<std::pair<int, double>>> groups;
    for (const auto& o : obs)
        groups[{o.user_id, o.item_id}].emplace_back(o.trial, o.rating);
    std::vector<RatingSeries> out;
    out.reserve(groups.size());
    for (auto& [key, trials] : groups) {
        std::sort(trials.begin(), trials.end());
        RatingSeries series{key.first, key.second, {}};
        for (const auto& [t, r] : trials)
            series.ratings.push_back(r);
        out.push_back(std::move(series));
    }
    return out;
}

double CategoryUsage::constant_pair_fraction() const noexcept
{
    return pairs == 0 ? 0.0 : static_cast<double>(bins.empty() ? 0 : bins[0]) / static_cast<double>(pairs);
}

double CategoryUsage::constant_user_fraction() const noexcept
{
    return users == 0 ? 0.0 : static_cast<double>(constant_users) / static_cast<double>(users);
}

CategoryUsage category_usage_histogram(std::span<const RatingObservation> obs, const RatingScale& scale)
{
    CategoryUsage usage;
    usage.bins.assign(scale.size(), 0);
    std::map<std::string, bool> user_constant;
    for (const auto& series : group_by_pair(obs)) {
        const std::set<double> distinct(series.ratings.begin(), series.ratings.end());
        if (distinct.empty())
            continue;
        if (distinct.size() > usage.bins.size())
            throw ValidationError("pair uses more distinct ratings than the scale has categories");
        ++usage.bins[distinct.size() - 1];
        ++usage.pairs;
        auto [it, inserted] = user_constant.try_emplace(series.user_id, true);
        it->second = it->second && distinct.size() == 1;
    }
    usage.users = user_constant.size();
    for (const auto& [user, constant] : user_constant)
        usage.constant_users += constant;
    return usage;
}

VarianceSamples variance_samples(std::span<const RatingObservation> obs, bool unbiased)
{
    VarianceSamples out;
    for (const auto& series : group_by_pair(obs)) {
        const auto& r = series.ratings;
        if (r.size() < 2) {
            ++out.skipped;
            continue;
        }
        double mean = 0.0;
        for (double x : r)
            mean += x;
        mean /= static_cast<double>(r.size());
        double ss = 0.0;
        for (double x : r)
            ss += (x - mean) * (x - mean);
        if (std::all_of(r.begin(), r.end(), [&](double x) { return x == r.front(); }))
            ss = 0.0; // the mean of equal non-integers can miss by an ulp
        const double n = static_cast<double>(r.size());
        out.samples.push_back({series.user_id, series.item_id, ss / (unbiased ? n - 1.0 : n), r.size()});
    }
    return out;
}

std::vector<VarianceSample> per_user_variances(std::span<const VarianceSample> samples)
{
    std::map<std::string, std::pair<double, std::size_t>> acc;
    std::map<std::string, std::size_t> trials;
    for (const auto& s : samples) {
        auto& [sum, n] = acc[s.user_id];
        sum += s.variance;
        ++n;
        trials[s.user_id] += s.n_trials;
    }
    std::vector<VarianceSample> out;
    for (const auto& [user, sn] : acc)
        out.push_back({user, "", sn.first / static_cast<double>(sn.second), trials[user]});
    return out;
}

ParetoFit pareto_ml_fit(std::span<const double> samples)
{
    ParetoFit fit;
    std::vector<double> positive;
    for (double x : samples) {
        if (!std::isfinite(x) || x < 0.0)
            throw ValidationError("Pareto samples must be finite and non-negative");
        if (x == 0.0)
            ++fit.n_excluded;
        else
            positive.push_back(x);
    }
    if (positive.size() < 2)
        throw DegenerateFit("Pareto fit needs at least two positive samples");
    fit.x_m = *std::min_element(positive.begin(), positive.end());
    double log_sum = 0.0;
    for (double x : positive)
        log_sum += std::log(x / fit.x_m);
    if (!(log_sum > 0.0))
        throw DegenerateFit("Pareto shape diverges: all positive samples are equal");
    fit.n_used = positive.size();
    fit.alpha = static_cast<double>(positive.size()) / log_sum;
    return fit;
}

SyntheticCohort make_archetype_cohort(std::span<const Archetype> archetypes, std::size_t n_users,
                                      std::size_t n_items, std::uint64_t seed)
{
    if (archetypes.empty())
        throw ValidationError("archetype cohort needs at least one archetype");
    SyntheticCohort cohort;
    for (std::size_t u = 0; u < n_users; ++u) {
        const Archetype& a = archetypes[u % archetypes.size()];
        UserModel m = a.model;
        m.label = numbered('u', u + 1, n_users);
        const RatingScale& scale = m.population.scale;
        Rng rng = derive_rng(seed, u);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t i = 0; i < n_items; ++i) {
            double s = 0.0;
            switch (a.latent.kind) {
            case LatentDistribution::Kind::Uniform:
                s = scale.min + rng.uniform() * scale.span();
                break;
            case LatentDistribution::Kind::Mixture:
                if (rng.uniform() < a.latent.extreme_weight) {
                    const double offset = std::abs(normal(rng)) * a.latent.spread;
                    s = rng.below(2) == 0 ? scale.min + offset : scale.max - offset;
                } else {
                    s = 0.5 * (scale.min + scale.max) + normal(rng) * a.latent.spread;
                }
                break;
            }
            s = std::clamp(s, scale.min, scale.max);
            cohort.latent.push_back({u, numbered('i', i + 1, n_items), s});
        }
        cohort.models.push_back(std::move(m));
        cohort.archetype.push_back(a.name);
    }
    return cohort;
}

std::vector<Archetype> default_archetypes(const RatingScale& scale)
{
    // Wide tuning flattens the top of the MVD population response, so the
    // argmax wanders in the middle of the scale but piles up at the clipped ends.
    const PopulationParams extreme{21, 100.0, 1.0, 2.0, 0.0};
    const PopulationParams middle{21, 5.0, 1.0, 1.0, 0.0};
    return {
        {"extreme-rater",
         {build_population(extreme, scale), {DecoderKind::ModeValue, UniformPrior{}, std::nullopt}, ""},
         {LatentDistribution::Kind::Mixture, 0.7, 0.2}},
        {"middle-rater",
         {build_population(middle, scale), {DecoderKind::WeightedAverage, UniformPrior{}, std::nullopt}, ""},
         {LatentDistribution::Kind::Mixture, 0.3, 0.2}},
    };
}

} // namespace neurouser
