#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "neurouser/errors.hpp"
#include "neurouser/io.hpp"

using namespace neurouser;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "neurouser_io_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) row.push_back(f);
        rows.push_back(row);
    }
    return rows;
}

std::string ingest_error(const std::string& text) {
    const auto p = scratch("bad.csv");
    write_text(p, text);
    try {
        ingest_ratings(p, RatingScale{});
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

UserModel model_with(DecoderKind kind, Prior prior = UniformPrior{}) {
    UserModel m{build_population(PopulationParams{5, 10, 1, 1, 0}), {kind, prior, std::nullopt}, "m"};
    if (kind == DecoderKind::MaximumLikelihood || kind == DecoderKind::MaximumAPosteriori)
        m.decoder.grid = SearchGrid{1, 5, 0.01};
    return m;
}

} // namespace

TEST_CASE("numbers print shortest and round-trip") {
    for (double x : {0.1, 1.0 / 3.0, 2.0, -7.25, 1e-300, 12345.678901234567})
        CHECK(std::strtod(format_number(x).c_str(), nullptr) == x);
    CHECK(format_number(3.0) == "3");
    CHECK(format_number(0.5) == "0.5");
}

TEST_CASE("population JSON round-trip") {
    Population pop = build_population(PopulationParams{7, 12.5, 0.3, 0.7, 0.5});
    pop.curves[2].gain = 3.14159;
    pop.curves[4].width = 1.0 / 3.0;
    const json j = pop;
    CHECK(j.get<Population>() == pop);
    CHECK(json::parse(j.dump()).get<Population>() == pop);
}

TEST_CASE("population from a layout") {
    const auto j = json::parse(R"({"neurons": 9, "g": 5, "f0": 0.5, "w": 0.8, "margin": 1})");
    const auto pop = j.get<Population>();
    CHECK(pop == build_population(PopulationParams{9, 5, 0.5, 0.8, 1}));
    CHECK_THROWS_AS(json::parse(R"({"neurons": 0})").get<Population>(), ValidationError);
}

TEST_CASE("user model JSON round-trip") {
    const auto grid = SearchGrid{1, 5, 0.5};
    const double ninf = -std::numeric_limits<double>::infinity();
    const std::vector<UserModel> models{
        model_with(DecoderKind::ModeValue),
        model_with(DecoderKind::WeightedAverage),
        model_with(DecoderKind::MaximumLikelihood),
        model_with(DecoderKind::MaximumAPosteriori, GaussianPrior{2.5, 0.4}),
        model_with(DecoderKind::MaximumAPosteriori, TabulatedPrior{grid, {ninf, -2, 0, -1.5, ninf, ninf, -3, ninf, ninf}}),
    };
    for (const auto& m : models) {
        const std::string text = json(m).dump();
        CHECK(json::parse(text).get<UserModel>() == m);
    }
    // -inf is stored as null
    CHECK(json(models.back()).at("decoder").at("prior").at("log_density")[0].is_null());
    CHECK_THROWS_AS(json::parse(R"({"type":"cauchy"})").get<Prior>(), ValidationError);
}

TEST_CASE("fit config and fit result round-trip") {
    FitConfig cfg;
    cfg.candidates = {DecoderKind::MaximumAPosteriori, DecoderKind::ModeValue};
    cfg.gain = {2, 500, true};
    cfg.mc_trials = 123;
    cfg.seed = 99;
    CHECK(json::parse(json(cfg).dump()).get<FitConfig>() == cfg);
    // partial configs keep defaults
    CHECK(json::parse(R"({"budget": 7})").get<FitConfig>().mc_trials == FitConfig{}.mc_trials);

    FitResult f;
    f.user_id = "u7";
    f.params = {21, 31.5, 0.25, 0.9, 1.0};
    f.decoder = DecoderKind::MaximumAPosteriori;
    f.prior = GaussianPrior{3.2, 0.6};
    f.items = {{"i1", 2.3, 0.01, 0.2, 5}, {"i2", 4.9, 0.0, 0.0, 4}};
    f.divergence = 0.01;
    f.evaluations = 160;
    f.sparse_data = false;
    f.candidates = {{DecoderKind::ModeValue, {21, 800, 2, 1, 1}, std::nullopt, 0.2, 40},
                    {DecoderKind::MaximumAPosteriori, f.params, f.prior, 0.01, 40}};
    CHECK(json::parse(json(f).dump(2)).get<FitResult>() == f);
}

TEST_CASE("rating ingestion") {
    const auto p = scratch("ok.csv");
    SUBCASE("header only") {
        write_text(p, "user_id,item_id,trial,rating\n");
        CHECK(ingest_ratings(p, RatingScale{}).empty());
    }
    SUBCASE("one row") {
        write_text(p, "user_id,item_id,trial,rating\nu1,i1,1,3\n");
        const auto obs = ingest_ratings(p, RatingScale{});
        REQUIRE(obs.size() == 1);
        CHECK(obs[0] == RatingObservation{"u1", "i1", 1, 3.0});
    }
    SUBCASE("CRLF, blank lines and 3.0 style ratings") {
        write_text(p, "user_id,item_id,trial,rating\r\nu1,i1,1,3.0\r\n\r\nu1,i1,2,4\r\n");
        const auto obs = ingest_ratings(p, RatingScale{});
        REQUIRE(obs.size() == 2);
        CHECK(obs[0].rating == 3.0);
    }
    SUBCASE("write then read") {
        const std::vector<RatingObservation> obs{{"a", "x", 1, 1}, {"a", "x", 2, 5}, {"b", "y", 3, 2}};
        write_ratings(p, obs);
        CHECK(ingest_ratings(p, RatingScale{}) == obs);
    }
}

TEST_CASE("rating ingestion errors name the line") {
    const std::string h = "user_id,item_id,trial,rating\n";
    CHECK(ingest_error(h + "u1,i1,1,3\nu1,i1,1,4\n").find(":3:") != std::string::npos);
    CHECK(ingest_error(h + "u1,i1,1,3\nu1,i1,1,4\n").find("duplicate") != std::string::npos);
    CHECK(ingest_error(h + "u1,i1,1,7\n").find(":2:") != std::string::npos);
    CHECK(ingest_error(h + "u1,i1,1,2.5\n").find("not a scale category") != std::string::npos);
    CHECK(ingest_error(h + "u1,i1,3\n").find(":2:") != std::string::npos);
    CHECK(ingest_error(h + "u1,i1,0,3\n").find("trial") != std::string::npos);
    CHECK(ingest_error(h + "u1,i1,x,3\n").find("trial") != std::string::npos);
    CHECK(ingest_error(h + "u1,i1,1,three\n").find("not a number") != std::string::npos);
    CHECK(ingest_error(h + ",i1,1,3\n").find(":2:") != std::string::npos);
    CHECK(ingest_error("user,item,trial,rating\n").find(":1:") != std::string::npos);
    CHECK(ingest_error("").find(":1:") != std::string::npos);
    CHECK_THROWS_AS(ingest_ratings(scratch("missing.csv"), RatingScale{}), ValidationError);
}

TEST_CASE("raster") {
    const auto m = model_with(DecoderKind::WeightedAverage);
    const auto p = scratch("raster.csv");
    SUBCASE("one trial, five neurons") {
        emit_raster(m, 3.0, 1, 4, p);
        const auto rows = read_csv(p);
        REQUIRE(rows.size() == 6);
        CHECK(rows[0] == std::vector<std::string>{"trial", "neuron_index", "preferred_value", "count"});
        CHECK(rows[3][2] == "3");
    }
    SUBCASE("fixed seed, identical bytes") {
        emit_raster(m, 2.2, 20, 8, p);
        const auto first = read_text(p);
        emit_raster(m, 2.2, 20, 8, p);
        CHECK(read_text(p) == first);
        emit_raster(m, 2.2, 20, 9, p);
        CHECK(read_text(p) != first);
    }
    SUBCASE("counts regenerate the sampled responses") {
        emit_raster(m, 4.4, 12, 21, p);
        const auto rows = read_csv(p);
        for (std::size_t t = 1; t <= 12; ++t) {
            Rng rng = derive_rng(21, t);
            const auto resp = sample_response(m.population, 4.4, rng);
            for (std::size_t i = 0; i < 5; ++i) {
                const auto& row = rows[(t - 1) * 5 + i + 1];
                CHECK(std::stoul(row[0]) == t);
                CHECK(std::stoul(row[1]) == i);
                CHECK(std::stoi(row[3]) == resp.counts[i]);
            }
        }
    }
    SUBCASE("unwritable path") {
        CHECK_THROWS_AS(emit_raster(m, 3, 1, 1, scratch("no/such/dir/raster.csv")), ValidationError);
    }
}

TEST_CASE("decoder profile") {
    const auto p = scratch("profile.csv");
    const auto e = scratch("estimate.csv");
    const PopulationResponse resp{{1, 4, 6, 2, 1}};
    SUBCASE("MVD estimate is a preferred value") {
        const auto m = model_with(DecoderKind::ModeValue);
        const auto est = emit_decoder_profile(m, resp, 3.0, 1, p, e);
        CHECK(est.value == 3.0);
        const auto rows = read_csv(e);
        REQUIRE(rows.size() == 2);
        CHECK(rows[1] == std::vector<std::string>{"MVD", "3", "3"});
        CHECK(read_csv(p)[0] == std::vector<std::string>{"s", "expected_activity", "log_likelihood"});
    }
    SUBCASE("uniform MAD posterior is the likelihood plus a constant") {
        const auto m = model_with(DecoderKind::MaximumAPosteriori);
        emit_decoder_profile(m, resp, 3.0, 1, p, e);
        const auto rows = read_csv(p);
        REQUIRE(rows[0].size() == 4);
        const double c = std::stod(rows[1][3]) - std::stod(rows[1][2]);
        for (std::size_t r = 1; r < rows.size(); ++r)
            CHECK(std::stod(rows[r][3]) - std::stod(rows[r][2]) == doctest::Approx(c));
    }
    SUBCASE("argmax of the likelihood column is the MLD estimate") {
        for (auto kind : all_decoder_kinds) {
            const auto m = model_with(kind, GaussianPrior{2, 0.5});
            emit_decoder_profile(m, resp, 3.0, 1, p, e);
            const auto rows = read_csv(p);
            double best = -INFINITY, arg = 0.0;
            for (std::size_t r = 1; r < rows.size(); ++r) {
                const double ll = std::stod(rows[r][2]);
                if (ll > best) {
                    best = ll;
                    arg = std::stod(rows[r][0]);
                }
            }
            const SearchGrid grid = m.decoder.grid.value_or(default_grid(m.population));
            CHECK(arg == decode_mld(m.population, resp, grid).value);
        }
    }
    SUBCASE("expected activity peaks at the stimulus") {
        const auto m = model_with(DecoderKind::WeightedAverage);
        emit_decoder_profile(m, resp, 2.0, 1, p, e);
        const auto rows = read_csv(p);
        double best = -1, arg = 0;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (std::stod(rows[r][1]) > best) {
                best = std::stod(rows[r][1]);
                arg = std::stod(rows[r][0]);
            }
        }
        CHECK(arg == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(best == doctest::Approx(tuning_rate({10, 1, 2, 1}, 2.0)));
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(emit_decoder_profile(model_with(DecoderKind::WeightedAverage), PopulationResponse{{1, 2}}, 3,
                                             1, p, e),
                        ValidationError);
    }
}

TEST_CASE("pmf and reliability CSV") {
    const auto p = scratch("pmf.csv");
    write_rating_pmf(p, RatingPMF{{0.1, 0.2, 0.4, 0.2, 0.1}}, RatingScale{});
    CHECK(read_text(p) == "category,probability\n1,0.1\n2,0.2\n3,0.4\n4,0.2\n5,0.1\n");
    ReliabilityProfile prof;
    prof.points.push_back({3.0, 0.25, 0.015625, 3.0, 0.25});
    write_reliability(p, prof);
    CHECK(read_text(p) == "s,mse,fraction,mean,variance\n3,0.25,0.015625,3,0.25\n");
}
