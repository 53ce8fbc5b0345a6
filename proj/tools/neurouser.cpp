// neurouser: simulate, decode, fit and cluster population-code user models.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "neurouser/clustering.hpp"
#include "neurouser/cohort.hpp"
#include "neurouser/errors.hpp"
#include "neurouser/fitting.hpp"
#include "neurouser/io.hpp"

namespace fs = std::filesystem;
using namespace neurouser;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string config_path;
    std::string out_dir = "out";
    json config = json::object();
};

RatingScale scale_from(const Globals& g) {
    RatingScale s;
    if (g.config.contains("scale")) g.config.at("scale").get_to(s);
    return s;
}

/// Model from --model file, else config "model", else a default population
/// with `fallback` decoder.
UserModel model_from(const Globals& g, const std::string& model_path, const std::string& decoder_tag,
                     DecoderKind fallback) {
    UserModel m;
    if (!model_path.empty()) {
        read_json(model_path).get_to(m);
    } else if (g.config.contains("model")) {
        g.config.at("model").get_to(m);
    } else {
        m.population = build_population(PopulationParams{}, scale_from(g));
        m.decoder.kind = fallback;
        if (fallback == DecoderKind::MaximumAPosteriori) {
            m.decoder.prior = GaussianPrior{(m.population.scale.min + m.population.scale.max) / 2, 1.0};
        }
    }
    if (!decoder_tag.empty()) m.decoder.kind = parse_decoder_kind(decoder_tag);
    m.validate();
    return m;
}

PopulationResponse parse_counts(const std::string& text) {
    PopulationResponse r;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size() || v < 0) {
            throw ValidationError("--counts: '" + item + "' is not a non-negative integer");
        }
        r.counts.push_back(v);
    }
    return r;
}

std::string safe_name(const std::string& id) {
    std::string out = id;
    for (char& c : out) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    }
    return out;
}

void write_response(const fs::path& path, const Population& pop, const PopulationResponse& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << "neuron_index,preferred_value,count\n";
    const auto pref = pop.preferred_values();
    for (std::size_t i = 0; i < r.counts.size(); ++i) {
        out << i << ',' << format_number(pref[i]) << ',' << r.counts[i] << '\n';
    }
}

void finish(const Globals& g, const std::string& command, json config, std::vector<std::string> inputs,
            std::vector<std::string> outputs) {
    std::erase(inputs, std::string{});
    RunManifest m{command, std::move(config), g.seed, std::move(inputs), std::move(outputs), tool_version};
    write_manifest(g.out_dir, m);
}

LatentDistribution latent_from(const json& j) {
    LatentDistribution d;
    const auto kind = j.value("kind", std::string("uniform"));
    if (kind == "uniform") d.kind = LatentDistribution::Kind::Uniform;
    else if (kind == "mixture") d.kind = LatentDistribution::Kind::Mixture;
    else throw ValidationError("unknown latent kind '" + kind + "'");
    d.extreme_weight = j.value("extreme_weight", d.extreme_weight);
    d.spread = j.value("spread", d.spread);
    return d;
}

json latent_to(const LatentDistribution& d) {
    return json{{"kind", d.kind == LatentDistribution::Kind::Uniform ? "uniform" : "mixture"},
                {"extreme_weight", d.extreme_weight},
                {"spread", d.spread}};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Population-code user models: simulate ratings, decode responses, fit and cluster users."};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Base seed (default 0)");
    app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", g.out_dir, "Output directory (default ./out)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate an archetype cohort and its repeated ratings");
    std::size_t sim_users = 50, sim_items = 20, sim_trials = 5;
    sim->add_option("--users", sim_users, "Number of users (default 50)");
    sim->add_option("--items", sim_items, "Items per user (default 20)");
    sim->add_option("--trials", sim_trials, "Ratings per (user, item) (default 5)");

    // decode
    auto* dec = app.add_subcommand("decode", "Decode one population response with all four decoders");
    std::string dec_model, dec_counts;
    std::optional<double> dec_stimulus;
    dec->add_option("--model", dec_model, "UserModel JSON (population and MAD prior)");
    dec->add_option("--counts", dec_counts, "Comma-separated spike counts, one per neuron");
    dec->add_option("--stimulus", dec_stimulus, "Sample the response for this latent value instead");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a user model to every user in a ratings CSV");
    std::string fit_ratings;
    fit->add_option("--ratings", fit_ratings, "Ratings CSV")->required()->check(CLI::ExistingFile);

    // cluster
    auto* clu = app.add_subcommand("cluster", "k-means over fitted user parameters");
    std::string clu_fits;
    std::size_t clu_k = 2, clu_restarts = 10;
    double clu_weight = 1.0;
    clu->add_option("--fits", clu_fits, "fits.json written by `fit`")->required()->check(CLI::ExistingFile);
    clu->add_option("--k", clu_k, "Number of clusters (default 2)");
    clu->add_option("--restarts", clu_restarts, "Random restarts (default 10)");
    clu->add_option("--onehot-weight", clu_weight, "Weight of the decoder one-hot block (default 1)");

    // stats
    auto* sta = app.add_subcommand("stats", "Category usage, rating variances and Pareto fit");
    std::string sta_ratings;
    bool sta_unbiased = false, sta_per_user = false;
    sta->add_option("--ratings", sta_ratings, "Ratings CSV")->required()->check(CLI::ExistingFile);
    sta->add_flag("--unbiased", sta_unbiased, "Divide pair variances by n - 1");
    sta->add_flag("--per-user", sta_per_user, "Fit Pareto to per-user mean variances");

    // raster
    auto* ras = app.add_subcommand("raster", "Spike raster of repeated responses to one latent value");
    std::string ras_model;
    double ras_stimulus = 3.0;
    std::size_t ras_trials = 10;
    ras->add_option("--model", ras_model, "UserModel JSON");
    ras->add_option("--stimulus", ras_stimulus, "Latent value (default 3)");
    ras->add_option("--trials", ras_trials, "Number of trials (default 10)");

    // profile
    auto* pro = app.add_subcommand("profile", "Likelihood/posterior curve and estimate for one response");
    std::string pro_model, pro_counts, pro_decoder;
    double pro_stimulus = 3.0;
    pro->add_option("--model", pro_model, "UserModel JSON");
    pro->add_option("--decoder", pro_decoder, "Override decoder: MVD, WAD, MLD or MAD");
    pro->add_option("--counts", pro_counts, "Comma-separated spike counts (default: sampled)");
    pro->add_option("--stimulus", pro_stimulus, "Latent value for sampling and expected activity (default 3)");
    bool pro_reliability = false, pro_continuous = false;
    std::size_t pro_mc = 1000, pro_points = 17;
    pro->add_flag("--reliability", pro_reliability,
                  "Also write rating_pmf.csv at --stimulus and reliability.csv over the scale");
    pro->add_flag("--continuous", pro_continuous, "Reliability of continuous estimates instead of ratings");
    pro->add_option("--mc-trials", pro_mc, "Monte Carlo trials per point (default 1000)");
    pro->add_option("--points", pro_points, "Latent values in the reliability profile (default 17)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!g.config_path.empty()) g.config = read_json(g.config_path);
        fs::create_directories(g.out_dir);
        const fs::path out = g.out_dir;

        if (*sim) {
            const auto scale = scale_from(g);
            std::vector<Archetype> archetypes;
            if (g.config.contains("archetypes")) {
                for (const auto& a : g.config.at("archetypes")) {
                    Archetype arch;
                    arch.name = a.at("name").get<std::string>();
                    a.at("model").get_to(arch.model);
                    arch.latent = latent_from(a.value("latent", json::object()));
                    archetypes.push_back(std::move(arch));
                }
            } else {
                archetypes = default_archetypes(scale);
            }
            if (archetypes.empty()) throw ValidationError("no archetypes configured");
            const auto cohort = make_archetype_cohort(archetypes, sim_users, sim_items, g.seed);
            const auto obs = simulate_cohort(cohort.models, cohort.latent, sim_trials, g.seed);
            write_ratings(out / "ratings.csv", obs);
            {
                std::ofstream lat(out / "latent.csv", std::ios::binary);
                lat << "user_id,archetype,item_id,latent\n";
                for (const auto& l : cohort.latent) {
                    lat << cohort.models[l.user].label << ',' << cohort.archetype[l.user] << ',' << l.item_id
                        << ',' << format_number(l.value) << '\n';
                }
            }
            json arch_json = json::array();
            for (const auto& a : archetypes) {
                arch_json.push_back(json{{"name", a.name}, {"model", a.model}, {"latent", latent_to(a.latent)}});
            }
            json cfg{{"users", sim_users}, {"items", sim_items}, {"trials", sim_trials},
                     {"scale", scale}, {"archetypes", arch_json}};
            finish(g, "simulate", cfg, {}, {"ratings.csv", "latent.csv"});
            std::cout << obs.size() << " ratings from " << sim_users << " users\n";
        } else if (*dec) {
            UserModel m = model_from(g, dec_model, "", DecoderKind::MaximumAPosteriori);
            const auto& pop = m.population;
            PopulationResponse resp;
            if (!dec_counts.empty()) {
                resp = parse_counts(dec_counts);
            } else if (dec_stimulus) {
                Rng rng = derive_rng(g.seed, 0);
                resp = sample_response(pop, *dec_stimulus, rng);
            } else {
                throw ValidationError("decode needs --counts or --stimulus");
            }
            if (resp.counts.size() != pop.size()) {
                throw ValidationError("expected " + std::to_string(pop.size()) + " counts, got " +
                                      std::to_string(resp.counts.size()));
            }
            Prior prior = m.decoder.prior;
            if (std::holds_alternative<UniformPrior>(prior) && m.decoder.kind != DecoderKind::MaximumAPosteriori) {
                prior = GaussianPrior{(pop.scale.min + pop.scale.max) / 2, 1.0};
            }
            write_response(out / "response.csv", pop, resp);
            std::ofstream est(out / "decode.csv", std::ios::binary);
            est << "decoder,estimate,rating\n";
            for (auto kind : all_decoder_kinds) {
                DecoderSpec spec{kind, kind == DecoderKind::MaximumAPosteriori ? prior : Prior{UniformPrior{}},
                                 m.decoder.grid};
                Rng rng = derive_rng(g.seed, 1);
                std::string value = "nan", rating = "nan";
                try {
                    auto e = Decoder(pop, spec).decode(resp, rng);
                    value = format_number(e.value);
                    rating = format_number(e.rating);
                } catch (const NumericalError& err) {
                    std::cerr << to_string(kind) << ": " << err.what() << '\n';
                }
                est << to_string(kind) << ',' << value << ',' << rating << '\n';
            }
            est.close();
            m.decoder.prior = prior;
            finish(g, "decode", json{{"model", m}, {"counts", resp.counts}}, {dec_model},
                   {"response.csv", "decode.csv"});
        } else if (*fit) {
            const auto scale = scale_from(g);
            FitConfig cfg;
            if (g.config.contains("fit")) g.config.at("fit").get_to(cfg);
            cfg.seed = g.seed;
            cfg.validate();
            const auto obs = ingest_ratings(fit_ratings, scale);
            if (obs.empty()) throw ValidationError(fit_ratings + ": no ratings");
            std::map<std::string, std::vector<RatingObservation>> by_user;
            for (const auto& o : obs) by_user[o.user_id].push_back(o);
            fs::create_directories(out / "fits");
            json index = json::array();
            std::vector<std::string> outputs{"fits.json"};
            for (const auto& [user, rows] : by_user) {
                const auto result = fit_user_model(rows, scale, cfg);
                const std::string rel = "fits/" + safe_name(user) + ".json";
                write_json(out / rel, result);
                outputs.push_back(rel);
                index.push_back(json{{"user_id", user},
                                     {"path", rel},
                                     {"decoder", std::string(to_string(result.decoder))},
                                     {"divergence", result.divergence}});
                std::cerr << user << ": " << to_string(result.decoder) << '\n';
            }
            write_json(out / "fits.json", json{{"scale", scale}, {"config", cfg}, {"fits", index}});
            finish(g, "fit", json{{"scale", scale}, {"fit", cfg}}, {fit_ratings}, outputs);
        } else if (*clu) {
            const json index = read_json(clu_fits);
            const fs::path base = fs::path(clu_fits).parent_path();
            std::vector<FitResult> fits;
            for (const auto& e : index.at("fits")) {
                fits.push_back(read_json(base / e.at("path").get<std::string>()).get<FitResult>());
            }
            const auto features = featurize(fits, clu_weight);
            const auto result = cluster_users(features, clu_k, clu_restarts, g.seed);
            {
                std::ofstream a(out / "assignments.csv", std::ios::binary);
                a << "user_id,cluster\n";
                for (std::size_t i = 0; i < features.size(); ++i) {
                    a << features[i].user_id << ',' << result.assignments[i] << '\n';
                }
            }
            json q = result;
            q["features"] = {"gain_z", "baseline_z", "width_z", "mean_model_variance_z",
                             "MVD", "WAD", "MLD", "MAD"};
            q["onehot_weight"] = clu_weight;
            write_json(out / "clusters.json", q);
            finish(g, "cluster",
                   json{{"k", clu_k}, {"restarts", clu_restarts}, {"onehot_weight", clu_weight}},
                   {clu_fits}, {"assignments.csv", "clusters.json"});
        } else if (*sta) {
            const auto scale = scale_from(g);
            const auto obs = ingest_ratings(sta_ratings, scale);
            const auto usage = category_usage_histogram(obs, scale);
            {
                std::ofstream u(out / "category_usage.csv", std::ios::binary);
                u << "distinct_categories,pairs,fraction\n";
                for (std::size_t k = 0; k < usage.bins.size(); ++k) {
                    const double frac = usage.pairs ? static_cast<double>(usage.bins[k]) / usage.pairs : 0.0;
                    u << k + 1 << ',' << usage.bins[k] << ',' << format_number(frac) << '\n';
                }
            }
            const auto vs = variance_samples(obs, sta_unbiased);
            std::vector<VarianceSample> rows = sta_per_user ? per_user_variances(vs.samples) : vs.samples;
            {
                std::ofstream v(out / "variances.csv", std::ios::binary);
                v << "user_id,item_id,n_trials,variance\n";
                for (const auto& s : rows) {
                    v << s.user_id << ',' << s.item_id << ',' << s.n_trials << ',' << format_number(s.variance)
                      << '\n';
                }
            }
            json summary{{"pairs", usage.pairs},
                         {"users", usage.users},
                         {"constant_pair_fraction", usage.constant_pair_fraction()},
                         {"constant_user_fraction", usage.constant_user_fraction()},
                         {"constant_users", usage.constant_users},
                         {"variance_samples", rows.size()},
                         {"skipped_pairs", vs.skipped},
                         {"unbiased", sta_unbiased},
                         {"per_user", sta_per_user}};
            write_json(out / "stats.json", summary);
            std::vector<double> values;
            for (const auto& s : rows) values.push_back(s.variance);
            std::vector<std::string> outputs{"category_usage.csv", "variances.csv", "stats.json"};
            const json cfg{{"scale", scale}, {"unbiased", sta_unbiased}, {"per_user", sta_per_user}};
            try {
                write_json(out / "pareto.json", pareto_ml_fit(values));
                outputs.push_back("pareto.json");
            } catch (const NumericalError&) {
                finish(g, "stats", cfg, {sta_ratings}, outputs);
                throw;
            }
            finish(g, "stats", cfg, {sta_ratings}, outputs);
        } else if (*ras) {
            const UserModel m = model_from(g, ras_model, "", DecoderKind::WeightedAverage);
            emit_raster(m, ras_stimulus, ras_trials, g.seed, out / "raster.csv");
            finish(g, "raster", json{{"model", m}, {"stimulus", ras_stimulus}, {"trials", ras_trials}},
                   {ras_model}, {"raster.csv"});
        } else if (*pro) {
            const UserModel m = model_from(g, pro_model, pro_decoder, DecoderKind::MaximumLikelihood);
            PopulationResponse resp;
            if (!pro_counts.empty()) {
                resp = parse_counts(pro_counts);
            } else {
                Rng rng = derive_rng(g.seed, 0);
                resp = sample_response(m.population, pro_stimulus, rng);
            }
            write_response(out / "response.csv", m.population, resp);
            emit_decoder_profile(m, resp, pro_stimulus, derive_seed(g.seed, 1), out / "profile.csv",
                                 out / "estimate.csv");
            std::vector<std::string> outputs{"response.csv", "profile.csv", "estimate.csv"};
            json cfg{{"model", m}, {"stimulus", pro_stimulus}, {"counts", resp.counts}};
            if (pro_reliability) {
                if (pro_points < 2) throw ValidationError("--points must be >= 2");
                const auto& scale = m.population.scale;
                std::vector<double> s_values;
                for (std::size_t p = 0; p < pro_points; ++p)
                    s_values.push_back(scale.min + scale.span() * static_cast<double>(p) / (pro_points - 1));
                write_rating_pmf(out / "rating_pmf.csv", rating_pmf_mc(m, pro_stimulus, pro_mc, derive_seed(g.seed, 2)),
                                 scale);
                write_reliability(out / "reliability.csv",
                                  reliability_profile(m, s_values, pro_mc, derive_seed(g.seed, 3), pro_continuous));
                outputs.push_back("rating_pmf.csv");
                outputs.push_back("reliability.csv");
                cfg["reliability"] = json{{"mc_trials", pro_mc}, {"points", pro_points}, {"continuous", pro_continuous}};
            }
            finish(g, "profile", cfg, {pro_model}, outputs);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
