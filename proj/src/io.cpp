#include "neurouser/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "neurouser/errors.hpp"

namespace neurouser {

namespace {

template <class T>
void get_if(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    return out;
}

void check_written(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw ValidationError("write failed: " + path.string());
}

json optional_prior(const std::optional<GaussianPrior>& p) {
    if (!p) return nullptr;
    return json{{"mean", p->mean}, {"sd", p->sd}};
}

std::optional<GaussianPrior> read_optional_prior(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    GaussianPrior p;
    it->at("mean").get_to(p.mean);
    it->at("sd").get_to(p.sd);
    return p;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void to_json(json& j, const RatingScale& scale) {
    j = json{{"min", scale.min}, {"max", scale.max}, {"categories", scale.categories}};
}

void from_json(const json& j, RatingScale& scale) {
    RatingScale s;
    if (j.contains("stars")) {
        s = RatingScale::stars(j.at("stars").get<int>());
    } else {
        get_if(j, "min", s.min);
        get_if(j, "max", s.max);
        get_if(j, "categories", s.categories);
    }
    s.validate();
    scale = s;
}

void to_json(json& j, const TuningCurve& c) {
    j = json{{"g", c.gain}, {"f0", c.baseline}, {"s_p", c.preferred}, {"w", c.width}};
}

void from_json(const json& j, TuningCurve& c) {
    j.at("g").get_to(c.gain);
    j.at("f0").get_to(c.baseline);
    j.at("s_p").get_to(c.preferred);
    j.at("w").get_to(c.width);
}

void to_json(json& j, const Population& pop) {
    j = json{{"scale", pop.scale}, {"margin", pop.margin}, {"curves", pop.curves}};
}

void from_json(const json& j, Population& pop) {
    RatingScale scale;
    get_if(j, "scale", scale);
    if (j.contains("curves")) {
        Population p;
        p.scale = scale;
        get_if(j, "margin", p.margin);
        j.at("curves").get_to(p.curves);
        p.validate();
        pop = std::move(p);
        return;
    }
    PopulationParams params;
    from_json(j, params);
    pop = build_population(params, scale);
}

void to_json(json& j, const PopulationParams& p) {
    j = json{{"neurons", p.neurons}, {"g", p.gain}, {"f0", p.baseline}, {"w", p.width}, {"margin", p.margin}};
}

void from_json(const json& j, PopulationParams& p) {
    get_if(j, "neurons", p.neurons);
    get_if(j, "g", p.gain);
    get_if(j, "f0", p.baseline);
    get_if(j, "w", p.width);
    get_if(j, "margin", p.margin);
}

void to_json(json& j, const SearchGrid& g) {
    j = json{{"lo", g.lo}, {"hi", g.hi}, {"step", g.step}};
}

void from_json(const json& j, SearchGrid& g) {
    j.at("lo").get_to(g.lo);
    j.at("hi").get_to(g.hi);
    get_if(j, "step", g.step);
}

void to_json(json& j, const Prior& prior) {
    std::visit(
        [&j](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, UniformPrior>) {
                j = json{{"type", "uniform"}};
            } else if constexpr (std::is_same_v<T, GaussianPrior>) {
                j = json{{"type", "gaussian"}, {"mean", p.mean}, {"sd", p.sd}};
            } else {
                json values = json::array();
                for (double v : p.log_density) {
                    if (std::isinf(v) && v < 0) values.push_back(nullptr);
                    else values.push_back(v);
                }
                j = json{{"type", "tabulated"}, {"grid", p.grid}, {"log_density", values}};
            }
        },
        prior);
}

void from_json(const json& j, Prior& prior) {
    const auto type = j.at("type").get<std::string>();
    if (type == "uniform") {
        prior = UniformPrior{};
    } else if (type == "gaussian") {
        GaussianPrior p;
        get_if(j, "mean", p.mean);
        get_if(j, "sd", p.sd);
        prior = p;
    } else if (type == "tabulated") {
        TabulatedPrior p;
        j.at("grid").get_to(p.grid);
        for (const auto& v : j.at("log_density")) {
            p.log_density.push_back(v.is_null() ? -std::numeric_limits<double>::infinity()
                                                : v.get<double>());
        }
        prior = std::move(p);
    } else {
        throw ValidationError("unknown prior type '" + type + "'");
    }
    validate_prior(prior);
}

void to_json(json& j, const DecoderSpec& spec) {
    j = json{{"variant", std::string(to_string(spec.kind))}, {"prior", spec.prior}};
    j["grid"] = spec.grid ? json(*spec.grid) : json(nullptr);
}

void from_json(const json& j, DecoderSpec& spec) {
    DecoderSpec s;
    s.kind = parse_decoder_kind(j.at("variant").get<std::string>());
    get_if(j, "prior", s.prior);
    if (auto it = j.find("grid"); it != j.end() && !it->is_null()) s.grid = it->get<SearchGrid>();
    spec = std::move(s);
}

void to_json(json& j, const UserModel& m) {
    j = json{{"label", m.label}, {"population", m.population}, {"decoder", m.decoder}};
}

void from_json(const json& j, UserModel& m) {
    UserModel out;
    get_if(j, "label", out.label);
    j.at("population").get_to(out.population);
    get_if(j, "decoder", out.decoder);
    out.validate();
    m = std::move(out);
}

void to_json(json& j, const ParamBounds& b) {
    j = json{{"lo", b.lo}, {"hi", b.hi}, {"log_scale", b.log_scale}};
}

void from_json(const json& j, ParamBounds& b) {
    get_if(j, "lo", b.lo);
    get_if(j, "hi", b.hi);
    get_if(j, "log_scale", b.log_scale);
}

void to_json(json& j, const FitConfig& c) {
    json cands = json::array();
    for (auto k : c.candidates) cands.push_back(std::string(to_string(k)));
    j = json{{"candidates", cands},
             {"gain", c.gain},
             {"baseline", c.baseline},
             {"width", c.width},
             {"prior_sd", c.prior_sd},
             {"initial", c.initial},
             {"neurons", c.neurons},
             {"margin", c.margin},
             {"mc_trials", c.mc_trials},
             {"epsilon", c.epsilon},
             {"budget", c.budget},
             {"line_iterations", c.line_iterations},
             {"tolerance", c.tolerance},
             {"latent_step", c.latent_step},
             {"decoder_step", c.decoder_step},
             {"seed", c.seed}};
}

void from_json(const json& j, FitConfig& c) {
    if (auto it = j.find("candidates"); it != j.end()) {
        c.candidates.clear();
        for (const auto& tag : *it) c.candidates.push_back(parse_decoder_kind(tag.get<std::string>()));
    }
    get_if(j, "gain", c.gain);
    get_if(j, "baseline", c.baseline);
    get_if(j, "width", c.width);
    get_if(j, "prior_sd", c.prior_sd);
    get_if(j, "initial", c.initial);
    get_if(j, "neurons", c.neurons);
    get_if(j, "margin", c.margin);
    get_if(j, "mc_trials", c.mc_trials);
    get_if(j, "epsilon", c.epsilon);
    get_if(j, "budget", c.budget);
    get_if(j, "line_iterations", c.line_iterations);
    get_if(j, "tolerance", c.tolerance);
    get_if(j, "latent_step", c.latent_step);
    get_if(j, "decoder_step", c.decoder_step);
    get_if(j, "seed", c.seed);
}

void to_json(json& j, const FitResult& f) {
    json items = json::array();
    for (const auto& it : f.items) {
        items.push_back(json{{"item_id", it.item_id},
                             {"latent", it.latent},
                             {"divergence", it.divergence},
                             {"model_variance", it.model_variance},
                             {"n_trials", it.n_trials}});
    }
    json cands = json::array();
    for (const auto& c : f.candidates) {
        cands.push_back(json{{"decoder", std::string(to_string(c.decoder))},
                             {"params", c.params},
                             {"prior", optional_prior(c.prior)},
                             {"divergence", c.divergence},
                             {"evaluations", c.evaluations}});
    }
    j = json{{"user_id", f.user_id},
             {"decoder", std::string(to_string(f.decoder))},
             {"params", f.params},
             {"prior", optional_prior(f.prior)},
             {"divergence", f.divergence},
             {"evaluations", f.evaluations},
             {"sparse_data", f.sparse_data},
             {"mean_model_variance", f.mean_model_variance()},
             {"items", items},
             {"candidates", cands}};
}

void from_json(const json& j, FitResult& f) {
    FitResult out;
    j.at("user_id").get_to(out.user_id);
    out.decoder = parse_decoder_kind(j.at("decoder").get<std::string>());
    j.at("params").get_to(out.params);
    out.prior = read_optional_prior(j, "prior");
    get_if(j, "divergence", out.divergence);
    get_if(j, "evaluations", out.evaluations);
    get_if(j, "sparse_data", out.sparse_data);
    if (auto it = j.find("items"); it != j.end()) {
        for (const auto& e : *it) {
            ItemFit item;
            e.at("item_id").get_to(item.item_id);
            e.at("latent").get_to(item.latent);
            get_if(e, "divergence", item.divergence);
            get_if(e, "model_variance", item.model_variance);
            get_if(e, "n_trials", item.n_trials);
            out.items.push_back(std::move(item));
        }
    }
    if (auto it = j.find("candidates"); it != j.end()) {
        for (const auto& e : *it) {
            CandidateFit c;
            c.decoder = parse_decoder_kind(e.at("decoder").get<std::string>());
            e.at("params").get_to(c.params);
            c.prior = read_optional_prior(e, "prior");
            get_if(e, "divergence", c.divergence);
            get_if(e, "evaluations", c.evaluations);
            out.candidates.push_back(std::move(c));
        }
    }
    f = std::move(out);
}

void to_json(json& j, const ParetoFit& p) {
    j = json{{"x_m", p.x_m}, {"alpha", p.alpha}, {"n_used", p.n_used}, {"n_excluded", p.n_excluded}};
}

void to_json(json& j, const ClusterResult& r) {
    j = json{{"k", r.k},
             {"wcss", r.wcss},
             {"silhouette", r.silhouette},
             {"seed", r.seed},
             {"best_restart", r.best_restart},
             {"restart_wcss", r.restart_wcss},
             {"wcss_trace", r.wcss_trace},
             {"centroids", r.centroids}};
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& doc) {
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
    check_written(out, path);
}

std::vector<RatingObservation> ingest_ratings(const std::filesystem::path& path, const RatingScale& scale) {
    scale.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    const std::string where = path.string() + ":";
    std::string line;
    if (!std::getline(in, line) || trim(line) != "user_id,item_id,trial,rating") {
        throw ValidationError(where + "1: expected header 'user_id,item_id,trial,rating'");
    }
    std::vector<RatingObservation> out;
    std::map<std::tuple<std::string, std::string, int>, std::size_t> seen;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::string at = where + std::to_string(lineno) + ": ";
        auto fields = split_csv(line);
        if (fields.size() != 4) {
            throw ValidationError(at + "expected 4 fields, got " + std::to_string(fields.size()));
        }
        for (auto& f : fields) f = trim(f);
        RatingObservation obs;
        obs.user_id = fields[0];
        obs.item_id = fields[1];
        if (obs.user_id.empty() || obs.item_id.empty()) throw ValidationError(at + "empty user_id or item_id");
        {
            const auto& t = fields[2];
            auto res = std::from_chars(t.data(), t.data() + t.size(), obs.trial);
            if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || obs.trial < 1) {
                throw ValidationError(at + "trial must be a positive integer, got '" + t + "'");
            }
        }
        {
            const auto& r = fields[3];
            double v = 0.0;
            auto res = std::from_chars(r.data(), r.data() + r.size(), v);
            if (res.ec != std::errc{} || res.ptr != r.data() + r.size() || !std::isfinite(v)) {
                throw ValidationError(at + "rating is not a number: '" + r + "'");
            }
            auto near = std::find_if(scale.categories.begin(), scale.categories.end(),
                                     [v](double c) { return std::abs(c - v) <= 1e-9; });
            if (near == scale.categories.end()) {
                throw ValidationError(at + "rating " + r + " is not a scale category");
            }
            obs.rating = *near;
        }
        auto key = std::make_tuple(obs.user_id, obs.item_id, obs.trial);
        if (auto [it, fresh] = seen.emplace(key, lineno); !fresh) {
            throw ValidationError(at + "duplicate (user, item, trial) first seen on line " +
                                  std::to_string(it->second));
        }
        out.push_back(std::move(obs));
    }
    return out;
}

void write_ratings(const std::filesystem::path& path, std::span<const RatingObservation> obs) {
    auto out = open_out(path);
    out << "user_id,item_id,trial,rating\n";
    for (const auto& o : obs) {
        out << o.user_id << ',' << o.item_id << ',' << o.trial << ',' << format_number(o.rating) << '\n';
    }
    check_written(out, path);
}

void emit_raster(const UserModel& model, double s, std::size_t n_trials, std::uint64_t seed,
                 const std::filesystem::path& path) {
    model.validate();
    const auto& pop = model.population;
    const auto pref = pop.preferred_values();
    auto out = open_out(path);
    out << "trial,neuron_index,preferred_value,count\n";
    PopulationResponse resp;
    for (std::size_t t = 1; t <= n_trials; ++t) {
        Rng rng = derive_rng(seed, t);
        sample_response(pop, s, rng, resp);
        for (std::size_t i = 0; i < resp.counts.size(); ++i) {
            out << t << ',' << i << ',' << format_number(pref[i]) << ',' << resp.counts[i] << '\n';
        }
    }
    check_written(out, path);
}

Estimate emit_decoder_profile(const UserModel& model, const PopulationResponse& resp, double stimulus,
                              std::uint64_t seed, const std::filesystem::path& path,
                              const std::filesystem::path& estimate_path) {
    model.validate();
    const auto& pop = model.population;
    if (resp.counts.size() != pop.size()) {
        throw ValidationError("response has " + std::to_string(resp.counts.size()) +
                              " counts, population has " + std::to_string(pop.size()));
    }
    const bool posterior = model.decoder.kind == DecoderKind::MaximumAPosteriori;
    const SearchGrid grid = model.decoder.grid.value_or(default_grid(pop));

    Rng rng(seed);
    const Estimate est = Decoder(pop, model.decoder).decode(resp, rng);

    DecoderSpec mld_spec{DecoderKind::MaximumLikelihood, UniformPrior{}, grid};
    std::vector<double> loglik = Decoder(pop, mld_spec).decode(resp, rng, true).profile;
    std::vector<double> logpost;
    if (posterior) {
        DecoderSpec mad_spec{DecoderKind::MaximumAPosteriori, model.decoder.prior, grid};
        logpost = Decoder(pop, mad_spec).decode(resp, rng, true).profile;
    }

    const auto pref = pop.preferred_values();
    auto out = open_out(path);
    out << "s,expected_activity,log_likelihood" << (posterior ? ",log_posterior" : "") << '\n';
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double x = grid.point(j);
        // shape of the neuron whose preferred value is closest to x
        std::size_t idx = 0;
        for (std::size_t i = 1; i < pref.size(); ++i) {
            if (std::abs(pref[i] - x) < std::abs(pref[idx] - x)) idx = i;
        }
        TuningCurve c = pop.curves[idx];
        c.preferred = x;
        out << format_number(x) << ',' << format_number(tuning_rate(c, stimulus)) << ','
            << format_number(loglik[j]);
        if (posterior) out << ',' << format_number(logpost[j]);
        out << '\n';
    }
    check_written(out, path);

    auto eout = open_out(estimate_path);
    eout << "decoder,estimate,rating\n"
         << to_string(model.decoder.kind) << ',' << format_number(est.value) << ','
         << format_number(est.rating) << '\n';
    check_written(eout, estimate_path);
    return est;
}

void write_rating_pmf(const std::filesystem::path& path, const RatingPMF& pmf, const RatingScale& scale) {
    if (pmf.probabilities.size() != scale.size()) throw ValidationError("pmf size does not match the rating scale");
    auto out = open_out(path);
    out << "category,probability\n";
    for (std::size_t k = 0; k < scale.size(); ++k)
        out << format_number(scale.categories[k]) << ',' << format_number(pmf.probabilities[k]) << '\n';
    check_written(out, path);
}

void write_reliability(const std::filesystem::path& path, const ReliabilityProfile& profile) {
    auto out = open_out(path);
    out << "s,mse,fraction,mean,variance\n";
    for (const auto& p : profile.points) {
        out << format_number(p.s) << ',' << format_number(p.mse) << ',' << format_number(p.fraction) << ','
            << format_number(p.mean) << ',' << format_number(p.variance) << '\n';
    }
    check_written(out, path);
}

void to_json(json& j, const RunManifest& m) {
    j = json{{"command", m.command}, {"config", m.config},   {"seed", m.seed},
             {"inputs", m.inputs},   {"outputs", m.outputs}, {"version", m.version}};
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    write_json(dir / "manifest.json", m);
}

} // namespace neurouser
