#include "neurouser/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "neurouser/errors.hpp"

namespace neurouser {

namespace {

void check_bounds(const ParamBounds& b, const char* name, bool strictly_positive)
{
    if (!(std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo <= b.hi))
        throw ValidationError(std::string("unsatisfiable bounds for ") + name);
    if (b.lo < 0.0 || (strictly_positive && b.lo <= 0.0) || (b.log_scale && b.lo <= 0.0))
        throw ValidationError(std::string("bounds for ") + name + " leave the valid parameter range");
}

double to_search(const ParamBounds& b, double x) { return b.log_scale ? std::log(x) : x; }
double from_search(const ParamBounds& b, double t) { return b.log_scale ? std::exp(t) : t; }

std::vector<double> latent_grid(const RatingScale& scale, double step)
{
    std::vector<double> grid;
    const auto n = static_cast<std::size_t>(std::floor(scale.span() / step + 1e-9));
    for (std::size_t j = 0; j <= n; ++j)
        grid.push_back(scale.min + static_cast<double>(j) * step);
    return grid;
}

struct ItemData {
    std::string item_id;
    RatingPMF pmf;
    std::size_t n_trials = 0;
};

class Problem {
public:
    Problem(std::vector<ItemData> items, const RatingScale& scale, const FitConfig& cfg, double prior_mean)
        : items_(std::move(items)), scale_(scale), cfg_(cfg), prior_mean_(prior_mean)
    {
    }

    UserModel model(DecoderKind kind, const PopulationParams& p, double prior_sd) const
    {
        UserModel m;
        m.population = build_population(cfg_.neurons, scale_, cfg_.margin, p.gain, p.baseline, p.width);
        m.decoder.kind = kind;
        if (kind == DecoderKind::MaximumAPosteriori)
            m.decoder.prior = GaussianPrior{prior_mean_, prior_sd};
        if (kind == DecoderKind::MaximumLikelihood || kind == DecoderKind::MaximumAPosteriori)
            m.decoder.grid = default_grid(m.population, cfg_.decoder_step);
        return m;
    }

    double objective(const LatentTable& table) const
    {
        double total = 0.0;
        for (const auto& item : items_) {
            double d = 0.0;
            table.best_match(item.pmf, scale_, cfg_.epsilon, &d);
            total += d;
        }
        return total;
    }

    const std::vector<ItemData>& items() const noexcept { return items_; }
    double prior_mean() const noexcept { return prior_mean_; }

private:
    std::vector<ItemData> items_;
    RatingScale scale_;
    const FitConfig& cfg_;
    double prior_mean_;
};

// Coordinate-wise golden-section search over the transformed box.
struct CoordinateSearch {
    std::vector<ParamBounds> bounds;
    std::function<double(const std::vector<double>&)> objective;
    std::size_t budget = 0;
    std::size_t line_iterations = 6;
    double tolerance = 1e-3;

    std::size_t evaluations = 0;
    std::vector<double> best_x; // search space
    double best_f = std::numeric_limits<double>::infinity();

    bool exhausted() const noexcept { return evaluations >= budget; }

    double eval(std::vector<double> x)
    {
        ++evaluations;
        std::vector<double> params(x.size());
        for (std::size_t c = 0; c < x.size(); ++c)
            params[c] = from_search(bounds[c], x[c]);
        const double f = objective(params);
        if (f < best_f) {
            best_f = f;
            best_x = std::move(x);
        }
        return f;
    }

    void line_search(std::size_t c, double a, double b)
    {
        constexpr double inv_phi = 0.6180339887498949;
        if (!(b > a))
            return;
        auto at = [&](double t) {
            std::vector<double> x = best_x;
            x[c] = t;
            return eval(std::move(x));
        };
        double lo = a, hi = b;
        double left = hi - inv_phi * (hi - lo);
        double right = lo + inv_phi * (hi - lo);
        if (exhausted())
            return;
        double f_left = at(left);
        if (exhausted())
            return;
        double f_right = at(right);
        for (std::size_t it = 0; it < line_iterations && !exhausted(); ++it) {
            if (f_left <= f_right) {
                hi = right;
                right = left;
                f_right = f_left;
                left = hi - inv_phi * (hi - lo);
                f_left = at(left);
            } else {
                lo = left;
                left = right;
                f_left = f_right;
                right = lo + inv_phi * (hi - lo);
                f_right = at(right);
            }
        }
    }

    void run(std::vector<double> start)
    {
        eval(std::move(start));
        double radius_scale = 1.0;
        while (!exhausted() && best_f > 0.0) {
            const double before = best_f;
            for (std::size_t c = 0; c < bounds.size() && !exhausted(); ++c) {
                const double lo = to_search(bounds[c], bounds[c].lo);
                const double hi = to_search(bounds[c], bounds[c].hi);
                double a = lo, b = hi;
                if (radius_scale < 1.0) {
                    const double r = 0.5 * (hi - lo) * radius_scale;
                    a = std::max(lo, best_x[c] - r);
                    b = std::min(hi, best_x[c] + r);
                }
                line_search(c, a, b);
            }
            if (before - best_f <= tolerance * before)
                break;
            radius_scale *= 0.5;
        }
    }
};

} // namespace

void FitConfig::validate() const
{
    if (candidates.empty())
        throw ValidationError("fit needs at least one candidate decoder");
    check_bounds(gain, "gain", false);
    check_bounds(baseline, "baseline", false);
    check_bounds(width, "width", true);
    check_bounds(prior_sd, "prior sd", true);
    if (neurons == 0)
        throw ValidationError("fit needs at least one neuron");
    if (!(margin >= 0.0))
        throw ValidationError("fit margin must be >= 0");
    if (mc_trials == 0)
        throw ValidationError("fit needs at least one Monte Carlo trial per evaluation");
    if (!(epsilon > 0.0))
        throw ValidationError("pmf smoothing epsilon must be > 0");
    if (budget == 0)
        throw ValidationError("fit budget must be >= 1");
    if (!(latent_step > 0.0) || !(decoder_step > 0.0))
        throw ValidationError("grid steps must be > 0");
}

double divergence(const RatingPMF& empirical, const RatingPMF& model, double eps)
{
    const auto& p = empirical.probabilities;
    const auto& q = model.probabilities;
    if (p.size() != q.size() || p.empty())
        throw ValidationError("divergence needs pmfs over the same categories");
    const double norm = 1.0 + eps * static_cast<double>(p.size());
    double kl = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double ps = (p[k] + eps) / norm;
        const double qs = (q[k] + eps) / norm;
        kl += ps * std::log(ps / qs);
    }
    return std::max(kl, 0.0);
}

RatingPMF empirical_pmf(std::span<const double> ratings, const RatingScale& scale)
{
    if (ratings.empty())
        throw ValidationError("empirical pmf needs at least one rating");
    RatingPMF pmf;
    pmf.probabilities.assign(scale.size(), 0.0);
    for (double r : ratings)
        pmf.probabilities[scale.index_of(r)] += 1.0;
    for (double& p : pmf.probabilities)
        p /= static_cast<double>(ratings.size());
    return pmf;
}

std::size_t LatentTable::best_match(const RatingPMF& empirical, const RatingScale& scale, double eps,
                                    double* best_divergence) const
{
    const double mean = pmf_mean(empirical, scale);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pmfs.size(); ++j) {
        const double d = divergence(empirical, pmfs[j], eps);
        if (d < best_d || (d == best_d && std::abs(latent[j] - mean) < std::abs(latent[best] - mean))) {
            best_d = d;
            best = j;
        }
    }
    if (best_divergence)
        *best_divergence = best_d;
    return best;
}

LatentTable latent_table(const UserModel& model, const FitConfig& cfg)
{
    const UserSimulator sim(model);
    LatentTable table;
    table.latent = latent_grid(model.population.scale, cfg.latent_step);
    table.pmfs.reserve(table.latent.size());
    for (std::size_t j = 0; j < table.latent.size(); ++j)
        table.pmfs.push_back(sim.rating_pmf(table.latent[j], cfg.mc_trials, derive_seed(cfg.seed, j)));
    return table;
}

double fit_latent_value(const UserModel& model, const RatingPMF& empirical, const FitConfig& cfg)
{
    cfg.validate();
    const LatentTable table = latent_table(model, cfg);
    return table.latent[table.best_match(empirical, model.population.scale, cfg.epsilon)];
}

double FitResult::mean_model_variance() const noexcept
{
    if (items.empty())
        return 0.0;
    double sum = 0.0;
    for (const auto& it : items)
        sum += it.model_variance;
    return sum / static_cast<double>(items.size());
}

UserModel fitted_model(const FitResult& fit, const RatingScale& scale, const FitConfig& cfg)
{
    UserModel m;
    m.label = fit.user_id;
    m.population = build_population(fit.params, scale);
    m.decoder.kind = fit.decoder;
    if (fit.prior)
        m.decoder.prior = *fit.prior;
    if (fit.decoder == DecoderKind::MaximumLikelihood || fit.decoder == DecoderKind::MaximumAPosteriori)
        m.decoder.grid = default_grid(m.population, cfg.decoder_step);
    return m;
}

FitResult fit_user_model(std::span<const RatingObservation> obs, const RatingScale& scale,
                         const FitConfig& cfg)
{
    cfg.validate();
    scale.validate();
    if (obs.empty())
        throw ValidationError("cannot fit a user without observations");
    const std::string& user = obs.front().user_id;
    std::set<std::pair<std::string, int>> seen;
    double rating_sum = 0.0;
    for (const auto& o : obs) {
        if (o.user_id != user)
            throw ValidationError("fit_user_model expects observations of a single user");
        if (!seen.emplace(o.item_id, o.trial).second)
            throw ValidationError("duplicate observation for item " + o.item_id);
        scale.index_of(o.rating);
        rating_sum += o.rating;
    }

    std::vector<ItemData> items;
    std::size_t repeated_items = 0;
    for (const auto& series : group_by_pair(obs)) {
        items.push_back({series.item_id, empirical_pmf(series.ratings, scale), series.ratings.size()});
        repeated_items += series.ratings.size() >= 2;
    }
    const Problem problem(std::move(items), scale, cfg, rating_sum / static_cast<double>(obs.size()));

    FitResult result;
    result.user_id = user;
    result.sparse_data = repeated_items < 2;

    std::optional<std::size_t> best;
    for (DecoderKind kind : cfg.candidates) {
        const bool mad = kind == DecoderKind::MaximumAPosteriori;
        CoordinateSearch search;
        search.bounds = {cfg.gain, cfg.width, cfg.baseline};
        if (mad)
            search.bounds.push_back(cfg.prior_sd);
        search.budget = cfg.budget;
        search.line_iterations = cfg.line_iterations;
        search.tolerance = cfg.tolerance;
        search.objective = [&](const std::vector<double>& p) {
            const PopulationParams params{cfg.neurons, p[0], p[2], p[1], cfg.margin};
            return problem.objective(latent_table(problem.model(kind, params, mad ? p[3] : 1.0), cfg));
        };
        std::vector<double> start{
            to_search(cfg.gain, std::clamp(cfg.initial.gain, cfg.gain.lo, cfg.gain.hi)),
            to_search(cfg.width, std::clamp(cfg.initial.width, cfg.width.lo, cfg.width.hi)),
            to_search(cfg.baseline, std::clamp(cfg.initial.baseline, cfg.baseline.lo, cfg.baseline.hi))};
        if (mad)
            start.push_back(to_search(cfg.prior_sd, std::sqrt(cfg.prior_sd.lo * cfg.prior_sd.hi)));
        search.run(std::move(start));

        CandidateFit cand;
        cand.decoder = kind;
        cand.params = {cfg.neurons, from_search(cfg.gain, search.best_x[0]),
                       from_search(cfg.baseline, search.best_x[2]),
                       from_search(cfg.width, search.best_x[1]), cfg.margin};
        if (mad)
            cand.prior = GaussianPrior{problem.prior_mean(), from_search(cfg.prior_sd, search.best_x[3])};
        cand.divergence = search.best_f;
        cand.evaluations = search.evaluations;
        result.evaluations += search.evaluations;
        result.candidates.push_back(cand);
        if (!best || cand.divergence < result.candidates[*best].divergence)
            best = result.candidates.size() - 1;
    }

    const CandidateFit& winner = result.candidates[*best];
    result.params = winner.params;
    result.decoder = winner.decoder;
    result.prior = winner.prior;
    result.divergence = winner.divergence;

    const UserModel model = problem.model(winner.decoder, winner.params,
                                          winner.prior ? winner.prior->sd : 1.0);
    const LatentTable table = latent_table(model, cfg);
    for (const auto& item : problem.items()) {
        ItemFit fit;
        fit.item_id = item.item_id;
        fit.n_trials = item.n_trials;
        const std::size_t j = table.best_match(item.pmf, scale, cfg.epsilon, &fit.divergence);
        fit.latent = table.latent[j];
        fit.model_variance = pmf_variance(table.pmfs[j], scale);
        result.items.push_back(fit);
    }
    return result;
}

} // namespace neurouser
