#include "neurouser/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "neurouser/errors.hpp"

namespace neurouser {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

void check_response(const Population& pop, const PopulationResponse& resp)
{
    if (resp.counts.size() != pop.size())
        throw ValidationError("response length does not match population size");
    for (int c : resp.counts) {
        if (c < 0)
            throw ValidationError("spike counts must be non-negative");
    }
}


} // namespace

std::string_view to_string(DecoderKind kind) noexcept
{
    switch (kind) {
    case DecoderKind::ModeValue: return "MVD";
    case DecoderKind::WeightedAverage: return "WAD";
    case DecoderKind::MaximumLikelihood: return "MLD";
    case DecoderKind::MaximumAPosteriori: return "MAD";
    }
    return "?";
}

DecoderKind parse_decoder_kind(std::string_view tag)
{
    for (DecoderKind k : all_decoder_kinds) {
        if (to_string(k) == tag)
            return k;
    }
    throw ValidationError("unknown decoder '" + std::string(tag) + "' (expected MVD, WAD, MLD or MAD)");
}

void SearchGrid::validate() const
{
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
        throw ValidationError("search grid needs finite lo < hi");
    if (!(std::isfinite(step) && step > 0.0))
        throw ValidationError("search grid step must be > 0");
    if ((hi - lo) / step < 2.0)
        throw ValidationError("search grid needs at least three points");
}

std::size_t SearchGrid::size() const noexcept
{
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

std::size_t SearchGrid::nearest(double s) const noexcept
{
    const double j = std::round((s - lo) / step);
    if (!(j > 0.0))
        return 0;
    return std::min(static_cast<std::size_t>(j), size() - 1);
}

bool SearchGrid::covers(double a, double b) const noexcept
{
    const double tol = 1e-9 * std::max(1.0, hi - lo);
    const double last = point(size() - 1);
    return lo <= a + tol && last >= b - tol;
}

SearchGrid default_grid(const Population& pop, double step)
{
    SearchGrid grid{pop.lower(), pop.upper(), step};
    grid.validate();
    return grid;
}

void validate_prior(const Prior& prior)
{
    if (const auto* g = std::get_if<GaussianPrior>(&prior)) {
        if (!std::isfinite(g->mean))
            throw ValidationError("Gaussian prior mean must be finite");
        if (!(std::isfinite(g->sd) && g->sd > 0.0))
            throw ValidationError("Gaussian prior sd must be > 0");
    } else if (const auto* t = std::get_if<TabulatedPrior>(&prior)) {
        t->grid.validate();
        if (t->log_density.size() != t->grid.size())
            throw ValidationError("tabulated prior needs one log-density per grid point");
        bool any_mass = false;
        for (double v : t->log_density) {
            if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
                throw ValidationError("tabulated prior log-densities must be finite or -inf");
            any_mass = any_mass || std::isfinite(v);
        }
        if (!any_mass)
            throw ValidationError("tabulated prior has no grid point with nonzero probability");
    }
}

double log_prior_density(const Prior& prior, double s) noexcept
{
    if (const auto* g = std::get_if<GaussianPrior>(&prior)) {
        const double z = (s - g->mean) / g->sd;
        return -0.5 * z * z - std::log(g->sd * std::sqrt(2.0 * std::numbers::pi));
    }
    if (const auto* t = std::get_if<TabulatedPrior>(&prior))
        return t->log_density[t->grid.nearest(s)];
    return 0.0;
}

double discretize(double value, const RatingScale& scale)
{
    if (!std::isfinite(value))
        throw NumericalError("cannot discretize a non-finite estimate");
    const auto& cats = scale.categories;
    const double x = std::clamp(value, scale.min, scale.max);
    const auto upper = std::lower_bound(cats.begin(), cats.end(), x);
    if (upper == cats.begin())
        return cats.front();
    if (upper == cats.end())
        return cats.back();
    const double below = *(upper - 1);
    return (x - below < *upper - x) ? below : *upper;
}

Estimate decode_mvd(const Population& pop, const PopulationResponse& resp, Rng& rng)
{
    return Decoder(pop, DecoderSpec{DecoderKind::ModeValue, UniformPrior{}, std::nullopt}).decode(resp, rng);
}

Estimate decode_wad(const Population& pop, const PopulationResponse& resp)
{
    Rng unused(0);
    return Decoder(pop, DecoderSpec{DecoderKind::WeightedAverage, UniformPrior{}, std::nullopt})
        .decode(resp, unused);
}

double log_likelihood(const Population& pop, const PopulationResponse& resp, double s)
{
    check_response(pop, resp);
    double firing = 0.0;
    double rate_sum = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const double rate = tuning_rate(pop.curves[i], s);
        if (resp.counts[i] > 0)
            firing += resp.counts[i] * std::log(rate);
    }
    for (std::size_t i = 0; i < pop.size(); ++i)
        rate_sum += tuning_rate(pop.curves[i], s);
    return firing - rate_sum;
}

double log_posterior(const Population& pop, const PopulationResponse& resp,
                     const Prior& prior, double s)
{
    return log_likelihood(pop, resp, s) + log_prior_density(prior, s);
}

Estimate decode_mld(const Population& pop, const PopulationResponse& resp, const SearchGrid& grid)
{
    Rng unused(0);
    return Decoder(pop, DecoderSpec{DecoderKind::MaximumLikelihood, UniformPrior{}, grid})
        .decode(resp, unused, true);
}

Estimate decode_mad(const Population& pop, const PopulationResponse& resp,
                    const Prior& prior, const SearchGrid& grid)
{
    Rng unused(0);
    return Decoder(pop, DecoderSpec{DecoderKind::MaximumAPosteriori, prior, grid})
        .decode(resp, unused, true);
}

Decoder::Decoder(Population pop, DecoderSpec spec) : pop_(std::move(pop)), spec_(std::move(spec))
{
    pop_.validate();
    preferred_ = pop_.preferred_values();
    if (spec_.kind != DecoderKind::MaximumLikelihood && spec_.kind != DecoderKind::MaximumAPosteriori)
        return;

    grid_ = spec_.grid ? *spec_.grid : default_grid(pop_);
    grid_.validate();
    if (!grid_.covers(pop_.lower(), pop_.upper()))
        throw ValidationError("search grid must cover [min - margin, max + margin]");

    const Prior& prior = spec_.kind == DecoderKind::MaximumAPosteriori ? spec_.prior : Prior{UniformPrior{}};
    validate_prior(prior);

    const std::size_t n_points = grid_.size();
    const std::size_t n = pop_.size();
    log_rates_.resize(n_points * n);
    rate_sums_.resize(n_points);
    log_prior_.resize(n_points);
    for (std::size_t j = 0; j < n_points; ++j) {
        const double s = grid_.point(j);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double rate = tuning_rate(pop_.curves[i], s);
            log_rates_[i * n_points + j] = std::log(rate);
            sum += rate;
        }
        rate_sums_[j] = sum;
        log_prior_[j] = log_prior_density(prior, s);
    }
}

double Decoder::grid_argmax(const PopulationResponse& resp, std::vector<double>* profile) const
{
    const std::size_t n = pop_.size();
    const std::size_t n_points = rate_sums_.size();
    const bool posterior = spec_.kind == DecoderKind::MaximumAPosteriori;
    if (profile)
        profile->resize(n_points);

    // Per grid point the firing terms accumulate in neuron order, matching
    // the summation in log_likelihood bit for bit.
    thread_local std::vector<double> acc;
    acc.assign(n_points, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int count = resp.counts[i];
        if (count <= 0)
            continue;
        const double r = count;
        const double* column = &log_rates_[i * n_points];
        for (std::size_t j = 0; j < n_points; ++j)
            acc[j] += r * column[j];
    }

    double best = neg_inf;
    std::size_t best_j = n_points;
    for (std::size_t j = 0; j < n_points; ++j) {
        double value = acc[j] - rate_sums_[j];
        if (posterior)
            value += log_prior_[j];
        if (profile)
            (*profile)[j] = value;
        if (value > best) {
            best = value;
            best_j = j;
        }
    }
    if (best_j == n_points)
        throw UndecodableResponse("likelihood is zero at every grid point");
    return grid_.point(best_j);
}

double Decoder::decode_value(const PopulationResponse& resp, Rng& rng) const
{
    const auto& counts = resp.counts;
    switch (spec_.kind) {
    case DecoderKind::ModeValue: {
        const int top = *std::max_element(counts.begin(), counts.end());
        std::size_t ties = 0;
        for (int c : counts)
            ties += c == top;
        std::size_t pick = ties > 1 ? rng.below(ties) : 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (counts[i] == top && pick-- == 0)
                return preferred_[i];
        }
        return preferred_.back();
    }
    case DecoderKind::WeightedAverage: {
        double num = 0.0;
        long den = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            num += counts[i] * preferred_[i];
            den += counts[i];
        }
        if (den == 0)
            throw DegenerateResponse("weighted average of an all-zero response");
        return std::clamp(num / static_cast<double>(den), preferred_.front(), preferred_.back());
    }
    case DecoderKind::MaximumLikelihood:
    case DecoderKind::MaximumAPosteriori:
        return grid_argmax(resp, nullptr);
    }
    return 0.0;
}

Estimate Decoder::decode(const PopulationResponse& resp, Rng& rng, bool with_profile) const
{
    check_response(pop_, resp);
    Estimate est;
    const bool grid_based = spec_.kind == DecoderKind::MaximumLikelihood
        || spec_.kind == DecoderKind::MaximumAPosteriori;
    est.value = (grid_based && with_profile) ? grid_argmax(resp, &est.profile) : decode_value(resp, rng);
    est.rating = discretize(est.value, pop_.scale);
    return est;
}

} // namespace neurouser
