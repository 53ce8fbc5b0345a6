#include "neurouser/user_model.hpp"

#include <algorithm>
#include <cmath>

#include "neurouser/errors.hpp"

namespace neurouser {

void UserModel::validate() const
{
    population.validate();
    if (decoder.grid) {
        decoder.grid->validate();
        if (!decoder.grid->covers(population.lower(), population.upper()))
            throw ValidationError("decoder grid must cover the population's extended range");
    }
    validate_prior(decoder.prior);
}

double RatingPMF::total() const noexcept
{
    double sum = 0.0;
    for (double p : probabilities)
        sum += p;
    return sum;
}

double pmf_mean(const RatingPMF& pmf, const RatingScale& scale)
{
    if (pmf.probabilities.size() != scale.size())
        throw ValidationError("pmf size does not match the rating scale");
    double mean = 0.0;
    for (std::size_t k = 0; k < scale.size(); ++k)
        mean += pmf.probabilities[k] * scale.categories[k];
    return mean;
}

double pmf_variance(const RatingPMF& pmf, const RatingScale& scale)
{
    const double mean = pmf_mean(pmf, scale);
    double var = 0.0;
    for (std::size_t k = 0; k < scale.size(); ++k) {
        const double d = scale.categories[k] - mean;
        var += pmf.probabilities[k] * d * d;
    }
    return var;
}

UserSimulator::UserSimulator(const UserModel& model)
    : model_(model), decoder_(model.population, model.decoder)
{
    model_.validate();
}

double UserSimulator::estimate_with(const PoissonSampler& sampler, Rng& rng, PopulationResponse& scratch) const
{
    sampler(rng, scratch.counts);
    try {
        return decoder_.decode_value(scratch, rng);
    } catch (const DegenerateResponse&) {
        sampler(rng, scratch.counts);
        return decoder_.decode_value(scratch, rng);
    }
}

double UserSimulator::estimate(double s, Rng& rng) const
{
    const PoissonSampler sampler(expected_response(model_.population, s));
    PopulationResponse scratch;
    return estimate_with(sampler, rng, scratch);
}

double UserSimulator::rating(double s, Rng& rng) const
{
    return discretize(estimate(s, rng), model_.population.scale);
}

std::vector<double> UserSimulator::estimates(double s, std::size_t n_trials, std::uint64_t seed) const
{
    const PoissonSampler sampler(expected_response(model_.population, s));
    PopulationResponse scratch;
    std::vector<double> out(n_trials);
    for (std::size_t t = 0; t < n_trials; ++t) {
        Rng rng = derive_rng(seed, t);
        out[t] = estimate_with(sampler, rng, scratch);
    }
    return out;
}

RatingPMF UserSimulator::rating_pmf(double s, std::size_t n_trials, std::uint64_t seed) const
{
    if (n_trials == 0)
        throw ValidationError("rating pmf needs at least one trial");
    const RatingScale& scale = model_.population.scale;
    const PoissonSampler sampler(expected_response(model_.population, s));
    PopulationResponse scratch;
    std::vector<std::size_t> counts(scale.size(), 0);
    for (std::size_t t = 0; t < n_trials; ++t) {
        Rng rng = derive_rng(seed, t);
        const double r = discretize(estimate_with(sampler, rng, scratch), scale);
        ++counts[scale.index_of(r)];
    }
    RatingPMF pmf;
    pmf.probabilities.resize(scale.size());
    for (std::size_t k = 0; k < scale.size(); ++k)
        pmf.probabilities[k] = static_cast<double>(counts[k]) / static_cast<double>(n_trials);
    return pmf;
}

double simulate_rating(const UserModel& model, double s, Rng& rng)
{
    return UserSimulator(model).rating(s, rng);
}

RatingPMF rating_pmf_mc(const UserModel& model, double s, std::size_t n_trials, std::uint64_t seed)
{
    return UserSimulator(model).rating_pmf(s, n_trials, seed);
}

ReliabilityProfile reliability_profile(const UserModel& model, std::span<const double> s_values,
                                       std::size_t n_trials, std::uint64_t seed, bool continuous)
{
    if (n_trials < 100)
        throw ValidationError("reliability profile needs at least 100 trials per point");
    const UserSimulator sim(model);
    const RatingScale& scale = model.population.scale;

    ReliabilityProfile profile;
    profile.continuous = continuous;
    if (continuous) {
        double lo = scale.min;
        double hi = scale.max;
        const auto& curves = model.population.curves;
        lo = std::min(lo, curves.front().preferred);
        hi = std::max(hi, curves.back().preferred);
        const auto kind = model.decoder.kind;
        if (kind == DecoderKind::MaximumLikelihood || kind == DecoderKind::MaximumAPosteriori) {
            const SearchGrid& grid = sim.decoder().grid();
            lo = std::min(lo, grid.lo);
            hi = std::max(hi, grid.point(grid.size() - 1));
        }
        profile.max_mse = (hi - lo) * (hi - lo);
    } else {
        profile.max_mse = scale.span() * scale.span();
    }

    for (std::size_t p = 0; p < s_values.size(); ++p) {
        const double s = s_values[p];
        if (!(s >= scale.min && s <= scale.max))
            throw ValidationError("reliability latent values must lie inside the rating scale");
        auto values = sim.estimates(s, n_trials, derive_seed(seed, p));
        if (!continuous) {
            for (double& v : values)
                v = discretize(v, scale);
        }
        double sum = 0.0;
        double sq_err = 0.0;
        for (double v : values) {
            sum += v;
            sq_err += (v - s) * (v - s);
        }
        const double n = static_cast<double>(values.size());
        ReliabilityPoint pt;
        pt.s = s;
        pt.mean = sum / n;
        pt.mse = sq_err / n;
        double var = 0.0;
        for (double v : values)
            var += (v - pt.mean) * (v - pt.mean);
        pt.variance = var / n;
        pt.fraction = pt.mse / profile.max_mse;
        profile.points.push_back(pt);
    }
    return profile;
}

} // namespace neurouser
