#include "neurouser/population_code.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "neurouser/errors.hpp"

namespace neurouser {

void RatingScale::validate() const
{
    if (!(std::isfinite(min) && std::isfinite(max) && min < max))
        throw ValidationError("rating scale needs finite min < max");
    if (categories.size() < 2)
        throw ValidationError("rating scale needs at least two categories");
    if (categories.front() != min || categories.back() != max)
        throw ValidationError("first and last category must equal the scale bounds");
    for (std::size_t k = 1; k < categories.size(); ++k) {
        if (!(categories[k] > categories[k - 1]))
            throw ValidationError("rating categories must be strictly increasing");
    }
}

std::size_t RatingScale::index_of(double rating) const
{
    const auto it = std::find(categories.begin(), categories.end(), rating);
    if (it == categories.end())
        throw ValidationError("rating " + std::to_string(rating) + " is not a scale category");
    return static_cast<std::size_t>(it - categories.begin());
}

RatingScale RatingScale::stars(int n)
{
    if (n < 2)
        throw ValidationError("a star scale needs at least two categories");
    RatingScale scale;
    scale.min = 1.0;
    scale.max = static_cast<double>(n);
    scale.categories.clear();
    for (int k = 1; k <= n; ++k)
        scale.categories.push_back(static_cast<double>(k));
    return scale;
}

void TuningCurve::validate() const
{
    if (!(std::isfinite(gain) && gain >= 0.0))
        throw ValidationError("tuning curve gain must be finite and >= 0");
    if (!(std::isfinite(baseline) && baseline >= 0.0))
        throw ValidationError("tuning curve baseline must be finite and >= 0");
    if (!(std::isfinite(width) && width > 0.0))
        throw ValidationError("tuning curve width must be finite and > 0");
    if (!std::isfinite(preferred))
        throw ValidationError("tuning curve preferred value must be finite");
}

double tuning_rate(const TuningCurve& curve, double s) noexcept
{
    const double z = (s - curve.preferred) / curve.width;
    const double density = std::exp(-0.5 * z * z) / (curve.width * std::sqrt(2.0 * std::numbers::pi));
    return curve.gain * density + curve.baseline;
}

void Population::validate() const
{
    scale.validate();
    if (curves.empty())
        throw ValidationError("population needs at least one neuron");
    if (!(std::isfinite(margin) && margin >= 0.0))
        throw ValidationError("population margin must be finite and >= 0");
    const double tol = 1e-9 * std::max(1.0, upper() - lower());
    for (std::size_t i = 0; i < curves.size(); ++i) {
        curves[i].validate();
        if (i > 0 && curves[i].preferred < curves[i - 1].preferred)
            throw ValidationError("preferred values must be sorted ascending");
        if (curves[i].preferred < lower() - tol || curves[i].preferred > upper() + tol)
            throw ValidationError("preferred value outside [min - margin, max + margin]");
    }
}

std::vector<double> Population::preferred_values() const
{
    std::vector<double> out;
    out.reserve(curves.size());
    for (const auto& c : curves)
        out.push_back(c.preferred);
    return out;
}

long PopulationResponse::total() const noexcept
{
    long sum = 0;
    for (int c : counts)
        sum += c;
    return sum;
}

Population build_population(std::size_t n, const RatingScale& scale, double margin,
                            double gain, double baseline, double width)
{
    if (n == 0)
        throw ValidationError("population needs at least one neuron");
    Population pop;
    pop.scale = scale;
    pop.margin = margin;
    pop.curves.resize(n);
    const double lo = scale.min - margin;
    const double hi = scale.max + margin;
    for (std::size_t i = 0; i < n; ++i) {
        TuningCurve& c = pop.curves[i];
        c.gain = gain;
        c.baseline = baseline;
        c.width = width;
        c.preferred = n == 1 ? 0.5 * (lo + hi)
                             : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    pop.validate();
    return pop;
}

Population build_population(const PopulationParams& params, const RatingScale& scale)
{
    return build_population(params.neurons, scale, params.margin, params.gain,
                            params.baseline, params.width);
}

std::vector<double> expected_response(const Population& pop, double s)
{
    std::vector<double> rates;
    rates.reserve(pop.size());
    for (const auto& c : pop.curves)
        rates.push_back(tuning_rate(c, s));
    return rates;
}

PoissonSampler::PoissonSampler(std::span<const double> means)
{
    channels_.resize(means.size());
    for (std::size_t i = 0; i < means.size(); ++i) {
        const double mean = means[i];
        if (!(mean > 0.0))
            continue;
        Channel& ch = channels_[i];
        const double reach = 12.0 * std::sqrt(mean) + 10.0;
        const int lo = static_cast<int>(std::max(0.0, std::floor(mean - reach)));
        const int hi = static_cast<int>(std::ceil(mean + reach));
        const int mode = static_cast<int>(std::floor(mean));

        // pmf by recursion outward from the mode, which never underflows.
        std::vector<double> pmf(static_cast<std::size_t>(hi - lo + 1));
        const auto at = [&](int k) -> double& { return pmf[static_cast<std::size_t>(k - lo)]; };
        at(mode) = std::exp(mode * std::log(mean) - mean - std::lgamma(mode + 1.0));
        for (int k = mode + 1; k <= hi; ++k)
            at(k) = at(k - 1) * mean / k;
        for (int k = mode - 1; k >= lo; --k)
            at(k) = at(k + 1) * (k + 1) / mean;

        ch.offset = lo;
        ch.cdf.resize(pmf.size());
        double cum = 0.0;
        for (std::size_t k = 0; k < pmf.size(); ++k) {
            cum += pmf[k];
            ch.cdf[k] = cum;
        }
    }
}

void PoissonSampler::operator()(Rng& rng, std::vector<int>& out) const
{
    out.resize(channels_.size());
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        const Channel& ch = channels_[i];
        if (ch.cdf.empty()) {
            out[i] = 0;
            continue;
        }
        const double u = rng.uniform() * ch.cdf.back();
        const auto it = std::upper_bound(ch.cdf.begin(), ch.cdf.end(), u);
        const auto k = std::min<std::ptrdiff_t>(it - ch.cdf.begin(), static_cast<std::ptrdiff_t>(ch.cdf.size()) - 1);
        out[i] = ch.offset + static_cast<int>(k);
    }
}

void sample_poisson(std::span<const double> means, Rng& rng, std::vector<int>& out)
{
    PoissonSampler sampler(means);
    sampler(rng, out);
}

void sample_response(const Population& pop, double s, Rng& rng, PopulationResponse& out)
{
    const auto rates = expected_response(pop, s);
    sample_poisson(rates, rng, out.counts);
}

PopulationResponse sample_response(const Population& pop, double s, Rng& rng)
{
    PopulationResponse out;
    sample_response(pop, s, rng, out);
    return out;
}

} // namespace neurouser
