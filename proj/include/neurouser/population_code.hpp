#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "neurouser/rng.hpp"

namespace neurouser {

/// Discrete response scale, e.g. 1..5 stars.
struct RatingScale {
    double min = 1.0;
    double max = 5.0;
    std::vector<double> categories{1.0, 2.0, 3.0, 4.0, 5.0};

    /// Throws ValidationError unless min < max and the categories are strictly
    /// increasing from min to max.
    void validate() const;

    double span() const noexcept { return max - min; }
    std::size_t size() const noexcept { return categories.size(); }

    /// Index of `rating` in the category list; throws ValidationError if the
    /// value is not a category.
    std::size_t index_of(double rating) const;

    static RatingScale stars(int n = 5);

    bool operator==(const RatingScale&) const = default;
};

/// Bell-shaped tuning curve f(s) = g * N(s; preferred, width^2) + baseline.
///
/// The Gaussian is the normalized density, so the peak expected count is
/// g / (width * sqrt(2 pi)) + baseline rather than g + baseline. f(s) is the
/// expected spike count in one trial window.
struct TuningCurve {
    double gain = 10.0;
    double baseline = 0.0;
    double preferred = 0.0;
    double width = 1.0;

    void validate() const;

    bool operator==(const TuningCurve&) const = default;
};

/// Expected spike count of `curve` at stimulus `s`.
double tuning_rate(const TuningCurve& curve, double s) noexcept;

struct Population {
    std::vector<TuningCurve> curves;
    RatingScale scale;
    double margin = 0.0;

    /// N >= 1, valid curves, preferred values ascending and inside
    /// [min - margin, max + margin].
    void validate() const;

    std::size_t size() const noexcept { return curves.size(); }
    double lower() const noexcept { return scale.min - margin; }
    double upper() const noexcept { return scale.max + margin; }
    std::vector<double> preferred_values() const;

    bool operator==(const Population&) const = default;
};

/// Spike counts of one trial, one entry per neuron.
struct PopulationResponse {
    std::vector<int> counts;

    long total() const noexcept;
    bool operator==(const PopulationResponse&) const = default;
};

/// Shared shape parameters used when laying out a homogeneous population.
struct PopulationParams {
    std::size_t neurons = 21;
    double gain = 10.0;
    double baseline = 1.0;
    double width = 1.0;
    double margin = 0.0;

    bool operator==(const PopulationParams&) const = default;
};

/// `n` identical curves with preferred values evenly spaced over
/// [min - margin, max + margin]; a single neuron sits at the midpoint.
Population build_population(std::size_t n, const RatingScale& scale, double margin,
                            double gain, double baseline, double width);

Population build_population(const PopulationParams& params,
                            const RatingScale& scale = RatingScale{});

std::vector<double> expected_response(const Population& pop, double s);

/// Independent Poisson draw per neuron with mean tuning_rate(curve_i, s).
PopulationResponse sample_response(const Population& pop, double s, Rng& rng);

/// Same as above, writing into `out` to avoid allocation in hot loops.
void sample_response(const Population& pop, double s, Rng& rng, PopulationResponse& out);

/// Poisson draws for precomputed means.
void sample_poisson(std::span<const double> means, Rng& rng, std::vector<int>& out);

/// Poisson sampler for a fixed mean vector, reused across trials. Each draw
/// inverts a CDF tabulated over mean +- (12 sd + 10), one uniform per neuron;
/// the mass outside the window is below 1e-30. sample_poisson and
/// sample_response draw through this class, so all three agree exactly.
class PoissonSampler {
public:
    explicit PoissonSampler(std::span<const double> means);
    void operator()(Rng& rng, std::vector<int>& out) const;

private:
    struct Channel {
        int offset = 0;
        std::vector<double> cdf; // empty: mean 0
    };
    std::vector<Channel> channels_;
};

} // namespace neurouser
