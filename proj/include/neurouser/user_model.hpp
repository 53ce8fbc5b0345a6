#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurouser/decoders.hpp"
#include "neurouser/population_code.hpp"
#include "neurouser/rng.hpp"

namespace neurouser {

/// Complete generative model of one user: the population that encodes a
/// latent value plus the decoder that turns a response into a rating.
struct UserModel {
    Population population;
    DecoderSpec decoder;
    std::string label;

    void validate() const;
    bool operator==(const UserModel&) const = default;
};

/// Probability per scale category.
struct RatingPMF {
    std::vector<double> probabilities;

    double total() const noexcept;
    bool operator==(const RatingPMF&) const = default;
};

double pmf_variance(const RatingPMF& pmf, const RatingScale& scale);
double pmf_mean(const RatingPMF& pmf, const RatingScale& scale);

struct ReliabilityPoint {
    double s = 0.0;
    double mse = 0.0;
    double fraction = 0.0; // mse / max_mse
    double mean = 0.0;
    double variance = 0.0;
};

struct ReliabilityProfile {
    std::vector<ReliabilityPoint> points;
    double max_mse = 0.0;
    bool continuous = false;
};

/// Encoder/decoder pipeline with decoder tables prepared once; the hot path
/// behind every Monte Carlo estimate.
class UserSimulator {
public:
    explicit UserSimulator(const UserModel& model);

    const UserModel& model() const noexcept { return model_; }
    const Decoder& decoder() const noexcept { return decoder_; }

    /// One trial: sample a response for `s` and decode it. A degenerate
    /// weighted-average trial is resampled once before failing.
    double estimate(double s, Rng& rng) const;
    double rating(double s, Rng& rng) const;

    /// Empirical category frequencies of `n_trials` ratings. Trial t draws
    /// from the stream derive_seed(seed, t).
    RatingPMF rating_pmf(double s, std::size_t n_trials, std::uint64_t seed) const;

    /// Continuous estimates, same stream layout as rating_pmf.
    std::vector<double> estimates(double s, std::size_t n_trials, std::uint64_t seed) const;

private:
    double estimate_with(const PoissonSampler& sampler, Rng& rng, PopulationResponse& scratch) const;

    UserModel model_;
    Decoder decoder_;
};

double simulate_rating(const UserModel& model, double s, Rng& rng);

RatingPMF rating_pmf_mc(const UserModel& model, double s, std::size_t n_trials, std::uint64_t seed);

/// Mean squared error of decoded ratings (or continuous estimates when
/// `continuous` is set) against each latent value. In rating mode
/// max_mse = (max - min)^2; in continuous mode it is the squared width of the
/// range spanned by the scale and every reachable estimate.
ReliabilityProfile reliability_profile(const UserModel& model, std::span<const double> s_values,
                                       std::size_t n_trials, std::uint64_t seed,
                                       bool continuous = false);

} // namespace neurouser
