#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurouser/cohort.hpp"
#include "neurouser/user_model.hpp"

namespace neurouser {

/// Search interval for one model parameter. Log-scaled intervals are
/// searched in ln-space and need lo > 0.
struct ParamBounds {
    double lo = 0.0;
    double hi = 1.0;
    bool log_scale = false;

    bool operator==(const ParamBounds&) const = default;
};

struct FitConfig {
    std::vector<DecoderKind> candidates{std::begin(all_decoder_kinds), std::end(all_decoder_kinds)};
    ParamBounds gain{1.0, 1000.0, true};
    ParamBounds baseline{0.0, 3.0, false};
    ParamBounds width{0.2, 3.0, true};
    /// sd of the MAD Gaussian prior; its mean is the user's mean rating.
    ParamBounds prior_sd{0.25, 4.0, true};
    /// Starting point, clamped into the bounds.
    PopulationParams initial{21, 30.0, 0.5, 1.0, 1.0};
    std::size_t neurons = 21;
    double margin = 1.0;
    std::size_t mc_trials = 300;
    double epsilon = 1e-3;
    /// Objective evaluations allowed per candidate decoder.
    std::size_t budget = 40;
    std::size_t line_iterations = 6;
    double tolerance = 1e-3;
    /// Latent values are searched on [min, max] with this step.
    double latent_step = 0.1;
    /// MLD/MAD search-grid step used while fitting.
    double decoder_step = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const FitConfig&) const = default;
};

/// KL divergence of `empirical` from `model`, both smoothed as
/// (p + eps) / (1 + K eps). Zero iff the two pmfs are equal.
double divergence(const RatingPMF& empirical, const RatingPMF& model, double eps);

/// Empirical category frequencies of a rating series.
RatingPMF empirical_pmf(std::span<const double> ratings, const RatingScale& scale);

/// Model rating pmfs over the latent grid. Point j is always simulated from
/// derive_seed(cfg.seed, j), so every evaluation reuses the same random
/// numbers and the objective is deterministic in the model parameters.
struct LatentTable {
    std::vector<double> latent;
    std::vector<RatingPMF> pmfs;

    /// Index minimizing divergence(empirical, pmfs[j]); ties go to the point
    /// nearest the empirical mean, then to the smaller latent value.
    std::size_t best_match(const RatingPMF& empirical, const RatingScale& scale, double eps,
                           double* best_divergence = nullptr) const;
};

LatentTable latent_table(const UserModel& model, const FitConfig& cfg);

/// Latent value whose model pmf is closest to `empirical`.
double fit_latent_value(const UserModel& model, const RatingPMF& empirical, const FitConfig& cfg);

struct ItemFit {
    std::string item_id;
    double latent = 0.0;
    double divergence = 0.0;
    /// Variance of the fitted model's rating pmf at the latent value.
    double model_variance = 0.0;
    std::size_t n_trials = 0;

    bool operator==(const ItemFit&) const = default;
};

struct CandidateFit {
    DecoderKind decoder = DecoderKind::WeightedAverage;
    PopulationParams params;
    std::optional<GaussianPrior> prior;
    double divergence = 0.0;
    std::size_t evaluations = 0;

    bool operator==(const CandidateFit&) const = default;
};

struct FitResult {
    std::string user_id;
    PopulationParams params;
    DecoderKind decoder = DecoderKind::WeightedAverage;
    std::optional<GaussianPrior> prior;
    std::vector<ItemFit> items;
    double divergence = 0.0;
    std::size_t evaluations = 0;
    /// Every candidate decoder at its own best parameters.
    std::vector<CandidateFit> candidates;
    /// Fewer than two items with at least two trials each.
    bool sparse_data = false;

    double mean_model_variance() const noexcept;
    bool operator==(const FitResult&) const = default;
};

/// The user model a fit describes.
UserModel fitted_model(const FitResult& fit, const RatingScale& scale, const FitConfig& cfg);

/// Fits decoder, shared (gain, baseline, width) and per-item latent values to
/// one user's observations by coordinate-wise golden-section search.
FitResult fit_user_model(std::span<const RatingObservation> obs, const RatingScale& scale,
                         const FitConfig& cfg);

} // namespace neurouser
