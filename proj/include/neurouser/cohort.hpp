#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurouser/user_model.hpp"

namespace neurouser {

struct RatingObservation {
    std::string user_id;
    std::string item_id;
    int trial = 1;
    double rating = 0.0;

    bool operator==(const RatingObservation&) const = default;
};

/// Latent value of one (user, item) pair; `user` indexes the model list.
struct LatentAssignment {
    std::size_t user = 0;
    std::string item_id;
    double value = 0.0;

    bool operator==(const LatentAssignment&) const = default;
};

/// `n_trials` ratings per pair. Pair p draws from derive_seed(seed, p) and its
/// trial t from derive_seed(pair seed, t). User ids are the model labels
/// ("u<index>" when a label is empty).
std::vector<RatingObservation> simulate_cohort(std::span<const UserModel> models,
                                               std::span<const LatentAssignment> latent,
                                               std::size_t n_trials, std::uint64_t seed);

/// Observations grouped by (user, item), pairs in lexicographic order and
/// trials ascending within a pair.
struct RatingSeries {
    std::string user_id;
    std::string item_id;
    std::vector<double> ratings;
};
std::vector<RatingSeries> group_by_pair(std::span<const RatingObservation> obs);

struct CategoryUsage {
    /// bins[k] counts pairs that used exactly k + 1 distinct categories.
    std::vector<std::size_t> bins;
    std::size_t pairs = 0;
    std::size_t users = 0;
    /// Users whose every pair is constant.
    std::size_t constant_users = 0;

    double constant_pair_fraction() const noexcept;
    double constant_user_fraction() const noexcept;
};

CategoryUsage category_usage_histogram(std::span<const RatingObservation> obs,
                                       const RatingScale& scale);

struct VarianceSample {
    std::string user_id;
    std::string item_id;
    double variance = 0.0;
    std::size_t n_trials = 0;
};

struct VarianceSamples {
    std::vector<VarianceSample> samples;
    /// Pairs with fewer than two trials.
    std::size_t skipped = 0;
};

/// Per-pair variance across trials; divides by n, or by n - 1 when
/// `unbiased` is set.
VarianceSamples variance_samples(std::span<const RatingObservation> obs, bool unbiased = false);

/// Mean pair variance per user, one entry per user (item_id empty).
std::vector<VarianceSample> per_user_variances(std::span<const VarianceSample> samples);

struct ParetoFit {
    double x_m = 0.0;
    double alpha = 0.0;
    std::size_t n_used = 0;
    std::size_t n_excluded = 0;
};

/// Pareto maximum-likelihood fit: x_m = min, alpha = n / sum ln(x_i / x_m).
/// Zero samples are excluded and counted. Throws DegenerateFit for fewer than
/// two positive samples or when they are all equal.
ParetoFit pareto_ml_fit(std::span<const double> samples);

/// Distribution of item latent values for a synthetic archetype. Mixture
/// draws land near a scale end with probability `extreme_weight` (half-normal
/// offset inward) and near the scale midpoint otherwise (normal offset);
/// `spread` is the offset sd. Values are clipped to the scale.
struct LatentDistribution {
    enum class Kind { Uniform, Mixture };
    Kind kind = Kind::Uniform;
    double extreme_weight = 0.5;
    double spread = 0.5;
};

struct Archetype {
    std::string name;
    UserModel model;
    LatentDistribution latent;
};

struct SyntheticCohort {
    std::vector<UserModel> models;
    std::vector<std::string> archetype; // per user
    std::vector<LatentAssignment> latent;
};

/// Users alternate between archetypes ("u01", "u02", ...); item ids are
/// "i01", "i02", ...
SyntheticCohort make_archetype_cohort(std::span<const Archetype> archetypes,
                                      std::size_t n_users, std::size_t n_items,
                                      std::uint64_t seed);

/// High-gain MVD extreme-raters (mostly extreme latent values) and
/// moderate-gain WAD middle-raters (mostly central latent values), both on a
/// 21-neuron population with margin 0.
std::vector<Archetype> default_archetypes(const RatingScale& scale = RatingScale{});

} // namespace neurouser
