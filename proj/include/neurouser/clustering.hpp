#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurouser/fitting.hpp"

namespace neurouser {

struct FeatureVector {
    std::string user_id;
    /// z-scored gain, baseline, width and mean model rating variance, followed
    /// by the decoder one-hot block (MVD, WAD, MLD, MAD) times its weight.
    std::vector<double> values;
};

inline constexpr std::size_t continuous_features = 4;

/// Columns with zero sd over the cohort map to all zeros.
std::vector<FeatureVector> featurize(std::span<const FitResult> fits, double onehot_weight = 1.0);

struct ClusterResult {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;
    std::vector<std::vector<double>> centroids;
    double wcss = 0.0;
    /// Silhouette of the assignment; 0 when k < 2.
    double silhouette = 0.0;
    std::uint64_t seed = 0;
    std::size_t best_restart = 0;
    /// Final objective of every restart.
    std::vector<double> restart_wcss;
    /// Objective after each Lloyd iteration of the kept restart.
    std::vector<double> wcss_trace;
};

/// Lloyd's algorithm from `restarts` initializations of k distinct random
/// points; the lowest objective wins (ties to the lowest restart index).
/// Restart r draws from derive_seed(seed, r).
ClusterResult cluster_users(std::span<const FeatureVector> features, std::size_t k,
                            std::size_t restarts, std::uint64_t seed);

/// Mean silhouette coefficient (Euclidean). Singleton clusters score 0.
double silhouette(std::span<const FeatureVector> features, std::span<const std::size_t> assignments);

} // namespace neurouser
