#include "neurouser/clustering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "neurouser/errors.hpp"

namespace neurouser {

namespace {

using Point = std::vector<double>;

double squared_distance(const Point& a, const Point& b) noexcept
{
    double d = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c)
        d += (a[c] - b[c]) * (a[c] - b[c]);
    return d;
}

std::size_t nearest_centroid(const Point& p, const std::vector<Point>& centroids)
{
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

double objective(std::span<const FeatureVector> x, const std::vector<std::size_t>& assign,
                 const std::vector<Point>& centroids)
{
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        total += squared_distance(x[i].values, centroids[assign[i]]);
    return total;
}

struct Run {
    std::vector<std::size_t> assignments;
    std::vector<Point> centroids;
    double wcss = 0.0;
    std::vector<double> trace;
};

std::vector<Point> initial_centroids(std::span<const FeatureVector> x, std::size_t k, Rng& rng)
{
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<Point> centroids;
    std::vector<bool> used(x.size(), false);
    for (std::size_t idx : order) {
        if (centroids.size() == k)
            break;
        const bool duplicate = std::any_of(centroids.begin(), centroids.end(),
                                           [&](const Point& c) { return c == x[idx].values; });
        if (!duplicate) {
            centroids.push_back(x[idx].values);
            used[idx] = true;
        }
    }
    // Fewer distinct points than k: fill with repeats.
    for (std::size_t idx : order) {
        if (centroids.size() == k)
            break;
        if (!used[idx])
            centroids.push_back(x[idx].values);
    }
    return centroids;
}

Run lloyd(std::span<const FeatureVector> x, std::size_t k, Rng& rng)
{
    const std::size_t dims = x.front().values.size();
    Run run;
    run.centroids = initial_centroids(x, k, rng);
    run.assignments.assign(x.size(), k);

    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const std::size_t c = nearest_centroid(x[i].values, run.centroids);
            changed = changed || c != run.assignments[i];
            run.assignments[i] = c;
        }

        // Empty clusters take the point farthest from its current centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (std::find(run.assignments.begin(), run.assignments.end(), c) != run.assignments.end())
                continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const std::size_t owner = run.assignments[i];
                const auto members = std::count(run.assignments.begin(), run.assignments.end(), owner);
                const double d = squared_distance(x[i].values, run.centroids[owner]);
                if (members > 1 && d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            run.assignments[far] = c;
            changed = true;
        }

        std::vector<Point> sums(k, Point(dims, 0.0));
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            auto& s = sums[run.assignments[i]];
            for (std::size_t d = 0; d < dims; ++d)
                s[d] += x[i].values[d];
            ++sizes[run.assignments[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t d = 0; d < dims; ++d)
                run.centroids[c][d] = sums[c][d] / static_cast<double>(sizes[c]);
        }
        run.trace.push_back(objective(x, run.assignments, run.centroids));
        if (!changed)
            break;
    }
    run.wcss = run.trace.back();
    return run;
}

} // namespace

std::vector<FeatureVector> featurize(std::span<const FitResult> fits, double onehot_weight)
{
    if (fits.empty())
        throw ValidationError("featurize needs at least one fit");
    const std::size_t n = fits.size();
    std::vector<std::array<double, continuous_features>> raw(n);
    for (std::size_t u = 0; u < n; ++u)
        raw[u] = {fits[u].params.gain, fits[u].params.baseline, fits[u].params.width,
                  fits[u].mean_model_variance()};

    std::array<double, continuous_features> mean{};
    std::array<double, continuous_features> sd{};
    for (std::size_t c = 0; c < continuous_features; ++c) {
        for (const auto& r : raw)
            mean[c] += r[c];
        mean[c] /= static_cast<double>(n);
        for (const auto& r : raw)
            sd[c] += (r[c] - mean[c]) * (r[c] - mean[c]);
        sd[c] = std::sqrt(sd[c] / static_cast<double>(n));
    }

    std::vector<FeatureVector> out(n);
    for (std::size_t u = 0; u < n; ++u) {
        out[u].user_id = fits[u].user_id;
        for (std::size_t c = 0; c < continuous_features; ++c) {
            const bool flat = !(sd[c] > 1e-12 * std::max(1.0, std::abs(mean[c])));
            out[u].values.push_back(flat ? 0.0 : (raw[u][c] - mean[c]) / sd[c]);
        }
        for (DecoderKind kind : all_decoder_kinds)
            out[u].values.push_back(fits[u].decoder == kind ? onehot_weight : 0.0);
    }
    return out;
}

ClusterResult cluster_users(std::span<const FeatureVector> features, std::size_t k,
                            std::size_t restarts, std::uint64_t seed)
{
    if (k == 0)
        throw ValidationError("cluster count must be >= 1");
    if (k > features.size())
        throw ValidationError("more clusters than users");
    if (restarts == 0)
        throw ValidationError("clustering needs at least one restart");
    for (const auto& f : features) {
        if (f.values.size() != features.front().values.size())
            throw ValidationError("feature vectors differ in length");
    }

    ClusterResult result;
    result.k = k;
    result.seed = seed;
    Run best;
    for (std::size_t r = 0; r < restarts; ++r) {
        Rng rng = derive_rng(seed, r);
        Run run = lloyd(features, k, rng);
        result.restart_wcss.push_back(run.wcss);
        if (r == 0 || run.wcss < best.wcss) {
            best = std::move(run);
            result.best_restart = r;
        }
    }
    result.assignments = std::move(best.assignments);
    result.centroids = std::move(best.centroids);
    result.wcss = best.wcss;
    result.wcss_trace = std::move(best.trace);
    if (k >= 2)
        result.silhouette = silhouette(features, result.assignments);
    return result;
}

double silhouette(std::span<const FeatureVector> features, std::span<const std::size_t> assignments)
{
    if (features.size() != assignments.size())
        throw ValidationError("one assignment per feature vector expected");
    if (features.empty())
        throw ValidationError("silhouette needs data");
    const std::size_t k = *std::max_element(assignments.begin(), assignments.end()) + 1;
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t a : assignments)
        ++sizes[a];
    const auto used = std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; });
    if (used < 2)
        throw ValidationError("silhouette needs at least two non-empty clusters");

    double total = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::size_t own = assignments[i];
        if (sizes[own] == 1)
            continue;
        std::vector<double> dist_sum(k, 0.0);
        for (std::size_t j = 0; j < features.size(); ++j) {
            if (j != i)
                dist_sum[assignments[j]] += std::sqrt(squared_distance(features[i].values, features[j].values));
        }
        const double a = dist_sum[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c != own && sizes[c] > 0)
                b = std::min(b, dist_sum[c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(features.size());
}

} // namespace neurouser
