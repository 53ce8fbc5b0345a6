#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "neurouser/population_code.hpp"
#include "neurouser/rng.hpp"

namespace neurouser {

enum class DecoderKind {
    ModeValue,         // MVD
    WeightedAverage,   // WAD
    MaximumLikelihood, // MLD
    MaximumAPosteriori // MAD
};

inline constexpr DecoderKind all_decoder_kinds[] = {
    DecoderKind::ModeValue, DecoderKind::WeightedAverage,
    DecoderKind::MaximumLikelihood, DecoderKind::MaximumAPosteriori};

/// Short tag: "MVD", "WAD", "MLD" or "MAD".
std::string_view to_string(DecoderKind kind) noexcept;
DecoderKind parse_decoder_kind(std::string_view tag);

/// Uniform grid lo, lo + step, ... up to hi (inclusive when hi is on the grid).
struct SearchGrid {
    double lo = 1.0;
    double hi = 5.0;
    double step = 1e-3;

    void validate() const;
    std::size_t size() const noexcept;
    double point(std::size_t j) const noexcept { return lo + static_cast<double>(j) * step; }
    /// Index of the grid point nearest to s, clamped to the grid.
    std::size_t nearest(double s) const noexcept;
    bool covers(double a, double b) const noexcept;

    bool operator==(const SearchGrid&) const = default;
};

/// Grid spanning the population's extended range [min - margin, max + margin].
SearchGrid default_grid(const Population& pop, double step = 1e-3);

struct UniformPrior {
    bool operator==(const UniformPrior&) const = default;
};

struct GaussianPrior {
    double mean = 3.0;
    double sd = 1.0;
    bool operator==(const GaussianPrior&) const = default;
};

/// Log-density per grid point; -inf marks zero prior mass. Off-grid values
/// use the nearest grid point.
struct TabulatedPrior {
    SearchGrid grid;
    std::vector<double> log_density;
    bool operator==(const TabulatedPrior&) const = default;
};

using Prior = std::variant<UniformPrior, GaussianPrior, TabulatedPrior>;

void validate_prior(const Prior& prior);

/// Log prior density at s (normalizing constant of the tabulated form omitted).
double log_prior_density(const Prior& prior, double s) noexcept;

struct DecoderSpec {
    DecoderKind kind = DecoderKind::WeightedAverage;
    Prior prior = UniformPrior{};
    /// Search grid for MLD and MAD; the population's default grid when unset.
    std::optional<SearchGrid> grid;

    bool operator==(const DecoderSpec&) const = default;
};

struct Estimate {
    double value = 0.0;
    double rating = 0.0;
    /// Log-likelihood (MLD) or log-posterior (MAD) on the search grid.
    /// Empty for MVD and WAD and for hot-loop decoding.
    std::vector<double> profile;
};

/// Clip to [min, max] then round to the nearest category, midpoints upward.
double discretize(double value, const RatingScale& scale);

Estimate decode_mvd(const Population& pop, const PopulationResponse& resp, Rng& rng);
Estimate decode_wad(const Population& pop, const PopulationResponse& resp);

/// Poisson log-likelihood sum_i [r_i ln f_i(s) - f_i(s)] without the
/// ln(r_i!) terms, which do not depend on s. May be -inf.
double log_likelihood(const Population& pop, const PopulationResponse& resp, double s);

/// Unnormalized log posterior: log_likelihood + log prior density.
double log_posterior(const Population& pop, const PopulationResponse& resp,
                     const Prior& prior, double s);

/// Exhaustive grid argmax of the likelihood, ties to the smallest s.
Estimate decode_mld(const Population& pop, const PopulationResponse& resp, const SearchGrid& grid);
Estimate decode_mad(const Population& pop, const PopulationResponse& resp,
                    const Prior& prior, const SearchGrid& grid);

/// Population plus decoder with the per-grid tables precomputed. Decoding
/// results are identical to the free functions above.
class Decoder {
public:
    Decoder(Population pop, DecoderSpec spec);

    const Population& population() const noexcept { return pop_; }
    const DecoderSpec& spec() const noexcept { return spec_; }
    /// Effective grid (MLD/MAD only).
    const SearchGrid& grid() const noexcept { return grid_; }

    /// Continuous estimate. `rng` is consumed only by MVD tie-breaks.
    double decode_value(const PopulationResponse& resp, Rng& rng) const;
    Estimate decode(const PopulationResponse& resp, Rng& rng, bool with_profile = false) const;

private:
    double grid_argmax(const PopulationResponse& resp, std::vector<double>* profile) const;

    Population pop_;
    DecoderSpec spec_;
    SearchGrid grid_;
    std::vector<double> preferred_;
    std::vector<double> log_rates_; // neuron-major, N x grid size
    std::vector<double> rate_sums_;
    std::vector<double> log_prior_;
};

} // namespace neurouser
