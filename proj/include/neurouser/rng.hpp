#pragma once

#include <cstdint>
#include <limits>

namespace neurouser {

/// SplitMix64 generator. Seeding is a single word copy, which makes it cheap
/// to give every Monte Carlo trial its own stream.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept;

    /// Uniform double in [0, 1).
    double uniform() noexcept;

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    std::uint64_t state_;
};

/// Stream seed for item `index` of a computation seeded with `base`.
/// Deterministic and order independent, so batches can be evaluated in any
/// schedule with bit-identical results.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

inline Rng derive_rng(std::uint64_t base, std::uint64_t index) noexcept
{
    return Rng(derive_seed(base, index));
}

} // namespace neurouser
