#ifndef MSINEQ_RANDOM_HPP
#define MSINEQ_RANDOM_HPP

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, index, lane), so results do not depend on scheduling.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace msineq {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(splitmix64(splitmix64(seed) ^ stream)) {}

    [[nodiscard]] std::uint64_t bits(std::uint64_t index, std::uint64_t lane = 0) const
    {
        return splitmix64(key_ ^ splitmix64(index * 0x100000001b3ULL + lane));
    }
    /// Uniform in [0, 1) with 53 random bits.
    [[nodiscard]] double uniform(std::uint64_t index, std::uint64_t lane = 0) const
    {
        return static_cast<double>(bits(index, lane) >> 11) * 0x1.0p-53;
    }
    /// Standard normal by Box-Muller on lanes (2 lane, 2 lane + 1).
    [[nodiscard]] double normal(std::uint64_t index, std::uint64_t lane = 0) const
    {
        const double u1 = 1.0 - uniform(index, 2 * lane + 1000);
        const double u2 = uniform(index, 2 * lane + 1001);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
};

}  // namespace msineq

#endif  // MSINEQ_RANDOM_HPP
