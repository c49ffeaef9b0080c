// Seeded random streams. Each stochastic source (arrivals, uploads,
// computation, policy randomization) gets its own sub-stream derived from a
// master seed, so different policies can be compared on common random numbers.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace edgedispatch {

/// SplitMix64 step; used only to mix seeds for the main engines.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derive a child seed from (master, replication, stream id).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication, std::uint64_t stream) {
    std::uint64_t s = master;
    (void)splitmix64(s);
    s ^= 0xA0761D6478BD642FULL * (replication + 1);
    (void)splitmix64(s);
    s ^= 0xE7037ED1A0B428DBULL * (stream + 1);
    return splitmix64(s);
}

/// One reproducible random stream. Doubles are produced from the top 53 bits
/// of the engine output, so sequences do not depend on library internals.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0,1).
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool next_bernoulli(double p) { return next_double() < p; }

    /// Binomial(n, p) by n Bernoulli draws, always consuming `consume`
    /// uniforms (consume >= n) so stream positions stay aligned across
    /// trajectories that differ only in n.
    int next_binomial(int n, double p, int consume) {
        int successes = 0;
        for (int i = 0; i < consume; ++i) {
            double u = next_double();
            if (i < n && u < p) ++successes;
        }
        return successes;
    }

    int next_binomial(int n, double p) { return next_binomial(n, p, n); }

    /// Draw from a PMF over {1..pmf.size()} by CDF inversion; one uniform.
    int next_pmf(const std::vector<double>& pmf) {
        double u = next_double();
        double acc = 0.0;
        for (std::size_t i = 0; i < pmf.size(); ++i) {
            acc += pmf[i];
            if (u < acc) return static_cast<int>(i) + 1;
        }
        return static_cast<int>(pmf.size());
    }

    /// Uniform integer in {0..n-1} by rejection.
    int next_index(int n) {
        const std::uint64_t bound = ~0ULL - ~0ULL % static_cast<std::uint64_t>(n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= bound);
        return static_cast<int>(x % static_cast<std::uint64_t>(n));
    }

private:
    std::mt19937_64 engine_;
};

/// The named sub-streams consumed by one trajectory.
struct TrajectoryRng {
    RngStream arrivals;
    RngStream uploads;
    RngStream computation;
    RngStream policy;

    TrajectoryRng(std::uint64_t master, std::uint64_t replication)
        : arrivals(derive_seed(master, replication, 0)),
          uploads(derive_seed(master, replication, 1)),
          computation(derive_seed(master, replication, 2)),
          policy(derive_seed(master, replication, 3)) {}
};

} // namespace edgedispatch
