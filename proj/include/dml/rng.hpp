#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace dml {

// All randomness in the library flows through one fixed generator so that
// results are bit-reproducible across platforms and independent of thread
// scheduling. The generator is xoshiro256++ seeded through splitmix64;
// substreams (one per replication, per Gaussian draw block, ...) are derived
// from a master seed with hash_mix rather than by jumping, so any substream
// can be constructed without touching the others.

/// splitmix64 step: advances `state` and returns the next output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic 64-bit mix of (a, b); used to derive substream seeds.
std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b);

/// FNV-1a over a byte string, used for config/spec hashes.
std::uint64_t fnv1a(const void* data, std::size_t size);

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Substream `index` of a master seed. Rng::derive(s, i) == Rng(hash_mix(s, i)).
    static Rng derive(std::uint64_t master_seed, std::uint64_t index);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1), 53-bit resolution.
    double next_double();

    /// Uniform double strictly inside (0, 1); safe to feed to normal_quantile.
    double next_open_double();

    /// Standard normal draw via the inverse-CDF method (deterministic,
    /// platform-independent; exactly one next_u64 per draw).
    double next_normal();

    /// Uniform integer in [0, bound) without modulo bias.
    std::uint64_t next_below(std::uint64_t bound);

private:
    std::uint64_t s_[4];
};

/// Inverse standard normal CDF, Wichura's AS 241 (PPND16), |error| ~ 1e-15.
/// Requires p in (0, 1).
double normal_quantile(double p);

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// Neumaier-compensated summation; exact-identity tests rely on it.
class NeumaierSum {
public:
    void add(double v);
    double value() const { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

/// Runs fn(i) for i in [0, count). With more than one thread the index space
/// is dealt round-robin; fn must write only to its own per-index slots so the
/// result is identical for every thread count.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

} // namespace dml
