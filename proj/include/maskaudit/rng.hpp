#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Deterministic random streams.
//
// All randomness in the library flows through rng::Stream, which wraps
// std::mt19937_64 (whose output sequence is pinned by the C++ standard)
// and applies hand-rolled uniform/normal transforms. distributions from
// <random> are deliberately avoided because their mapping from engine
// output to variates is implementation-defined; with the transforms below
// the double streams are bit-identical across platforms and compilers.
//
// Substreams: parallel work items (batches, restarts, rows) each construct
// their own Stream from mix(seed, index). Results are therefore independent
// of thread count and schedule.

namespace maskaudit::rng {

// splitmix64 finalizer-style mixer (public-domain construction).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive the seed of substream `index` from a master seed.
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ (0x2545f4914f6cdd1dULL * (index + 1)));
}

// Two-level substream derivation: a tag selects the purpose (sampling,
// attack restarts, ...) and an index selects the work item.
inline std::uint64_t mix2(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    return mix(mix(seed, tag), index);
}

class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform on [0, 1): top 53 bits of the engine output.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; never returns 0, safe for log().
    double uniform01_open_left() { return 1.0 - uniform01(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller (cosine branch). Two engine draws per
    // variate; no cached state, so the draw count per variate is fixed.
    double normal() {
        const double u1 = uniform01_open_left();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Integer in [0, n) by scaling (n is tiny in this codebase; modulo bias
    // of the scaled draw is below 2^-40 for n < 2^13).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)) % n;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace maskaudit::rng
