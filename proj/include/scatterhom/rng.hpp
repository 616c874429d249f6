#pragma once

#include <cstdint>
#include <random>

namespace scatterhom {

/// splitmix64 mixing step (Steele, Lea & Flood 2014). Used to derive
/// well-separated engine seeds from (base seed, stream index) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent, reproducible stream for (base, i0, i1). Each Monte Carlo
/// replication owns one stream, so results do not depend on how the
/// replications are distributed over worker threads.
inline std::mt19937_64 make_stream(std::uint64_t base, std::uint64_t i0, std::uint64_t i1 = 0) {
    std::uint64_t s = splitmix64(base);
    s = splitmix64(s ^ (0x517cc1b727220a95ULL * (i0 + 1)));
    s = splitmix64(s ^ (0x2545f4914f6cdd1dULL * (i1 + 1)));
    return std::mt19937_64(s);
}

}  // namespace scatterhom
