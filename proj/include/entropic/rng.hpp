#pragma once

#include <cstdint>
#include <random>

namespace entropic {

/// splitmix64 step; used to derive independent per-path seeds from a root
/// seed so that parallel simulations are reproducible at any thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic stream for one simulation path: seed mixed with the path
/// index, independent of scheduling.
inline std::mt19937_64 path_stream(std::uint64_t root_seed, std::uint64_t path_index) {
    return std::mt19937_64(splitmix64(root_seed ^ splitmix64(path_index + 1)));
}

} // namespace entropic
