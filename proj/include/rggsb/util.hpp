#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <vector>

namespace rggsb {

// SplitMix64 step; used both as a PRNG seeder and as a mixing hash.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministically derive a stream seed from a base seed and a tag chain,
// e.g. seed_mix(sweep_seed, {geometry_tag, eta_index, block_index}).
inline std::uint64_t seed_mix(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = splitmix64(base);
    for (std::uint64_t t : tags) s = splitmix64(s ^ (t + 0x632be59bd9b4e019ULL));
    return s;
}

// Order-independent content hash of an integer sequence (order-sensitive FNV-style).
inline std::uint64_t sequence_hash(const std::vector<std::uint32_t>& v) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint32_t x : v) {
        h ^= x;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Worker count: RGG_THREADS caps parallelism, default all cores.
int worker_count();

// Runs fn(i) for i in [0, n) on up to max_threads workers (0 = worker_count()).
// Tasks write only their own output slots, so results do not depend on scheduling.
// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int max_threads = 0);

}  // namespace rggsb
