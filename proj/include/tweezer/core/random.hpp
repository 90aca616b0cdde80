#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tweezer {

// Deterministic substreams. A stream is keyed by (master seed, stage name,
// up to two integer counters) and hashed into the seed of an independent
// engine, so draws never depend on evaluation order or worker count.
struct SeedSpec {
    std::uint64_t master_seed = 0;
};

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

constexpr std::uint64_t stream_key(SeedSpec seed, std::string_view stage, std::uint64_t a = 0,
                                   std::uint64_t b = 0) {
    std::uint64_t k = detail::splitmix64(seed.master_seed);
    k = detail::splitmix64(k ^ detail::fnv1a(stage));
    k = detail::splitmix64(k ^ detail::splitmix64(a + 0x632be59bd9b4e019ULL));
    k = detail::splitmix64(k ^ detail::splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
    return k;
}

inline Rng make_stream(SeedSpec seed, std::string_view stage, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
    return Rng(stream_key(seed, stage, a, b));
}

// Child seed for handing a derived SeedSpec to another module.
inline SeedSpec derive_seed(SeedSpec seed, std::string_view stage, std::uint64_t a = 0,
                            std::uint64_t b = 0) {
    return SeedSpec{stream_key(seed, stage, a, b)};
}

}  // namespace tweezer
