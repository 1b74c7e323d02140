#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mixprop::rng {

// splitmix64 step; used to mix ids into seed streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives a child seed from a master seed and a list of stream ids.  Streams
// with distinct id tuples are independent for practical purposes, and the
// derivation does not depend on evaluation order elsewhere.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t s = master;
    std::uint64_t out = splitmix64(s);
    for (std::uint64_t id : ids) {
        s ^= id + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        out = splitmix64(s);
    }
    return out;
}

inline std::mt19937_64 make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
    return std::mt19937_64(derive_seed(master, ids));
}

}  // namespace mixprop::rng
