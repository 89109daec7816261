#ifndef SEQCAL_RNG_HPP
#define SEQCAL_RNG_HPP

#include <cstdint>
#include <random>
#include <string>

namespace seqcal {

// splitmix64 step, used to derive independent seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic (master, index) -> seed derivation.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
    splitmix64(s);
    return splitmix64(s);
}

// Seed stream keyed by a string label (e.g. method id), FNV-1a hashed.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(master, h);
}

using Rng = std::mt19937_64;

}  // namespace seqcal

#endif
