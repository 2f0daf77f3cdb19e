#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace scepipe {

// 64-bit FNV-1a with a splitmix64 finalizer. FNV alone mixes short keys
// poorly in the high bits; the finalizer gives full avalanche, which the
// drop-out and split decisions rely on. Fixed constants, no platform or
// endianness dependence, so decisions reproduce across machines.

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= kFnvPrime;
    }
    return state;
}

/// Avalanched 64-bit hash of a byte string.
constexpr std::uint64_t hash64(std::string_view bytes) { return mix64(fnv1a64(bytes)); }

/// Hash of a 64-bit seed (little-endian bytes) concatenated with a string.
inline std::uint64_t hash64(std::uint64_t seed, std::string_view bytes) {
    std::uint64_t state = kFnvOffset;
    for (int i = 0; i < 8; ++i) {
        state ^= static_cast<unsigned char>(seed >> (8 * i));
        state *= kFnvPrime;
    }
    return mix64(fnv1a64(bytes, state));
}

/// Maps a hash to [0, 1). 2^-64 granularity is plenty for split ratios.
inline double toUnitInterval(std::uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// First 8 hex chars of a hash, used as content-version tags.
std::string hexPrefix8(std::uint64_t h);

/// Full 16-hex-char rendering, used for directory content hashes.
std::string hex16(std::uint64_t h);

} // namespace scepipe
