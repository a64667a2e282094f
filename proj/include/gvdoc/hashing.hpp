#pragma once

#include <cstdint>
#include <string_view>

namespace gvdoc {

// FNV-1a, 64-bit. Used for vocabulary hashing and config fingerprints.
inline uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Mixes several integers into one seed (splitmix64 finalizer per word).
inline uint64_t mix_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    auto mix = [](uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    };
    return mix(mix(mix(a) ^ b) ^ c);
}

}  // namespace gvdoc
