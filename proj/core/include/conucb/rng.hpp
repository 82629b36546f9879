#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace conucb {

using Rng = std::mt19937_64;

// Independent stream seed from a list of integers (master seed, user,
// repetition, stream tag...). Same inputs always give the same seed.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::vector<std::uint32_t> words;
    words.reserve(parts.size() * 2);
    for (std::uint64_t p : parts) {
        words.push_back(static_cast<std::uint32_t>(p & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

// Stream tags.
inline constexpr std::uint64_t kWorldStream = 0x574f524c44ULL;
inline constexpr std::uint64_t kEnvironmentStream = 0x454e56ULL;
inline constexpr std::uint64_t kPolicyStream = 0x504f4cULL;
inline constexpr std::uint64_t kLogStream = 0x4c4f47ULL;

}  // namespace conucb
