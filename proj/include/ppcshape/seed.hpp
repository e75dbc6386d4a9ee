#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ppcshape {

// Master-seed fan-out. Every consumer draws from its own labeled stream:
//   stream_seed(master, label, index) = splitmix64(master ^ fnv1a64(label) ^ splitmix64(index))
// so adding a consumer never perturbs the numbers another consumer sees.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t stream_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index = 0) {
  return splitmix64(master ^ fnv1a64(label) ^ splitmix64(index));
}

namespace streams {
inline constexpr std::string_view kChannel = "channel";
inline constexpr std::string_view kDslmChoice = "dslm-choice";
inline constexpr std::string_view kInterleaver = "interleaver";
inline constexpr std::string_view kCodeGeneration = "code-generation";
inline constexpr std::string_view kSource = "source";
inline constexpr std::string_view kTraining = "equalizer-training";
}  // namespace streams

using Rng = std::mt19937_64;

}  // namespace ppcshape
