#pragma once

#include <cstdint>
#include <random>

namespace rohcrl {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `stream`, item `index` of a run seeded with `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ stream) ^ index);
}

// Always consumes exactly one draw, so stream alignment never depends on p.
inline bool bernoulli(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

// Named streams so that environment, policy and trainer never share draws.
namespace streams {
inline constexpr std::uint64_t kEnvironment = 0x454e56;
inline constexpr std::uint64_t kPolicy = 0x504f4c;
inline constexpr std::uint64_t kTrainer = 0x54524e;
inline constexpr std::uint64_t kInit = 0x494e49;
inline constexpr std::uint64_t kEvaluation = 0x4556414c;
inline constexpr std::uint64_t kRollout = 0x524f4c4c;
}  // namespace streams

}  // namespace rohcrl
