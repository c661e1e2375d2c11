#pragma once

#include <cstdint>
#include <random>

namespace tailport {

using Engine = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the independent stream owned by replication `index` under `master_seed`.
constexpr std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
  return mix64(mix64(master_seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Engine make_stream(std::uint64_t master_seed, std::uint64_t index) {
  return Engine(stream_seed(master_seed, index));
}

}  // namespace tailport
