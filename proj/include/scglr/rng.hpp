#pragma once

#include <cstdint>
#include <random>

namespace scglr {

using Rng = std::mt19937_64;

// splitmix64 finaliser; decorrelates consecutive inputs.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic per-item seed for a work queue: independent of execution
// order and thread count, so parallel runs reproduce serial ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t item) {
  return mix64(master ^ mix64(item + 1));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

}  // namespace scglr
