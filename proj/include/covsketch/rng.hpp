#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace covsketch {

using Seed = std::uint64_t;

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based seed derivation: the stream for (base, i, j, ...) depends
// only on the path, never on which thread asks or in what order.
Seed derive_seed(Seed base, std::initializer_list<std::uint64_t> path);

// Stable tags for derive_seed paths so independent consumers of one base
// seed never collide.
enum class Stream : std::uint64_t {
  kEnsemble = 1,
  kTruth = 2,
  kNoise = 3,
  kSchedule = 4,
  kProbe = 5,
  kSolver = 6,
};

inline Seed derive_seed(Seed base, Stream s, std::uint64_t index = 0) {
  return derive_seed(base, {static_cast<std::uint64_t>(s), index});
}

using Engine = std::mt19937_64;

inline Engine make_engine(Seed seed) { return Engine(mix64(seed)); }

}  // namespace covsketch
