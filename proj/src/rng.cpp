#include "covsketch/rng.hpp"

namespace covsketch {

Seed derive_seed(Seed base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(base ^ 0x243f6a8885a308d3ULL);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x13198a2e03707344ULL));
  return h;
}

}  // namespace covsketch
