#pragma once

#include <cstdint>
#include <random>

namespace racmc {

using Rng = std::mt19937_64;

// Purpose tags for deriving independent streams from one run seed, so that
// e.g. adding a dropout call never perturbs the shuffle order.
enum class Stream : std::uint64_t {
  init = 1,
  shuffle = 2,
  dropout = 3,
  synth = 4,
};

inline Rng derive_rng(std::uint64_t seed, Stream stream) {
  // splitmix64 over (seed, stream) -- decorrelates the raw seeds.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(stream);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return Rng(z ^ (z >> 31));
}

}  // namespace racmc
