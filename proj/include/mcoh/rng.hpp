#pragma once

#include <cstdint>
#include <random>

namespace mcoh {

// splitmix64 finalizer. Sub-seeds (per window, per k-means restart) are
// derived from the master seed with this instead of std::hash, whose value
// is not pinned by the standard.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64{seed};
}

}  // namespace mcoh
