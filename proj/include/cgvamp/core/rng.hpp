#pragma once

#include <cstdint>
#include <random>

namespace cgvamp {

// Named sub-streams derived from one master seed, so that e.g. the operator's
// sign pattern and the noise draw never alias even when the user passes the
// same small integers everywhere.
enum class Stream : std::uint64_t {
  operator_signs = 0x5349474e,
  operator_perm = 0x5045524d,
  operator_gauss = 0x47415553,
  signal = 0x5349474c,
  noise = 0x4e4f4953,
  probes = 0x50524f42,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t k = 0) {
  return splitmix64(splitmix64(master ^ static_cast<std::uint64_t>(stream)) + k);
}

inline std::mt19937_64 make_rng(std::uint64_t master, Stream stream, std::uint64_t k = 0) {
  return std::mt19937_64(derive_seed(master, stream, k));
}

// Unbiased bounded draw (rejection), so permutations do not depend on the
// standard library's distribution internals.
inline std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

} // namespace cgvamp
