#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace graphcontrol {

// All stochastic code draws from std::mt19937_64 through the helpers below.
// The engine output sequence is fixed by the standard, and the helpers avoid
// the implementation-defined std:: distributions, so runs are portable.
using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a list of tags
/// (e.g. center node id, epoch, view index).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(base);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

/// Uniform double in [0, 1) from one 64-bit draw.
inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) from one or more 64-bit draws (rejection keeps it
/// unbiased; for n well below 2^63 a second draw is practically never needed).
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
  // 2^64 mod n; draws below it would bias the low residues.
  const std::uint64_t threshold = (std::uint64_t{0} - n) % n;
  std::uint64_t x = eng();
  while (x < threshold) x = eng();
  return x % n;
}

inline double uniform(Engine& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

/// Fisher-Yates shuffle with uniform_index.
template <class It>
void shuffle(It first, It last, Engine& eng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(eng, i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace graphcontrol
