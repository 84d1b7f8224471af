#pragma once

#include <cstdint>
#include <vector>

namespace viewpcl::detail {

// Counter-based generator (splitmix64 finalizer). value(seed, k) depends only
// on (seed, k), so streams are reproducible across platforms and independent
// of evaluation order.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t counter_u64(std::uint64_t seed, std::uint64_t counter) {
  return mix64(seed + counter * 0x9e3779b97f4a7c15ULL);
}

/// Uniform double in [0, 1) from a (seed, counter) pair.
inline double counter_unit(std::uint64_t seed, std::uint64_t counter) {
  return static_cast<double>(counter_u64(seed, counter) >> 11) * 0x1.0p-53;
}

/// Stateful convenience wrapper around the counter stream.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() { return counter_u64(seed_, counter_++); }
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Unbiased integer in [0, n) via rejection sampling.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

template <typename T>
void shuffle(std::vector<T>& items, SplitMix& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace viewpcl::detail
