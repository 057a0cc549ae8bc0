#pragma once

#include <cstdint>
#include <limits>

namespace lsi::numerics {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Key for an independent substream; depends only on (seed, task).
inline std::uint64_t substream_key(std::uint64_t seed, std::uint64_t task) {
  return mix64(mix64(seed ^ 0x6a09e667f3bcc909ULL) + 0x9e3779b97f4a7c15ULL * (task + 1));
}

/// Counter-based generator: output k is mix64(key + k * golden), so any
/// position of any substream is a pure function of (key, k).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key = 0) : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t task) : key_(substream_key(seed, task)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lsi::numerics
