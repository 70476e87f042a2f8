#pragma once

// Counter-based splittable random bits. A stream is identified by
// (seed, stream id); its i-th output depends only on (seed, id, i), so any
// partition of work into substreams reproduces the same numbers.

#include <cstdint>
#include <limits>
#include <random>

namespace spiked {

namespace detail {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// UniformRandomBitGenerator over a keyed counter.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(detail::mix64(seed ^ detail::mix64(stream + 0x632BE59BD9B4E019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return detail::mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  /// Child stream derived from this stream's key, for nested splitting.
  [[nodiscard]] CounterRng split(std::uint64_t child) const { return {key_, child}; }

  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Standard normal source bound to one substream.
class NormalSource {
 public:
  NormalSource(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}
  explicit NormalSource(CounterRng rng) : rng_(rng) {}

  double operator()() { return dist_(rng_); }

  CounterRng& engine() { return rng_; }

 private:
  CounterRng rng_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace spiked
