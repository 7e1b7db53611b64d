#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace dgw {

namespace detail {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

// Counter-based random stream. The output is a pure function of (key, counter),
// so streams can be derived for any (seed, replicate, generation) without
// touching shared state; results never depend on scheduling order.
//
// Satisfies UniformRandomBitGenerator, so it can drive <random> distributions.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit RandomStream(std::uint64_t seed) : key_{detail::mix64(seed ^ 0x243f6a8885a308d3ULL)} {}

  // Child stream keyed by (this key, tag). Does not advance this stream.
  constexpr RandomStream fork(std::uint64_t tag) const {
    RandomStream child{0};
    child.key_ = detail::mix64(key_ + detail::mix64(tag + detail::kGolden) * 0xd1342543de82ef95ULL);
    return child;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_positive() { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_{0};
};

}  // namespace dgw
