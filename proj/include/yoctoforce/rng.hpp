#pragma once

// Counter-based deterministic random streams. Every draw is a pure function
// of (seed, purpose, stream, substream, counter), so any bin of any
// repetition can be synthesized independently and reruns are bit-identical
// across platforms. The generator is the splitmix64 finalizer over a derived
// key — statistically solid for Monte Carlo noise and trivially seekable.

#include <cmath>
#include <complex>
#include <cstdint>

#include "yoctoforce/constants.hpp"

namespace yf {

namespace detail {

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ull;

// splitmix64 output finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// Fold one label into a key (label + 1 so label 0 still perturbs).
inline constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t label) {
  return mix64(key + golden_gamma * (label + 1));
}

} // namespace detail

// One independent random stream addressed by (seed, purpose, stream,
// substream). Synthesis uses purpose to separate coherent-quadrature noise
// from power-spectrum noise, stream for the repetition (with the drive-scan
// offset index folded into the high bits), and substream for the bin.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t stream,
               std::uint64_t substream)
      : key_(detail::derive_key(
            detail::derive_key(detail::derive_key(seed, purpose), stream),
            substream)) {}

  std::uint64_t next_u64() {
    counter_ += detail::golden_gamma;
    return detail::mix64(key_ + counter_);
  }

  // Uniform on the open interval (0, 1), symmetric about 1/2.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (pairs cached).
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = two_pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Complex value with independent standard-normal quadratures.
  std::complex<double> next_complex_normal() {
    const double re = next_normal();
    const double im = next_normal();
    return {re, im};
  }

  // Unit-mean exponential variate.
  double next_exponential() { return -std::log(next_unit()); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Derive a child seed for an independent sub-experiment (e.g. one sweep
// point); deterministic and collision-resistant in the label.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
  return detail::derive_key(seed, label);
}

} // namespace yf
