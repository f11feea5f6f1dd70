#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "wgbs/error.hpp"

namespace wgbs {

/// Philox 4x32-10 block cipher used as a counter-based random generator.
///
/// Counter-based generation makes parallel simulation reproducible: a stream
/// is addressed by (key, counter) alone, so any worker can generate any part
/// of any stream without shared state, and results do not depend on how work
/// is distributed.
struct Philox4x32 {
  using counter_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  static constexpr std::uint32_t kMult0 = 0xD2511F53u;
  static constexpr std::uint32_t kMult1 = 0xCD9E8D57u;

  static counter_type encrypt(counter_type ctr, key_type key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMult0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMult1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

/// One independent random stream, addressed by (seed, stream id).
///
/// The 64-bit stream id selects a substream (e.g. one per simulation block
/// and channel); draws within the stream consume a 64-bit counter. Streams
/// with distinct (seed, stream) pairs are statistically independent.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_lo_(static_cast<std::uint32_t>(stream)),
        stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      block_ = Philox4x32::encrypt(
          {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
           stream_lo_, stream_hi_},
          key_);
      ++counter_;
      pos_ = 0;
    }
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1], safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  double exponential(double mean) { return -mean * std::log(uniform_pos()); }

  /// Standard normal via Box-Muller; draws two uniforms per call.
  double normal() {
    const double u = uniform_pos();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    return r * std::cos(6.283185307179586476925286766559 * v);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Poisson sample by inversion; intended for modest means (< ~700).
  std::uint64_t poisson(double mean) {
    if (mean < 0.0) throw domain_error("poisson: negative mean");
    if (mean == 0.0) return 0;
    if (mean > 700.0) {
      // Normal approximation keeps inversion away from double underflow.
      const double x = std::round(normal(mean, std::sqrt(mean)));
      return x > 0.0 ? static_cast<std::uint64_t>(x) : 0u;
    }
    const double target = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (cdf <= target && k < 100000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

 private:
  Philox4x32::key_type key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint64_t counter_ = 0;
  Philox4x32::counter_type block_{};
  int pos_ = 4;
};

}  // namespace wgbs
