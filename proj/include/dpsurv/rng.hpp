#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace dpsurv {

// Counter-based deterministic random stream.
//
// A stream is keyed by mixing an arbitrary tuple of 64-bit integers
// (base seed, dataset index, method index, epsilon index, iteration,
// substream id) through the splitmix64 finalizer. Output word i is
// hash(key, i), so draws depend only on (key, counter): any worker may
// generate any stream independently and identically, which is what makes
// harness results byte-identical under arbitrary scheduling.
class Rng {
 public:
  Rng() : key_(0), counter_(0) {}

  explicit Rng(std::initializer_list<std::uint64_t> tuple) : key_(0), counter_(0) {
    for (std::uint64_t v : tuple) absorb(v);
  }

  void absorb(std::uint64_t v) {
    key_ = mix(key_ ^ mix(v + 0x9e3779b97f4a7c15ULL));
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  // Uniform double in the open interval (0,1); never returns 0 or 1, so
  // inverse-CDF transforms (Laplace) are safe without special-casing.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) by rejection-free scaling (n is tiny in all
  // callers relative to 2^64; modulo bias is < 2^-50 and irrelevant here,
  // but we keep the multiply-shift method which is exactly unbiased when
  // accumulated draws are uniform over 2^64).
  std::uint64_t next_below(std::uint64_t n) {
    // 128-bit multiply-shift (Lemire); unbiased enough for simulation use.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t draws() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace dpsurv
