/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/
#pragma once

// Counter-based splittable random streams on top of Philox4x32-10.
//
// A stream is addressed by (base_seed, stream_index).  The 64-bit seed is the
// Philox key and the 64-bit stream index occupies the high half of the 128-bit
// counter, so distinct indices can never produce overlapping counter blocks no
// matter how many values each stream emits.  Draws are reproducible across
// platforms and independent of the order in which streams are created.

#include <array>
#include <cmath>
#include <cstdint>

namespace nrf {

namespace detail {

// One block of Philox4x32 with 10 rounds.  Constants are the ones published
// with the original generator.
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::uint32_t key0,
                                                  std::uint32_t key1) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key0, lo1, hi0 ^ ctr[3] ^ key1, lo0};
    key0 += kWeyl0;
    key1 += kWeyl1;
  }
  return ctr;
}

}  // namespace detail

/// Ratio between the standard deviation of a unit normal truncated to
/// [-2, 2] and the unit normal itself.  Samples are divided by this so a
/// truncated draw keeps the variance the caller asked for.
inline constexpr double kTruncatedNormalStd = 0.87962566103423978;

/// One independent, deterministic random stream.
///
/// Equal (base_seed, stream_index) pairs always yield the identical sequence;
/// unequal pairs yield counter blocks that cannot collide.
class RngStream {
 public:
  RngStream(std::uint64_t base_seed, std::uint64_t stream_index)
      : seed_(base_seed), index_(stream_index) {}

  std::uint64_t base_seed() const { return seed_; }
  std::uint64_t stream_index() const { return index_; }

  /// Next raw 32-bit word.
  std::uint32_t next_u32() {
    if (pos_ == 4) {
      block_buf_ = detail::philox4x32_10(
          {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
           static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32)},
          static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32));
      ++block_;
      pos_ = 0;
    }
    return block_buf_[pos_++];
  }

  /// Next raw 64-bit word (low 32 bits drawn first).
  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 lies in (0, 1] so the log is finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  /// Standard normal truncated to [-2, 2] by rejection and rescaled to unit
  /// variance.  Multiplying by sigma gives a truncated normal whose variance
  /// is exactly sigma^2 and whose support is [-2 sigma_raw, 2 sigma_raw] in
  /// raw units, matching the usual truncated initializer convention.
  double truncated_normal() {
    for (;;) {
      const double z = normal();
      if (z >= -2.0 && z <= 2.0) return z / kTruncatedNormalStd;
    }
  }

  /// Skip the generator to a fresh block boundary, abandoning buffered words.
  /// Only used by tests that need block-aligned sequences.
  void discard_partial_block() {
    pos_ = 4;
    have_spare_ = false;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t index_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> block_buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Stream for column/network `stream_index` under `base_seed`.
inline RngStream derive_stream(std::uint64_t base_seed, std::uint64_t stream_index) {
  return RngStream(base_seed, stream_index);
}

/// Stream index space is partitioned so feature columns (0..n-1) can never
/// collide with auxiliary consumers such as validation-split shuffles or
/// synthetic data generation, which live in the top half.
inline constexpr std::uint64_t kAuxStreamBase = 0x8000000000000000ull;

}  // namespace nrf
