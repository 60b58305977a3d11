#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace oamd::rng {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
/// the output block is a pure function of (counter, key), which lets every
/// atom own an independent stream addressed by its index.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Uniform doubles for one (seed, stream) pair, two per Philox block.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_lo_(static_cast<std::uint32_t>(stream)),
        stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    if (cursor_ == 2) refill();
    return buffer_[cursor_++];
  }

  /// Uniform on (0, 1], safe as a logarithm argument.
  double uniform_open_zero() { return 1.0 - uniform(); }

  /// Standard normal pair by the Box-Muller transform.
  std::array<double, 2> normal_pair() {
    const double radius = std::sqrt(-2.0 * std::log(uniform_open_zero()));
    const double angle = 6.283185307179586476925 * uniform();
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

 private:
  void refill() {
    const auto out = Philox4x32::block({stream_lo_, stream_hi_, block_++, 0u}, key_);
    for (int i = 0; i < 2; ++i) {
      const std::uint64_t bits = (std::uint64_t{out[2 * i]} << 32) | out[2 * i + 1];
      buffer_[i] = static_cast<double>(bits >> 11) * 0x1.0p-53;
    }
    cursor_ = 0;
  }

  Philox4x32::Key key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint32_t block_ = 0;
  std::array<double, 2> buffer_{};
  int cursor_ = 2;
};

/// Derives an independent 64-bit seed for substream `index` of `master`
/// (used for per-configuration seeds inside a scenario).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  const auto out = Philox4x32::block(
      {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0xFFFFFFFFu, 0x5EEDu},
      {static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)});
  return (std::uint64_t{out[0]} << 32) | out[1];
}

}  // namespace oamd::rng
