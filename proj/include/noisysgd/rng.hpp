#pragma once

// Counter-based random streams.
//
// Every draw is a pure function of (master_seed, stream_id, counter): the
// counter block (counter_lo, counter_hi, stream_lo, stream_hi) is encrypted
// with Philox-4x32-10 under the 64-bit master seed. Streams with different ids
// never share a block, so runs can be split across threads without any
// coordination and any prefix of a run can be replayed exactly.
//
// Counter cost per call (part of the reproducibility contract):
//   next_u64, draw_uniform, draw_index, draw_bernoulli  -> 1 block
//   draw_gaussian                                       -> 1 block
//     (both 64-bit halves of the block feed one Box-Muller transform)

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "noisysgd/error.hpp"

namespace noisysgd {

namespace philox {

using Block = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

constexpr Block round(Block c, Key k) noexcept {
  const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
  const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

/// Philox-4x32 with ten rounds.
constexpr Block encrypt(Block ctr, Key key) noexcept {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    ctr = round(ctr, key);
  }
  return ctr;
}

}  // namespace philox

class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id, std::uint64_t counter = 0) noexcept
      : master_seed_(master_seed), stream_id_(stream_id), counter_(counter) {}

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// A fresh stream under the same seed; `id` should be unique per purpose.
  RngStream substream(std::uint64_t id) const noexcept { return {master_seed_, id, 0}; }

  /// The full 128-bit block at position `k`, without touching the counter.
  philox::Block block_at(std::uint64_t k) const noexcept {
    const philox::Block ctr = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                               static_cast<std::uint32_t>(stream_id_),
                               static_cast<std::uint32_t>(stream_id_ >> 32)};
    const philox::Key key = {static_cast<std::uint32_t>(master_seed_),
                             static_cast<std::uint32_t>(master_seed_ >> 32)};
    return philox::encrypt(ctr, key);
  }

  std::uint64_t next_u64() noexcept {
    const auto b = block_at(counter_++);
    return (std::uint64_t{b[1]} << 32) | b[0];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double next_unit() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double draw_uniform(double lo, double hi) {
    if (!(lo < hi)) throw InvalidArgument("draw_uniform: need lo < hi");
    return lo + (hi - lo) * next_unit();
  }

  /// Standard normal via Box-Muller on the two halves of one block.
  double draw_gaussian() noexcept {
    const auto b = block_at(counter_++);
    const std::uint64_t a = (std::uint64_t{b[1]} << 32) | b[0];
    const std::uint64_t c = (std::uint64_t{b[3]} << 32) | b[2];
    const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(c >> 11) * 0x1.0p-53;        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n) by 64x64 -> 128 multiply-high (bias < n / 2^64).
  std::uint64_t draw_index(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("draw_index: n must be positive");
    const unsigned __int128 prod = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(prod >> 64);
  }

  bool draw_bernoulli(double p) noexcept { return next_unit() < p; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_;
};

/// SplitMix64 finalizer; used to derive stream ids from (run_id, purpose).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_stream_id(std::uint64_t run_id, std::uint64_t purpose) noexcept {
  return mix64(mix64(run_id + 0x9E3779B97F4A7C15ull) ^ (purpose * 0xD1B54A32D192ED03ull));
}

}  // namespace noisysgd
