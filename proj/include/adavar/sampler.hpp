#pragma once

// Counter-based random streams.
//
// Every stream is a Philox4x32-10 generator keyed by the 64-bit master seed,
// with the 64-bit stream index occupying the upper half of the 128-bit
// counter. Streams are therefore derived in O(1) and never overlap: stream k
// owns the counter range [0, 2^64) x {k}. The generator family is fixed for
// reproducibility; changing it changes every result downstream.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "adavar/domain.hpp"

namespace adavar {

namespace detail {

inline constexpr std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                             std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

}  // namespace detail

class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : seed_(master_seed), stream_(stream_index) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  result_type operator()() {
    if (buffered_ == 0) refill();
    return buffer_[2 - buffered_--];
  }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double low, double high) { return low + (high - low) * uniform(); }

  // Standard normal via Box-Muller. Exactly two uniforms per pair of deviates;
  // the second deviate of a pair is kept for the next call.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  void refill() {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                              static_cast<std::uint32_t>(seed_ >> 32)};
    const auto out = detail::philox4x32_10(ctr, key);
    buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
    buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
    buffered_ = 2;
    ++block_;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline RngStream derive_stream(std::uint64_t master_seed, std::uint64_t run_index) {
  return RngStream(master_seed, run_index);
}

inline Point gaussian_vector(RngStream& rng, std::size_t dim) {
  if (dim < 1) throw std::invalid_argument("gaussian_vector: dimension must be >= 1");
  Point out(dim);
  for (auto& v : out) v = rng.gaussian();
  return out;
}

inline Point uniform_in_box(RngStream& rng, const BoxDomain& box) {
  Point out(box.dim());
  for (std::size_t i = 0; i < box.dim(); ++i) out[i] = rng.uniform(box.low()[i], box.high()[i]);
  // uniform() < 1 but low + w*u can round up to high; keep the draw closed.
  for (std::size_t i = 0; i < box.dim(); ++i) out[i] = box.clamp(i, out[i]);
  return out;
}

}  // namespace adavar
