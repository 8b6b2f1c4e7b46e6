#pragma once

#include <array>
#include <cstdint>

namespace dfm {

/// Philox4x32-10 counter block function (Salmon et al., SC'11 constants).
/// Pure function of (counter, key); the basis of all randomness in this
/// project so that parallel streams are reproducible by construction.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

/// One logical random stream, identified by (seed, stream).  Streams with
/// distinct ids are statistically independent; draws are a deterministic
/// function of (seed, stream, draw position) and never depend on other
/// streams, so per-path results are identical for any thread count.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double next_double();
  /// Inverse-CDF exponential with the given rate > 0.
  double next_exponential(double rate);
  /// Standard normal via Box-Muller (consumes two uniforms).
  double next_normal();

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int word_pos_ = 4;  // forces generation on first draw
};

/// One-shot deterministic standard normal keyed by (seed, a, b, c).
/// Used for frozen pseudo-noise tables (perturbed score models).
double keyed_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace dfm
