#include "dfm/rng.hpp"

#include <cmath>

namespace dfm {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  key[0] += kWeyl0;
  key[1] += kWeyl1;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) philox_round(ctr, key);
  return ctr;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) {
  key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  stream_ = {static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

std::uint64_t RngStream::next_u64() {
  if (word_pos_ >= 4) {
    block_ = philox4x32({static_cast<std::uint32_t>(block_index_),
                         static_cast<std::uint32_t>(block_index_ >> 32), stream_[0], stream_[1]},
                        key_);
    ++block_index_;
    word_pos_ = 0;
  }
  const std::uint64_t lo = block_[word_pos_];
  const std::uint64_t hi = block_[word_pos_ + 1];
  word_pos_ += 2;
  return (hi << 32) | lo;
}

double RngStream::next_double() {
  // 53-bit mantissa in [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_exponential(double rate) {
  // u in [0,1) keeps 1-u in (0,1]; log1p keeps precision for small u
  return -std::log1p(-next_double()) / rate;
}

double RngStream::next_normal() {
  const double u1 = next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(2.0 * M_PI * u2);
}

double keyed_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
      static_cast<std::uint32_t>(b ^ (c << 16)), static_cast<std::uint32_t>((b >> 32) ^ c)};
  const auto out = philox4x32(
      ctr, {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  const std::uint64_t w1 = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  const std::uint64_t w2 = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  const double u1 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(w2 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace dfm
