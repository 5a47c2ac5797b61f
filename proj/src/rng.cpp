// SPDX-License-Identifier: Apache-2.0
#include "infograd/rng.hpp"

#include <cmath>
#include <numbers>

namespace infograd {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double to_open_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

CounterRng CounterRng::split(std::string_view name) const {
  return split(stream_id(name));
}

CounterRng CounterRng::split(std::uint64_t tag) const {
  return CounterRng(seed_, mix(stream_ ^ mix(tag)));
}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t counter) const {
  std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return ctr;
}

std::uint64_t CounterRng::bits(std::uint64_t index) const {
  const auto b = block(index);
  return (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
}

double CounterRng::uniform(std::uint64_t index) const { return to_open_unit(bits(index)); }

double CounterRng::normal(std::uint64_t index) const {
  // One Philox block yields a Box-Muller pair; index parity selects the member.
  const auto b = block(index >> 1);
  const double u1 = to_open_unit((static_cast<std::uint64_t>(b[0]) << 32) | b[1]);
  const double u2 = to_open_unit((static_cast<std::uint64_t>(b[2]) << 32) | b[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (index & 1u) ? r * std::sin(angle) : r * std::cos(angle);
}

std::uint64_t CounterRng::below(std::uint64_t index, std::uint64_t n) const {
  const unsigned __int128 p = static_cast<unsigned __int128>(bits(index)) * n;
  return static_cast<std::uint64_t>(p >> 64);
}

}  // namespace infograd
