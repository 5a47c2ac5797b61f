// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random numbers (Philox4x32-10). Every draw is a pure
// function of (seed, stream, index), so results do not depend on the
// order or the thread in which they are requested.
#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string_view>

namespace infograd {

/// FNV-1a hash used to derive stream identifiers from names.
constexpr std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
  CounterRng(std::uint64_t seed, std::string_view stream) : CounterRng(seed, stream_id(stream)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Derives an independent stream from this one.
  CounterRng split(std::string_view name) const;
  CounterRng split(std::uint64_t tag) const;

  std::array<std::uint32_t, 4> block(std::uint64_t counter) const;

  std::uint64_t bits(std::uint64_t index) const;
  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t index) const;
  double normal(std::uint64_t index) const;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t index, std::uint64_t n) const;

  /// Fills m (column-major order) with standard normals starting at `first`.
  template <typename Derived>
  void fill_normal(Eigen::DenseBase<Derived>& m, std::uint64_t first) const {
    const Eigen::Index n = m.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      m.derived().data()[i] = static_cast<typename Derived::Scalar>(normal(first + i));
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace infograd
