#include "infograd/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using infograd::CounterRng;

TEST(CounterRng, SameKeyGivesSameDraws) {
  const CounterRng a(7, "noise/y");
  const CounterRng b(7, "noise/y");
  for (std::uint64_t i = 0; i < 100; ++i) {
    EXPECT_EQ(a.bits(i), b.bits(i));
    EXPECT_EQ(a.normal(i), b.normal(i));
  }
}

TEST(CounterRng, DrawsDoNotDependOnRequestOrder) {
  const CounterRng rng(3, 11);
  std::vector<double> forward, backward(50);
  for (std::uint64_t i = 0; i < 50; ++i) forward.push_back(rng.uniform(i));
  for (std::uint64_t i = 50; i-- > 0;) backward[i] = rng.uniform(i);
  EXPECT_EQ(forward, backward);
}

TEST(CounterRng, SeedsAndStreamsDiffer) {
  const CounterRng base(1, "a");
  EXPECT_NE(base.bits(0), CounterRng(2, "a").bits(0));
  EXPECT_NE(base.bits(0), CounterRng(1, "b").bits(0));
  EXPECT_NE(base.split("x").bits(0), base.split("y").bits(0));
  EXPECT_EQ(base.split("x").bits(5), base.split("x").bits(5));
}

TEST(CounterRng, UniformStaysInOpenInterval) {
  const CounterRng rng(0, 0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(i);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // mean 1/2, sd of the mean sqrt(1/12/n)
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(CounterRng, NormalMoments) {
  const CounterRng rng(42, "moments");
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(i);
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(CounterRng, BelowCoversRange) {
  const CounterRng rng(5, "below");
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto k = rng.below(i, 7);
    ASSERT_LT(k, 7u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(CounterRng, FillNormalMatchesScalarDraws) {
  const CounterRng rng(9, "fill");
  Eigen::MatrixXd m(3, 4);
  rng.fill_normal(m, 10);
  for (Eigen::Index i = 0; i < m.size(); ++i) EXPECT_EQ(m.data()[i], rng.normal(10 + i));
}

TEST(StreamId, IsFnv1a) {
  // FNV-1a of the empty string is the offset basis; of "a" the published value.
  EXPECT_EQ(infograd::stream_id(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(infograd::stream_id("a"), 0xaf63dc4c8601ec8cULL);
}
