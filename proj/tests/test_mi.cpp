#include "infograd/mi.hpp"
#include "infograd/optimize.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

using namespace infograd;
namespace t = infograd::testing;

namespace {

const double kHalfLog2 = 0.5 * std::log(2.0);

// MC information gradient of a linear DAG with exact scores; every call
// draws a fresh batch so waypoint errors are independent
GradientSource analytic_source(const DagSpec& spec, Index samples, std::uint64_t seed) {
  auto calls = std::make_shared<std::uint64_t>(0);
  return [spec, samples, seed, calls](const ParamStore& p) {
    const std::uint64_t s = CounterRng(seed, "waypoint").bits((*calls)++);
    const auto m = linear_gaussian_reduce(spec, p);
    return info_gradient_mc(spec, p, analytic_marginal_score(m), analytic_conditional_score(m, {"x"}), samples, s);
  };
}

ScoreFamily scalar_family(const DagConfig& c) {
  const auto m = std::make_shared<LinearGaussianReduction>(linear_gaussian_reduce(c.spec, c.params));
  ScoreFamily f;
  f.fine = [m](double tl) { return analytic_conditional_score(*m, {"x"}, ScoreKind::conditional_on_x, tl); };
  f.coarse = [m](double tl) { return analytic_marginal_score(*m, tl); };
  f.fine_nodes = {"x"};
  return f;
}

}  // namespace

TEST(ClosedForm, MultipathValues) {
  const auto c = t::multipath();
  EXPECT_NEAR(gaussian_mi_closed_form(c.spec, c.params).value, 0.5 * std::log(7.0 / 3.0), 1e-14);
  EXPECT_NEAR(gaussian_mi_closed_form(c.spec, c.params).value, 0.4236, 1e-4);
  const auto blocked = t::multipath(0.0, 0.0);
  EXPECT_NEAR(gaussian_mi_closed_form(blocked.spec, blocked.params).value, 0.5 * std::log(1.5), 1e-14);
  EXPECT_EQ(gaussian_mi_closed_form(c.spec, c.params).method, MiMethod::closed_form);
  EXPECT_EQ(gaussian_mi_closed_form(c.spec, c.params).error, 0.0);
}

TEST(ClosedForm, ZeroInputVariance) {
  const auto c = t::multipath();
  const std::map<std::string, double> zero{{"x", 0.0}};
  EXPECT_NEAR(gaussian_mi_closed_form(c.spec, c.params, &zero).value, 0.0, 1e-15);
}

TEST(ClosedForm, MacConditionalRates) {
  const MacModel mac = gaussian_mac(1.0);
  const ParamStore p = mac.with_powers(1.5, 0.5);
  EXPECT_NEAR(gaussian_cond_mi_closed_form(mac.spec, p, {"x2"}, {"x1", "x2"}).value, 0.5 * std::log(2.5), 1e-14);
  EXPECT_NEAR(gaussian_cond_mi_closed_form(mac.spec, p, {"x1"}, {"x1", "x2"}).value, 0.5 * std::log(1.5), 1e-14);
  const auto [r1, r2] = mac_rates_closed_form(mac, 1.5, 0.5);
  EXPECT_NEAR(r1, 0.5 * std::log(2.5), 1e-14);
  EXPECT_NEAR(r2, 0.5 * std::log(1.5), 1e-14);
}

TEST(ClosedForm, NonlinearRejected) {
  const auto c = t::tanh_channel();
  EXPECT_THROW(gaussian_mi_closed_form(c.spec, c.params), Error);
}

TEST(PathIntegral, ScalarChannelFromZero) {
  const auto c = t::scalar_channel(0.0);
  ParamStore end = c.params;
  end.set("eta", 1.0);
  const auto path = linear_path(c.params, end, 21);
  ASSERT_EQ(path.size(), 21u);
  EXPECT_DOUBLE_EQ(path.front().scalar("eta"), 0.0);
  EXPECT_DOUBLE_EQ(path.back().scalar("eta"), 1.0);
  const auto est = path_integral_mi(path, analytic_source(c.spec, 100000, 1), 0.0);
  EXPECT_EQ(est.method, MiMethod::path_integral);
  EXPECT_NEAR(est.value, kHalfLog2, 0.01 * kHalfLog2);
  EXPECT_GT(est.error, 0.0);
}

TEST(PathIntegral, ZeroLengthPathKeepsReference) {
  const auto c = t::scalar_channel(0.7);
  const auto path = linear_path(c.params, c.params);
  EXPECT_EQ(path_integral_mi(path, analytic_source(c.spec, 1000, 2), 0.123).value, 0.123);
}

TEST(PathIntegral, ThereAndBackReturnsToReference) {
  const auto c = t::multipath(1.0, 0.0);
  ParamStore end = c.params;
  end.set("eta2", 1.0);
  auto path = linear_path(c.params, end, 11);
  auto back = path;
  std::reverse(back.begin(), back.end());
  path.insert(path.end(), back.begin() + 1, back.end());
  const auto est = path_integral_mi(path, analytic_source(c.spec, 20000, 3), 0.5);
  EXPECT_LE(std::abs(est.value - 0.5), 3.0 * est.error);
}

TEST(NoiseGrid, UniformOnTransformedAxis) {
  const auto g = NoiseLevelGrid::uniform_u(64);
  ASSERT_EQ(g.u.size(), 64u);
  EXPECT_EQ(g.t_min(), 0.0);
  for (std::size_t k = 0; k < g.u.size(); ++k) {
    EXPECT_NEAR(g.u[k], g.t[k] / (1.0 + g.t[k]), 1e-12);
    if (k > 0) EXPECT_NEAR(g.u[k] - g.u[k - 1], g.u[1] - g.u[0], 1e-12);
  }
  EXPECT_LT(g.u.back(), 1.0);
  const auto h = NoiseLevelGrid::uniform_u(16, 0.01);
  EXPECT_NEAR(h.t_min(), 0.01, 1e-12);
}

TEST(FisherIntegral, ScalarChannelGivesHalfLog2) {
  const auto c = t::scalar_channel(1.0);
  const auto batch = sample_dag(c.spec, c.params, 100000, 5);
  const auto r = fisher_integral_mi(batch, scalar_family(c), NoiseLevelGrid::uniform_u(64), 6);
  EXPECT_EQ(r.estimate.method, MiMethod::fisher_integral);
  EXPECT_NEAR(r.estimate.value, kHalfLog2, 0.02 * kHalfLog2);
}

TEST(FisherIntegral, IntegrandMatchesFisherInformationGap) {
  // E (s_{Y_t|X} - s_{Y_t})^2 = 1/(1+t) - 1/(2+t); at t = 1 half of it is 1/12
  const auto c = t::scalar_channel(1.0);
  const auto batch = sample_dag(c.spec, c.params, 100000, 7);
  const auto r = fisher_integral_mi(batch, scalar_family(c), NoiseLevelGrid::uniform_u(9), 8);
  for (std::size_t k = 0; k < r.grid.t.size(); ++k) {
    const double tl = r.grid.t[k];
    const double truth = 1.0 / (1.0 + tl) - 1.0 / (2.0 + tl);
    EXPECT_LE(std::abs(r.integrand[k] - truth), 3.0 * r.integrand_se[k] + 1e-12) << "t = " << tl;
  }
  const auto at1 = fisher_integral_mi(batch, scalar_family(c), NoiseLevelGrid{{0.5, 0.6}, {1.0, 1.5}}, 8);
  EXPECT_NEAR(0.5 * at1.integrand[0], 1.0 / 12.0, 3.0 * 0.5 * at1.integrand_se[0]);
}

TEST(FisherIntegral, IndependentOutputGivesZero) {
  const auto c = t::scalar_channel(0.0);
  const auto batch = sample_dag(c.spec, c.params, 20000, 9);
  const auto r = fisher_integral_mi(batch, scalar_family(c), NoiseLevelGrid::uniform_u(64), 10);
  EXPECT_LE(std::abs(r.estimate.value), 3.0 * r.estimate.error + 1e-12);
  EXPECT_FALSE(r.estimate.suspicious());
}

TEST(GaussHermite, IntegratesPolynomials) {
  const auto rule = gauss_hermite(20);
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  EXPECT_NEAR(rule.weights.sum(), sqrt_pi, 1e-12);
  EXPECT_NEAR(rule.weights.dot(rule.nodes), 0.0, 1e-12);
  EXPECT_NEAR(rule.weights.dot(rule.nodes.array().square().matrix()), sqrt_pi / 2.0, 1e-12);
  EXPECT_NEAR(rule.weights.dot(rule.nodes.array().pow(4).matrix()), 3.0 * sqrt_pi / 4.0, 1e-11);
  // exact for x^38 with 20 nodes: Gamma(19.5)
  EXPECT_NEAR(rule.weights.dot(rule.nodes.array().pow(38).matrix()) / std::tgamma(19.5), 1.0, 1e-10);
}

TEST(Quadrature, LinearChannel) {
  const ScalarChannel ch{[](double eta, double x) { return eta * x; }, 1.0, 1.0};
  EXPECT_NEAR(quadrature_mi_scalar(ch, 1.0).value, kHalfLog2, 1e-4);
  EXPECT_NEAR(quadrature_mi_scalar(ch, 0.0).value, 0.0, 1e-6);
  EXPECT_NEAR(quadrature_mi_scalar(ch, 2.0).value, 0.5 * std::log(5.0), 1e-4);
  // d/d eta 0.5 log(1 + eta^2) at eta = 1
  EXPECT_NEAR(finite_diff_mi_gradient(ch, 1.0, 0.01), 0.5, 1e-4);
}

TEST(Quadrature, TanhChannelIsEven) {
  const ScalarChannel ch{[](double eta, double x) { return std::tanh(eta * x); }, 0.25, 1.0};
  for (double eta : {0.3, 1.0, 2.5}) {
    EXPECT_NEAR(quadrature_mi_scalar(ch, eta).value, quadrature_mi_scalar(ch, -eta).value, 1e-6);
  }
  EXPECT_NEAR(quadrature_mi_scalar(ch, 0.0).value, 0.0, 1e-6);
  EXPECT_NEAR(finite_diff_mi_gradient(ch, 0.0, 0.01), 0.0, 1e-6);
}

TEST(Quadrature, DefaultsConvergeOnSteepTanh) {
  const ScalarChannel ch{[](double eta, double x) { return std::tanh(eta * x); }, 0.25, 1.0};
  QuadratureConfig fine;
  fine.order *= 2;
  fine.grid_points = 2 * fine.grid_points - 1;
  for (double eta : {1.0, 3.0}) {
    EXPECT_NEAR(quadrature_mi_scalar(ch, eta).value, quadrature_mi_scalar(ch, eta, fine).value, 1e-5) << eta;
  }
}

TEST(Quadrature, MatchesTrapezoidOverXAndY) {
  // h(Y) - h(Z) with p_Y from a dense trapezoid over x in [-9, 9]
  const double eta = 3.0, s2 = 0.25;
  const int nx = 4001, ny = 3001;
  const double dx = 18.0 / (nx - 1), yl = 6.0, dy = 2.0 * yl / (ny - 1);
  std::vector<double> wx(nx), fx(nx);
  for (int i = 0; i < nx; ++i) {
    const double x = -9.0 + i * dx;
    wx[i] = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi) * dx * ((i == 0 || i == nx - 1) ? 0.5 : 1.0);
    fx[i] = std::tanh(eta * x);
  }
  double h = 0.0;
  for (int j = 0; j < ny; ++j) {
    const double y = -yl + j * dy;
    double p = 0.0;
    for (int i = 0; i < nx; ++i) p += wx[i] * std::exp(-0.5 * (y - fx[i]) * (y - fx[i]) / s2);
    p /= std::sqrt(2.0 * std::numbers::pi * s2);
    if (p > 0.0) h -= p * std::log(p) * dy * ((j == 0 || j == ny - 1) ? 0.5 : 1.0);
  }
  const double brute = h - 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * s2);
  const ScalarChannel ch{[](double e, double x) { return std::tanh(e * x); }, s2, 1.0};
  EXPECT_NEAR(quadrature_mi_scalar(ch, eta).value, brute, 1e-5);
}

TEST(Quadrature, NarrowGridRejected) {
  const ScalarChannel ch{[](double eta, double x) { return eta * x; }, 1.0, 1.0};
  QuadratureConfig cfg;
  cfg.grid_sd = 1.0;
  try {
    quadrature_mi_scalar(ch, 1.0, cfg);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridTooNarrow);
  }
}

TEST(MiEstimate, Suspicious) {
  EXPECT_TRUE((MiEstimate{-1.0, MiMethod::fisher_integral, 0.1}).suspicious());
  EXPECT_FALSE((MiEstimate{-0.2, MiMethod::fisher_integral, 0.1}).suspicious());
}
