// SPDX-License-Identifier: Apache-2.0
//
// Mutual-information values: closed forms for linear Gaussian DAGs, line
// integrals of the information gradient, the Fisher-information integral
// over Gaussian smoothing levels, and a quadrature reference for scalar
// nonlinear channels.
#pragma once

#include "infograd/gradient.hpp"
#include "infograd/scores.hpp"

#include <functional>
#include <string>
#include <vector>

namespace infograd {

enum class MiMethod { closed_form, path_integral, fisher_integral, quadrature };
std::string to_string(MiMethod method);

struct MiEstimate {
  double value = 0.0;  // nats
  MiMethod method = MiMethod::closed_form;
  /// Quadrature residual or Monte-Carlo standard error; 0 when exact.
  double error = 0.0;

  /// True when the value is below zero by more than three error units.
  bool suspicious() const { return value < -3.0 * error; }
};

/// 0.5 * log(det v_Y / det sigma_N^2).
MiEstimate gaussian_mi_closed_form(const DagSpec& spec, const ParamStore& params,
                                   const std::map<std::string, double>* input_variances = nullptr);

/// I(X_S; Y | X_T) = 0.5 * log(det Cov(Y | X_T) / det Cov(Y | X_S, X_T)).
MiEstimate gaussian_cond_mi_closed_form(const DagSpec& spec, const ParamStore& params,
                                        const std::vector<std::string>& given,
                                        const std::vector<std::string>& given_and_target);

// --- path integral ----------------------------------------------------------

using GradientSource = std::function<GradientEstimate(const ParamStore&)>;

/// Straight line from `from` to `to` with `per_unit` waypoints per unit of
/// Euclidean length (at least two).
std::vector<ParamStore> linear_path(const ParamStore& from, const ParamStore& to, int per_unit = 21);

/// I(end) = I(start) + trapezoid sum of <grad I, d eta> over the waypoints.
MiEstimate path_integral_mi(const std::vector<ParamStore>& waypoints, const GradientSource& gradient,
                            double reference_mi);

// --- Fisher integral --------------------------------------------------------

/// Smoothing levels t_k of Y_t = Y + sqrt(t) Z' on the transformed axis
/// u = t / (1 + t): u runs uniformly from u(t_min) towards 1.
struct NoiseLevelGrid {
  std::vector<double> u;
  std::vector<double> t;
  std::string transform = "u=t/(1+t)";

  static NoiseLevelGrid uniform_u(int points = 64, double t_min = 0.0);
  double t_min() const { return t.front(); }
};

/// Score pair at a smoothing level: the difference fine - coarse is squared.
/// For I(X; Y) coarse is the marginal score; for I(X1; Y | X2) it is the
/// score given X2. Conditioning values come from the listed nodes.
struct ScoreFamily {
  std::function<ScoreFn(double t)> fine;
  std::function<ScoreFn(double t)> coarse;
  std::vector<std::string> fine_nodes;
  std::vector<std::string> coarse_nodes;
};

struct FisherIntegral {
  MiEstimate estimate;
  NoiseLevelGrid grid;
  std::vector<double> integrand;     // E||s_fine - s_coarse||^2 at each t
  std::vector<double> integrand_se;
};

/// 0.5 * int_0^inf E||s_{Y_t|fine} - s_{Y_t|coarse}||^2 dt on the u axis.
/// The panel past the last grid point is closed by linear extrapolation to
/// u = 1, and [0, t_min] likewise when t_min > 0.
FisherIntegral fisher_integral_mi(const SampleBatch& batch, const ScoreFamily& scores, const NoiseLevelGrid& grid,
                                  std::uint64_t seed);

// --- quadrature reference ---------------------------------------------------

/// Scalar channel Y = f(eta, X) + Z with X ~ N(0, input_var), Z ~ N(0, noise_var).
struct ScalarChannel {
  std::function<double(double eta, double x)> f;
  double noise_var = 1.0;
  double input_var = 1.0;
};

struct QuadratureConfig {
  int order = 512;         // Gauss-Hermite nodes over x
  int grid_points = 2001;  // uniform y-grid
  double grid_sd = 8.0;    // half-width in output standard deviations
};

/// Nodes and weights for int e^{-x^2} g(x) dx (Golub-Welsch).
struct GaussHermiteRule {
  VectorXd nodes;
  VectorXd weights;
};
GaussHermiteRule gauss_hermite(int order);

/// I = h(Y) - 0.5 log(2 pi e noise_var), with p_Y by Gauss-Hermite over x and
/// h(Y) by the trapezoid rule. Throws GridTooNarrow if more than 1e-6 of the
/// mass falls outside the y-grid.
MiEstimate quadrature_mi_scalar(const ScalarChannel& channel, double eta, const QuadratureConfig& config = {});

/// (I(eta + h) - I(eta - h)) / (2h).
double finite_diff_mi_gradient(const ScalarChannel& channel, double eta, double h,
                               const QuadratureConfig& config = {});

}  // namespace infograd
