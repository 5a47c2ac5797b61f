// SPDX-License-Identifier: Apache-2.0
#include "infograd/mi.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace infograd {

std::string to_string(MiMethod method) {
  switch (method) {
    case MiMethod::closed_form: return "closed_form";
    case MiMethod::path_integral: return "path_integral";
    case MiMethod::fisher_integral: return "fisher_integral";
    case MiMethod::quadrature: return "quadrature";
  }
  return "unknown";
}

namespace {

double log_det_pd(const MatrixXd& m, const char* what) {
  const Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularCovariance, std::string(what) + " is not positive definite");
  }
  const VectorXd d = llt.matrixL().toDenseMatrix().diagonal();
  if ((d.array() <= 0.0).any()) throw Error(ErrorCode::SingularCovariance, std::string(what) + " is singular");
  return 2.0 * d.array().log().sum();
}

}  // namespace

MiEstimate gaussian_mi_closed_form(const DagSpec& spec, const ParamStore& params,
                                   const std::map<std::string, double>* input_variances) {
  const LinearGaussianReduction r = linear_gaussian_reduce(spec, params, input_variances);
  const double value = 0.5 * (log_det_pd(r.output_cov(), "output covariance") -
                               log_det_pd(r.noise_cov(), "effective noise covariance"));
  return {std::max(value, 0.0), MiMethod::closed_form, 0.0};
}

MiEstimate gaussian_cond_mi_closed_form(const DagSpec& spec, const ParamStore& params,
                                        const std::vector<std::string>& given,
                                        const std::vector<std::string>& given_and_target) {
  const LinearGaussianReduction r = linear_gaussian_reduce(spec, params);
  const double value = 0.5 * (log_det_pd(r.condition_on(given).cov, "Cov(Y | given)") -
                              log_det_pd(r.condition_on(given_and_target).cov, "Cov(Y | given, target)"));
  return {std::max(value, 0.0), MiMethod::closed_form, 0.0};
}

// --- path integral ----------------------------------------------------------

std::vector<ParamStore> linear_path(const ParamStore& from, const ParamStore& to, int per_unit) {
  if (per_unit < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 waypoints per unit length");
  const VectorXd a = from.flat();
  const VectorXd b = to.flat();
  if (a.size() != b.size()) throw Error(ErrorCode::DimMismatch, "path end points have different layouts");
  const double length = (b - a).norm();
  const int n = std::max(2, static_cast<int>(std::lround((per_unit - 1) * length)) + 1);
  std::vector<ParamStore> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) / (n - 1);
    out.push_back(from.with_flat((1.0 - s) * a + s * b));
  }
  return out;
}

MiEstimate path_integral_mi(const std::vector<ParamStore>& waypoints, const GradientSource& gradient,
                            double reference_mi) {
  MiEstimate out{reference_mi, MiMethod::path_integral, 0.0};
  if (waypoints.size() < 2) return out;
  std::vector<VectorXd> eta, g, se;
  for (const auto& w : waypoints) {
    const GradientEstimate e = gradient(w);
    eta.push_back(w.flat());
    g.push_back(e.flat());
    se.push_back(e.flat_se());
    if (g.back().size() != eta.back().size()) {
      throw Error(ErrorCode::DimMismatch, "gradient layout differs from the parameter layout");
    }
  }
  double var = 0.0;
  const std::size_t n = waypoints.size();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const VectorXd d = eta[k + 1] - eta[k];
    out.value += 0.5 * (g[k] + g[k + 1]).dot(d);
  }
  for (std::size_t k = 0; k < n; ++k) {
    VectorXd w = VectorXd::Zero(eta[k].size());
    if (k > 0) w += 0.5 * (eta[k] - eta[k - 1]);
    if (k + 1 < n) w += 0.5 * (eta[k + 1] - eta[k]);
    var += (w.array() * se[k].array()).square().sum();
  }
  out.error = std::sqrt(var);
  return out;
}

// --- Fisher integral --------------------------------------------------------

NoiseLevelGrid NoiseLevelGrid::uniform_u(int points, double t_min) {
  if (points < 2) throw Error(ErrorCode::InvalidArgument, "Fisher grid needs at least 2 levels");
  if (!(t_min >= 0.0) || !std::isfinite(t_min)) throw Error(ErrorCode::InvalidArgument, "t_min must be >= 0");
  NoiseLevelGrid grid;
  const double u0 = t_min / (1.0 + t_min);
  for (int k = 0; k < points; ++k) {
    const double u = u0 + (1.0 - u0) * k / points;
    grid.u.push_back(u);
    grid.t.push_back(u / (1.0 - u));
  }
  return grid;
}

FisherIntegral fisher_integral_mi(const SampleBatch& batch, const ScoreFamily& scores, const NoiseLevelGrid& grid,
                                  std::uint64_t seed) {
  const std::size_t m = grid.t.size();
  if (m < 2 || grid.u.size() != m) throw Error(ErrorCode::InvalidArgument, "malformed noise-level grid");
  for (std::size_t k = 0; k < m; ++k) {
    if (!std::isfinite(grid.t[k]) || grid.t[k] < 0.0 || (k > 0 && !(grid.u[k] > grid.u[k - 1]))) {
      throw Error(ErrorCode::InvalidArgument, "noise levels must be finite and strictly increasing");
    }
  }
  const Index b = batch.size();
  if (b == 0) throw Error(ErrorCode::EmptyBatch, "empty batch");
  const MatrixXd fine_cond = batch.stack(scores.fine_nodes);
  const MatrixXd coarse_cond = scores.coarse_nodes.empty() ? MatrixXd() : batch.stack(scores.coarse_nodes);

  // One smoothing draw shared by every level keeps the integrand smooth in t.
  MatrixXd z(batch.y.rows(), b);
  CounterRng(seed, "fisher-smoothing").fill_normal(z, 0);

  FisherIntegral out;
  out.grid = grid;
  std::vector<double> g(m), g_se(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double t = grid.t[k];
    const MatrixXd yt = batch.y + std::sqrt(t) * z;
    const MatrixXd d = score_difference(scores.fine(t), fine_cond, scores.coarse(t), coarse_cond, yt);
    const Eigen::ArrayXd sq = d.colwise().squaredNorm().transpose().array();
    const double mean = sq.mean();
    const double sd = b > 1 ? std::sqrt((sq - mean).square().sum() / (b - 1.0)) : 0.0;
    out.integrand.push_back(mean);
    out.integrand_se.push_back(sd / std::sqrt(static_cast<double>(b)));
    const double jac = (1.0 + t) * (1.0 + t);  // dt/du
    g[k] = mean * jac;
    g_se[k] = out.integrand_se.back() * jac;
  }

  std::vector<double> w(m, 0.0);
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double h = grid.u[k + 1] - grid.u[k];
    integral += 0.5 * h * (g[k] + g[k + 1]);
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }
  {
    const double h = grid.u[m - 1] - grid.u[m - 2];
    const double rest = 1.0 - grid.u[m - 1];
    const double g_end = g[m - 1] + (g[m - 1] - g[m - 2]) * rest / h;
    integral += 0.5 * rest * (g[m - 1] + g_end);
  }
  if (grid.u[0] > 0.0) {
    const double h = grid.u[1] - grid.u[0];
    const double g_start = g[0] - (g[1] - g[0]) * grid.u[0] / h;
    integral += 0.5 * grid.u[0] * (g_start + g[0]);
  }
  double var = 0.0;
  for (std::size_t k = 0; k < m; ++k) var += (w[k] * g_se[k]) * (w[k] * g_se[k]);
  out.estimate = MiEstimate{0.5 * integral, MiMethod::fisher_integral, 0.5 * std::sqrt(var)};
  return out;
}

// --- quadrature -------------------------------------------------------------

GaussHermiteRule gauss_hermite(int order) {
  if (order < 1) throw Error(ErrorCode::InvalidArgument, "quadrature order must be >= 1");
  MatrixXd jacobi = MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(k / 2.0);
  }
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(jacobi);
  GaussHermiteRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = std::sqrt(std::numbers::pi) * eig.eigenvectors().row(0).transpose().array().square().matrix();
  return rule;
}

MiEstimate quadrature_mi_scalar(const ScalarChannel& channel, double eta, const QuadratureConfig& config) {
  if (!(channel.noise_var > 0.0)) throw Error(ErrorCode::InvalidArgument, "noise variance must be positive");
  if (!(channel.input_var >= 0.0)) throw Error(ErrorCode::InvalidArgument, "input variance must be >= 0");
  if (config.grid_points < 3 || !(config.grid_sd > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "y-grid needs >= 3 points and a positive width");
  }
  const GaussHermiteRule rule = gauss_hermite(config.order);
  const double scale = std::sqrt(2.0 * channel.input_var);
  const VectorXd w = rule.weights / std::sqrt(std::numbers::pi);
  VectorXd f(config.order);
  for (int i = 0; i < config.order; ++i) f(i) = channel.f(eta, scale * rule.nodes(i));

  const double mean_f = w.dot(f);
  const double var_f = std::max(0.0, w.dot((f.array() - mean_f).square().matrix()));
  const double sd_y = std::sqrt(var_f + channel.noise_var);
  const double lo = mean_f - config.grid_sd * sd_y;
  const double hi = mean_f + config.grid_sd * sd_y;
  const double sigma = std::sqrt(channel.noise_var);

  double outside = 0.0;
  for (int i = 0; i < config.order; ++i) {
    outside += w(i) * 0.5 * (std::erfc((f(i) - lo) / (sigma * std::sqrt(2.0))) +
                             std::erfc((hi - f(i)) / (sigma * std::sqrt(2.0))));
  }
  if (outside > 1e-6) {
    throw Error(ErrorCode::GridTooNarrow, "y-grid misses " + std::to_string(outside) + " of the output mass");
  }

  const int n = config.grid_points;
  const double dy = (hi - lo) / (n - 1);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  double mass = 0.0;
  double entropy = 0.0;
  for (int j = 0; j < n; ++j) {
    const double y = lo + dy * j;
    const double p = norm * (w.array() * (-(y - f.array()).square() / (2.0 * channel.noise_var)).exp()).sum();
    const double wt = (j == 0 || j == n - 1) ? 0.5 * dy : dy;
    mass += wt * p;
    if (p > 0.0) entropy -= wt * p * std::log(p);
  }
  const double h_z = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * channel.noise_var);
  return {entropy - h_z, MiMethod::quadrature, std::abs(1.0 - mass)};
}

double finite_diff_mi_gradient(const ScalarChannel& channel, double eta, double h, const QuadratureConfig& config) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  return (quadrature_mi_scalar(channel, eta + h, config).value - quadrature_mi_scalar(channel, eta - h, config).value) /
         (2.0 * h);
}

}  // namespace infograd
