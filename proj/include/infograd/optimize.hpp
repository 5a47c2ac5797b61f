// SPDX-License-Identifier: Apache-2.0
//
// Constrained mutual-information maximization: projected gradient ascent
// with analytic or iteratively retrained scores, and weighted-sum-rate
// exploration of a two-user rate region.
#pragma once

#include "infograd/gradient.hpp"
#include "infograd/mi.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

namespace infograd {

// --- projections ------------------------------------------------------------

/// Euclidean projection onto {v : ||v||^2 <= budget}. Vectors already inside
/// (up to one part in 1e12) are returned unchanged, which makes the
/// projection exactly idempotent.
template <typename Derived>
typename Derived::PlainObject project_l2_ball(const Eigen::MatrixBase<Derived>& v, double budget) {
  if (!(budget > 0.0)) throw Error(ErrorCode::InvalidArgument, "l2 budget must be positive");
  const double sq = v.squaredNorm();
  if (sq <= budget * (1.0 + 1e-12)) return v;
  return v * (std::sqrt(budget) / std::sqrt(sq));
}

/// Euclidean projection onto {v : sum(v) = total, v >= 0} (sort-based).
/// Feasible inputs (sum within one part in 1e12) are returned unchanged.
template <typename Derived>
typename Derived::PlainObject project_simplex(const Eigen::MatrixBase<Derived>& v, double total) {
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "simplex total must be positive");
  const Index n = v.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "cannot project an empty vector");
  const typename Derived::PlainObject w = v;
  if ((w.array() >= 0.0).all() && std::abs(w.sum() - total) <= 1e-12 * total) return w;
  std::vector<double> u(w.data(), w.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Index k = 0; k < n; ++k) {
    cumsum += u[k];
    const double candidate = (cumsum - total) / static_cast<double>(k + 1);
    if (u[k] - candidate > 0.0) theta = candidate;
  }
  return (w.array() - theta).cwiseMax(0.0).matrix();
}

// --- convex hull ------------------------------------------------------------

/// Monotone chain. Counterclockwise, starting at the lowest-x (then lowest-y)
/// point; duplicates and collinear points are dropped.
std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> points);

/// Distance from p to the hull polygon's boundary.
double distance_to_hull_boundary(const std::vector<Eigen::Vector2d>& hull, const Eigen::Vector2d& p);

// --- projected gradient ascent ----------------------------------------------

enum class ConstraintKind { none, l2_ball };
enum class ScoreMode { analytic, learned };
std::string to_string(ConstraintKind kind);
std::string to_string(ScoreMode mode);
ConstraintKind constraint_kind_from_string(const std::string& name);
ScoreMode score_mode_from_string(const std::string& name);

struct PgaConfig {
  double step_size = 0.1;
  int iterations = 35;
  ConstraintKind constraint = ConstraintKind::l2_ball;
  double budget = 1.0;
  ScoreMode score_mode = ScoreMode::analytic;
  int initial_dsm_steps = 1000;
  int refresh_dsm_steps = 200;
  Index samples = 100000;        // Monte-Carlo samples per gradient
  Index chunk = 8192;
  Index train_samples = 100000;  // fresh DAG draws per score refresh
  int mean_replicates = 16;      // E[Y|X] replicates for nonlinear DAGs
  DsmConfig dsm;
  std::uint64_t seed = 0;
  int restarts = 1;

  void validate() const;
};

struct PgaStep {
  int iteration = 0;
  VectorXd params;  // flat, post-projection
  double mi = 0.0;
  double grad_norm = 0.0;  // of the gradient taken from this iterate (NaN on the last)
  double scale_marginal = 1.0;
  double scale_conditional = 1.0;
};

struct PgaTrace {
  std::vector<PgaStep> steps;
  ParamStore final_params;
  double final_mi = 0.0;
  int round = 0;                     // restart that produced this trace
  std::vector<double> round_final_mi;
  bool aborted = false;
  std::string abort_reason;
};

using MiEvaluator = std::function<double(const ParamStore&)>;

/// Gradient of I(X; Y) at the current iterate.
class PgaGradientSource {
 public:
  virtual ~PgaGradientSource() = default;
  virtual GradientEstimate estimate(const ParamStore& params, int iteration) = 0;
  /// Stein factors applied at the last estimate (1 when not calibrated).
  virtual double marginal_scale() const { return 1.0; }
  virtual double conditional_scale() const { return 1.0; }
  /// Called before each restart.
  virtual void reset() {}
};

/// Exact Gaussian scores from the linear reduction at each iterate.
class AnalyticGradientSource : public PgaGradientSource {
 public:
  AnalyticGradientSource(DagSpec spec, Index samples, Index chunk, std::uint64_t seed)
      : spec_(std::move(spec)), samples_(samples), chunk_(chunk), seed_(seed) {}
  GradientEstimate estimate(const ParamStore& params, int iteration) override;
  void reset() override { ++round_; }

 private:
  DagSpec spec_;
  Index samples_, chunk_;
  std::uint64_t seed_;
  int round_ = -1;
};

/// DSM networks for s_Y and s_{Y|X}, trained from scratch on the first
/// iteration and warm-started afterwards, with Stein calibration of both.
class LearnedGradientSource : public PgaGradientSource {
 public:
  LearnedGradientSource(DagSpec spec, PgaConfig config) : spec_(std::move(spec)), config_(std::move(config)) {}
  GradientEstimate estimate(const ParamStore& params, int iteration) override;
  double marginal_scale() const override { return scale_marginal_; }
  double conditional_scale() const override { return scale_conditional_; }
  void reset() override;

 private:
  DagSpec spec_;
  PgaConfig config_;
  std::shared_ptr<const ScoreNet> marginal_, conditional_;
  double scale_marginal_ = 1.0, scale_conditional_ = 1.0;
  int round_ = 0;
};

/// Projected gradient ascent eta <- P(eta + step * grad). The trace holds
/// T + 1 iterates (the projected start and every update). With restarts > 1
/// later rounds start from random points on the constraint boundary and the
/// round with the highest final MI is returned.
PgaTrace pga_run(const DagSpec& spec, const ParamStore& init, const PgaConfig& config, PgaGradientSource& source,
                 const MiEvaluator& mi);

/// Builds the gradient source from config.score_mode.
PgaTrace pga_run(const DagSpec& spec, const ParamStore& init, const PgaConfig& config, const MiEvaluator& mi);

// --- two-user rate region ---------------------------------------------------

/// Two-user DAG with power parameters: user i's signal is sqrt(P_i) * Xt_i,
/// and the rates are R1 = I(X1; Y | X2), R2 = I(X2; Y | X1).
struct MacModel {
  DagSpec spec;
  ParamStore params;  // power entries are overwritten during exploration
  std::string power_key1 = "p1";
  std::string power_key2 = "p2";
  std::vector<std::string> user1_nodes{"xt1"};  // conditioning values of user 1
  std::vector<std::string> user2_nodes{"xt2"};

  ParamStore with_powers(double p1, double p2) const;
};

/// Y = sqrt(P1) Xt1 + sqrt(P2) Xt2 + Z with unit-variance Xt_i, Z ~ N(0, noise_var).
MacModel gaussian_mac(double noise_var = 1.0);

struct RateRegionConfig {
  double total_power = 2.0;
  int weights = 10;  // L: lambda = l / L for l = 0..L
  double step_size = 2.0;
  int max_iterations = 300;
  double tolerance = 1e-4;  // stop when the window drift ||theta_k - theta_{k-W}|| / (W step) < tolerance
  Index samples = 100000;
  Index chunk = 8192;
  int average_tail = 100;     // W: trailing iterates averaged into the optimum
  double power_floor = 0.05;  // gradients are taken at max(P_i, power_floor)
  ScoreMode score_mode = ScoreMode::analytic;
  DsmConfig dsm;
  int initial_dsm_steps = 1000;
  int refresh_dsm_steps = 200;
  Index train_samples = 50000;
  int fisher_points = 64;
  Index fisher_samples = 20000;
  int fisher_dsm_steps = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RatePoint {
  double lambda = 0.0;
  double p1 = 0.0, p2 = 0.0;
  double r1 = 0.0, r2 = 0.0;
  double r1_error = 0.0, r2_error = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct RateRegionResult {
  std::vector<RatePoint> points;             // one per lambda
  std::vector<Eigen::Vector2d> corners;      // (R1max, 0), (0, R2max), origin
  std::vector<Eigen::Vector2d> hull;         // counterclockwise
};

/// Rate pair at a power split: closed form for linear models.
std::pair<double, double> mac_rates_closed_form(const MacModel& mac, double p1, double p2);

/// Maximizes lambda R1 + (1 - lambda) R2 over {P1 + P2 = P, P_i >= 0}.
RatePoint maximize_weighted_rate(const MacModel& mac, double lambda, const RateRegionConfig& config);

RateRegionResult rate_region_explore(const MacModel& mac, const RateRegionConfig& config);

}  // namespace infograd
