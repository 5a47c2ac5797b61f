// SPDX-License-Identifier: Apache-2.0
#include "infograd/optimize.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace infograd {

// --- convex hull ------------------------------------------------------------

namespace {

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

double segment_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

}  // namespace

std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> points) {
  if (points.empty()) throw Error(ErrorCode::InvalidArgument, "convex hull of no points");
  auto less = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  };
  std::sort(points.begin(), points.end(), less);
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;

  std::vector<Eigen::Vector2d> hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

double distance_to_hull_boundary(const std::vector<Eigen::Vector2d>& hull, const Eigen::Vector2d& p) {
  if (hull.empty()) throw Error(ErrorCode::InvalidArgument, "empty hull");
  if (hull.size() == 1) return (p - hull[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    best = std::min(best, segment_distance(hull[i], hull[(i + 1) % hull.size()], p));
  }
  return best;
}

// --- enums ------------------------------------------------------------------

std::string to_string(ConstraintKind kind) { return kind == ConstraintKind::l2_ball ? "l2_ball" : "none"; }
std::string to_string(ScoreMode mode) { return mode == ScoreMode::learned ? "learned" : "analytic"; }

ConstraintKind constraint_kind_from_string(const std::string& name) {
  if (name == "l2_ball") return ConstraintKind::l2_ball;
  if (name == "none") return ConstraintKind::none;
  throw Error(ErrorCode::ConfigParse, "unknown constraint '" + name + "'");
}

ScoreMode score_mode_from_string(const std::string& name) {
  if (name == "analytic") return ScoreMode::analytic;
  if (name == "learned") return ScoreMode::learned;
  throw Error(ErrorCode::ConfigParse, "unknown score mode '" + name + "'");
}

// --- PGA --------------------------------------------------------------------

void PgaConfig::validate() const {
  if (!(step_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
  if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 1");
  if (constraint == ConstraintKind::l2_ball && !(budget > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "l2 budget must be positive");
  }
  if (restarts < 1) throw Error(ErrorCode::InvalidArgument, "restarts must be >= 1");
  if (samples < 1 || chunk < 1 || train_samples < 1) {
    throw Error(ErrorCode::InvalidArgument, "sample counts must be positive");
  }
  if (initial_dsm_steps < 1 || refresh_dsm_steps < 0) throw Error(ErrorCode::InvalidArgument, "bad DSM step counts");
  if (mean_replicates < 1) throw Error(ErrorCode::InvalidArgument, "mean_replicates must be >= 1");
  dsm.validate();
}

namespace {

std::uint64_t derived_seed(std::uint64_t seed, std::string_view purpose, int round, int iteration) {
  return CounterRng(seed, purpose).split(static_cast<std::uint64_t>(round)).bits(static_cast<std::uint64_t>(iteration));
}

VectorXd project(const VectorXd& v, const PgaConfig& config) {
  return config.constraint == ConstraintKind::l2_ball ? project_l2_ball(v, config.budget) : v;
}

}  // namespace

GradientEstimate AnalyticGradientSource::estimate(const ParamStore& params, int iteration) {
  const LinearGaussianReduction r = linear_gaussian_reduce(spec_, params);
  const ScoreFn marginal = analytic_marginal_score(r);
  const ScoreFn conditional = analytic_conditional_score(r, spec_.input_ids);
  return info_gradient_mc(spec_, params, marginal, conditional, samples_,
                          derived_seed(seed_, "pga-gradient", std::max(round_, 0), iteration), chunk_);
}

void LearnedGradientSource::reset() {
  marginal_.reset();
  conditional_.reset();
  scale_marginal_ = scale_conditional_ = 1.0;
  ++round_;
}

GradientEstimate LearnedGradientSource::estimate(const ParamStore& params, int iteration) {
  const SampleBatch train = sample_dag(spec_, params, config_.train_samples,
                                       derived_seed(config_.seed, "pga-train", round_, iteration));
  DsmConfig dsm = config_.dsm;
  dsm.steps = marginal_ ? config_.refresh_dsm_steps : config_.initial_dsm_steps;
  dsm.seed = derived_seed(config_.seed, "pga-dsm", round_, iteration);
  if (dsm.steps > 0 || !marginal_) {
    marginal_ = std::make_shared<const ScoreNet>(train_dsm(train.y, nullptr, dsm, marginal_.get()));
    dsm.seed ^= 0x5bd1e995u;
    conditional_ = std::make_shared<const ScoreNet>(train_dsm(train.y, &train.x, dsm, conditional_.get()));
  }
  const double t = config_.dsm.dsm_noise_var;
  ScoreFn marginal = neural_score(marginal_, ScoreKind::marginal, t);
  ScoreFn conditional = neural_score(conditional_, ScoreKind::conditional_on_x, t);

  const SteinCalibration cm = stein_calibrate_marginal(marginal, train.y);
  MatrixXd cond_mean;
  try {
    cond_mean = conditional_mean_linear(linear_gaussian_reduce(spec_, params), spec_.input_ids, train.x);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonlinearNode) throw;
    cond_mean = conditional_mean_replicates(spec_, params, train.x, conditional, spec_.input_ids, t,
                                            config_.mean_replicates,
                                            derived_seed(config_.seed, "pga-replicates", round_, iteration));
  }
  const SteinCalibration cc = stein_calibrate_conditional(conditional, train.y, train.x, cond_mean);
  scale_marginal_ = cm.scale;
  scale_conditional_ = cc.scale;
  return info_gradient_mc(spec_, params, cm.score, cc.score, config_.samples,
                          derived_seed(config_.seed, "pga-gradient", round_, iteration), config_.chunk);
}

PgaTrace pga_run(const DagSpec& spec, const ParamStore& init, const PgaConfig& config, PgaGradientSource& source,
                 const MiEvaluator& mi) {
  config.validate();
  check_params(spec, init);
  PgaTrace best;
  bool have_best = false;
  std::vector<double> finals;
  for (int round = 0; round < config.restarts; ++round) {
    source.reset();
    VectorXd eta = init.flat();
    if (round > 0) {
      CounterRng(config.seed, "pga-restart").split(static_cast<std::uint64_t>(round)).fill_normal(eta, 0);
      if (config.constraint == ConstraintKind::l2_ball) eta *= std::sqrt(config.budget) / eta.norm();
    }
    eta = project(eta, config);

    PgaTrace trace;
    trace.round = round;
    for (int it = 0;; ++it) {
      const ParamStore params = init.with_flat(eta);
      PgaStep step;
      step.iteration = it;
      step.params = eta;
      step.mi = mi(params);
      if (it == config.iterations) {
        step.grad_norm = std::numeric_limits<double>::quiet_NaN();
        step.scale_marginal = source.marginal_scale();
        step.scale_conditional = source.conditional_scale();
        trace.steps.push_back(step);
        break;
      }
      VectorXd g;
      try {
        g = source.estimate(params, it).flat();
        if (!g.allFinite()) throw Error(ErrorCode::NonFiniteGradient, "gradient estimate is not finite");
        if (g.size() != eta.size()) throw Error(ErrorCode::DimMismatch, "gradient layout differs from params");
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFiniteGradient && e.code() != ErrorCode::NonFiniteScore &&
            e.code() != ErrorCode::NonFiniteLoss) {
          throw;
        }
        step.grad_norm = std::numeric_limits<double>::quiet_NaN();
        trace.steps.push_back(step);
        trace.aborted = true;
        trace.abort_reason = e.what();
        break;
      }
      step.grad_norm = g.norm();
      step.scale_marginal = source.marginal_scale();
      step.scale_conditional = source.conditional_scale();
      trace.steps.push_back(step);
      eta = project(eta + config.step_size * g, config);
    }
    trace.final_params = init.with_flat(trace.steps.back().params);
    trace.final_mi = trace.steps.back().mi;
    finals.push_back(trace.final_mi);
    if (!have_best || trace.final_mi > best.final_mi) {
      best = std::move(trace);
      have_best = true;
    }
  }
  best.round_final_mi = std::move(finals);
  return best;
}

PgaTrace pga_run(const DagSpec& spec, const ParamStore& init, const PgaConfig& config, const MiEvaluator& mi) {
  if (config.score_mode == ScoreMode::analytic) {
    AnalyticGradientSource source(spec, config.samples, config.chunk, config.seed);
    return pga_run(spec, init, config, source, mi);
  }
  LearnedGradientSource source(spec, config);
  return pga_run(spec, init, config, source, mi);
}

// --- rate region ------------------------------------------------------------

ParamStore MacModel::with_powers(double p1, double p2) const {
  ParamStore out = params;
  out.set(power_key1, p1);
  out.set(power_key2, p2);
  return out;
}

MacModel gaussian_mac(double noise_var) {
  if (!(noise_var > 0.0)) throw Error(ErrorCode::InvalidArgument, "noise variance must be positive");
  MacModel mac;
  auto node = [](std::string id, std::vector<std::string> parents, FuncKind func) {
    NodeSpec n;
    n.id = std::move(id);
    n.parents = std::move(parents);
    n.func = func;
    return n;
  };
  NodeSpec xt1 = node("xt1", {}, FuncKind::input);
  NodeSpec xt2 = node("xt2", {}, FuncKind::input);
  NodeSpec x1 = node("x1", {"xt1"}, FuncKind::sqrt_gain);
  x1.param_key = "p1";
  NodeSpec x2 = node("x2", {"xt2"}, FuncKind::sqrt_gain);
  x2.param_key = "p2";
  NodeSpec y = node("y", {"x1", "x2"}, FuncKind::weighted_sum);
  y.noise_std = std::sqrt(noise_var);
  mac.spec.nodes = {xt1, xt2, x1, x2, y};
  mac.spec.input_ids = {"xt1", "xt2"};
  mac.spec.output_ids = {"y"};
  mac.params.set("p1", 1.0);
  mac.params.set("p2", 1.0);
  validate(mac.spec);
  return mac;
}

void RateRegionConfig::validate() const {
  if (!(total_power > 0.0)) throw Error(ErrorCode::InvalidArgument, "total power must be positive");
  if (weights < 1) throw Error(ErrorCode::InvalidArgument, "need at least one weight step");
  if (!(step_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  if (samples < 1 || chunk < 1) throw Error(ErrorCode::InvalidArgument, "sample counts must be positive");
  if (average_tail < 1) throw Error(ErrorCode::InvalidArgument, "average_tail must be >= 1");
  if (!(power_floor > 0.0)) throw Error(ErrorCode::InvalidArgument, "power floor must be positive");
  if (fisher_points < 2) throw Error(ErrorCode::InvalidArgument, "fisher_points must be >= 2");
  dsm.validate();
}

std::pair<double, double> mac_rates_closed_form(const MacModel& mac, double p1, double p2) {
  const ParamStore params = mac.with_powers(p1, p2);
  std::vector<std::string> both = mac.user1_nodes;
  both.insert(both.end(), mac.user2_nodes.begin(), mac.user2_nodes.end());
  const double r1 = gaussian_cond_mi_closed_form(mac.spec, params, mac.user2_nodes, both).value;
  const double r2 = gaussian_cond_mi_closed_form(mac.spec, params, mac.user1_nodes, both).value;
  return {r1, r2};
}

namespace {

std::vector<std::string> joint_nodes(const MacModel& mac) {
  std::vector<std::string> both = mac.user1_nodes;
  both.insert(both.end(), mac.user2_nodes.begin(), mac.user2_nodes.end());
  return both;
}

struct MacScores {
  ScoreFn joint;  // s_{Y | X1, X2}
  ScoreFn given2;  // s_{Y | X2}
  ScoreFn given1;  // s_{Y | X1}
};

MacScores analytic_mac_scores(const MacModel& mac, const ParamStore& params) {
  const LinearGaussianReduction r = linear_gaussian_reduce(mac.spec, params);
  return {analytic_conditional_score(r, joint_nodes(mac), ScoreKind::conditional_on_x1x2),
          analytic_conditional_score(r, mac.user2_nodes, ScoreKind::conditional_on_x),
          analytic_conditional_score(r, mac.user1_nodes, ScoreKind::conditional_on_x)};
}

/// Iteratively refreshed DSM networks for the three conditional scores.
class LearnedMacScores {
 public:
  LearnedMacScores(const MacModel& mac, const RateRegionConfig& config) : mac_(mac), config_(config) {}

  MacScores refresh(const ParamStore& params, std::uint64_t seed) {
    const SampleBatch train = sample_dag(mac_.spec, params, config_.train_samples, seed);
    DsmConfig dsm = config_.dsm;
    dsm.steps = joint_ ? config_.refresh_dsm_steps : config_.initial_dsm_steps;
    const auto both = joint_nodes(mac_);
    const MatrixXd c12 = train.stack(both);
    const MatrixXd c2 = train.stack(mac_.user2_nodes);
    const MatrixXd c1 = train.stack(mac_.user1_nodes);
    if (dsm.steps > 0 || !joint_) {
      dsm.seed = CounterRng(seed, "joint").bits(0);
      joint_ = std::make_shared<const ScoreNet>(train_dsm(train.y, &c12, dsm, joint_.get()));
      dsm.seed = CounterRng(seed, "given2").bits(0);
      given2_ = std::make_shared<const ScoreNet>(train_dsm(train.y, &c2, dsm, given2_.get()));
      dsm.seed = CounterRng(seed, "given1").bits(0);
      given1_ = std::make_shared<const ScoreNet>(train_dsm(train.y, &c1, dsm, given1_.get()));
    }
    const double t = config_.dsm.dsm_noise_var;
    MacScores s{neural_score(joint_, ScoreKind::conditional_on_x1x2, t),
                neural_score(given2_, ScoreKind::conditional_on_x, t),
                neural_score(given1_, ScoreKind::conditional_on_x, t)};
    // Conditional Stein calibration with exact conditional means (the model is linear).
    try {
      const LinearGaussianReduction r = linear_gaussian_reduce(mac_.spec, params);
      s.joint = stein_calibrate_conditional(s.joint, train.y, c12, conditional_mean_linear(r, both, c12)).score;
      s.given2 = stein_calibrate_conditional(s.given2, train.y, c2,
                                             conditional_mean_linear(r, mac_.user2_nodes, c2)).score;
      s.given1 = stein_calibrate_conditional(s.given1, train.y, c1,
                                             conditional_mean_linear(r, mac_.user1_nodes, c1)).score;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonlinearNode) throw;
      std::cerr << "warning: nonlinear two-user model; conditional scores left uncalibrated\n";
    }
    return s;
  }

 private:
  const MacModel& mac_;
  const RateRegionConfig& config_;
  std::shared_ptr<const ScoreNet> joint_, given2_, given1_;
};

std::pair<MiEstimate, MiEstimate> mac_rates_fisher(const MacModel& mac, const ParamStore& params,
                                                   const RateRegionConfig& config, std::uint64_t seed) {
  const SampleBatch train = sample_dag(mac.spec, params, config.train_samples, CounterRng(seed, "train").bits(0));
  const auto both = joint_nodes(mac);
  const MatrixXd c12 = train.stack(both);
  const MatrixXd c2 = train.stack(mac.user2_nodes);
  const MatrixXd c1 = train.stack(mac.user1_nodes);
  DsmConfig dsm = config.dsm;
  dsm.steps = config.fisher_dsm_steps;
  const double t_min = config.dsm.dsm_noise_var;
  const NoiseLevelGrid grid = NoiseLevelGrid::uniform_u(config.fisher_points, t_min);
  const double t_max = grid.t.back() * 1.05;
  dsm.seed = CounterRng(seed, "ncs-joint").bits(0);
  const NoiseConditionalScore joint = train_noise_conditional_score(train.y, &c12, t_min, t_max, dsm);
  dsm.seed = CounterRng(seed, "ncs-given2").bits(0);
  const NoiseConditionalScore given2 = train_noise_conditional_score(train.y, &c2, t_min, t_max, dsm);
  dsm.seed = CounterRng(seed, "ncs-given1").bits(0);
  const NoiseConditionalScore given1 = train_noise_conditional_score(train.y, &c1, t_min, t_max, dsm);

  const SampleBatch eval = sample_dag(mac.spec, params, config.fisher_samples, CounterRng(seed, "eval").bits(0));
  ScoreFamily f1{[&](double t) { return joint.at(t, ScoreKind::conditional_on_x1x2); },
                 [&](double t) { return given2.at(t, ScoreKind::conditional_on_x); }, both, mac.user2_nodes};
  ScoreFamily f2{[&](double t) { return joint.at(t, ScoreKind::conditional_on_x1x2); },
                 [&](double t) { return given1.at(t, ScoreKind::conditional_on_x); }, both, mac.user1_nodes};
  const auto r1 = fisher_integral_mi(eval, f1, grid, CounterRng(seed, "fisher1").bits(0)).estimate;
  const auto r2 = fisher_integral_mi(eval, f2, grid, CounterRng(seed, "fisher2").bits(0)).estimate;
  return {r1, r2};
}

}  // namespace

RatePoint maximize_weighted_rate(const MacModel& mac, double lambda, const RateRegionConfig& config) {
  config.validate();
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidArgument, "lambda must lie in [0, 1]");
  const auto both = joint_nodes(mac);
  const CounterRng lambda_rng = CounterRng(config.seed, "rate-region").split(static_cast<std::uint64_t>(
      std::llround(lambda * 1e9)));
  std::unique_ptr<LearnedMacScores> learned;
  if (config.score_mode == ScoreMode::learned) learned = std::make_unique<LearnedMacScores>(mac, config);

  Eigen::Vector2d theta(config.total_power / 2.0, config.total_power / 2.0);
  std::vector<Eigen::Vector2d> history{theta};
  RatePoint point;
  point.lambda = lambda;
  for (int it = 0; it < config.max_iterations; ++it) {
    const ParamStore params = mac.with_powers(std::max(theta(0), config.power_floor),
                                              std::max(theta(1), config.power_floor));
    const MacScores s = learned ? learned->refresh(params, lambda_rng.split("train").bits(it))
                                : analytic_mac_scores(mac, params);
    const GradientEstimate g = monte_carlo_gradient(
        mac.spec, params, config.samples, config.chunk, lambda_rng.split("gradient").bits(it),
        [&](const SampleBatch& b) -> MatrixXd {
          const MatrixXd joint = s.joint(b.y, b.stack(both));
          MatrixXd v = lambda * (joint - s.given2(b.y, b.stack(mac.user2_nodes)));
          v += (1.0 - lambda) * (joint - s.given1(b.y, b.stack(mac.user1_nodes)));
          return v;
        });
    const Eigen::Vector2d grad(g[mac.power_key1](0), g[mac.power_key2](0));
    if (!grad.allFinite()) throw Error(ErrorCode::NonFiniteGradient, "weighted-rate gradient is not finite");
    const Eigen::Vector2d next = project_simplex(theta + config.step_size * grad, config.total_power);
    theta = next;
    history.push_back(theta);
    point.iterations = it + 1;
    // Stationary in mean: net drift over the averaging window below tolerance.
    const auto w = static_cast<std::size_t>(config.average_tail);
    if (history.size() > w) {
      const double drift = (theta - history[history.size() - 1 - w]).norm() / (config.step_size * w);
      if (drift < config.tolerance) {
        point.converged = true;
        break;
      }
    }
  }
  // Polyak average of the trailing iterates. Iterates stuck on a face of the
  // simplex are bit-identical, so clamped optima come out exact.
  const std::size_t tail = std::min<std::size_t>(config.average_tail, history.size());
  double p1 = 0.0;
  for (std::size_t k = history.size() - tail; k < history.size(); ++k) p1 += history[k](0);
  p1 /= static_cast<double>(tail);
  if (std::all_of(history.end() - static_cast<std::ptrdiff_t>(tail), history.end(),
                  [&](const Eigen::Vector2d& h) { return h(0) == history.back()(0); })) {
    p1 = history.back()(0);
  }
  const Eigen::Vector2d opt(p1, config.total_power - p1);
  point.p1 = opt(0);
  point.p2 = opt(1);
  if (config.score_mode == ScoreMode::analytic) {
    std::tie(point.r1, point.r2) = mac_rates_closed_form(mac, point.p1, point.p2);
  } else {
    const auto [r1, r2] = mac_rates_fisher(mac, mac.with_powers(point.p1, point.p2), config,
                                           lambda_rng.split("fisher").bits(0));
    point.r1 = r1.value;
    point.r2 = r2.value;
    point.r1_error = r1.error;
    point.r2_error = r2.error;
  }
  return point;
}

RateRegionResult rate_region_explore(const MacModel& mac, const RateRegionConfig& config) {
  config.validate();
  RateRegionResult out;
  std::vector<Eigen::Vector2d> all;
  for (int l = 0; l <= config.weights; ++l) {
    const double lambda = static_cast<double>(l) / config.weights;
    out.points.push_back(maximize_weighted_rate(mac, lambda, config));
    all.emplace_back(out.points.back().r1, out.points.back().r2);
  }
  const auto [r1_max, r2_zero] = mac_rates_closed_form(mac, config.total_power, 0.0);
  const auto [r1_zero, r2_max] = mac_rates_closed_form(mac, 0.0, config.total_power);
  out.corners = {Eigen::Vector2d(r1_max, r2_zero), Eigen::Vector2d(r1_zero, r2_max), Eigen::Vector2d::Zero()};
  all.insert(all.end(), out.corners.begin(), out.corners.end());
  out.hull = convex_hull_2d(all);
  return out;
}

}  // namespace infograd
