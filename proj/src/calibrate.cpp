// SPDX-License-Identifier: Apache-2.0
#include "infograd/calibrate.hpp"

#include <cmath>

namespace infograd {

ScoreNet::Matrix NeuralTwinScore::stack(const MatrixXd& y, const VectorXd& eta) const {
  if (y.rows() != y_dim_ || eta.size() != eta_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "twin score input has the wrong shape");
  }
  ScoreNet::Matrix in(y_dim_ + eta.size(), y.cols());
  in.topRows(y_dim_) = y.cast<float>();
  in.bottomRows(eta.size()) = eta.cast<float>().replicate(1, y.cols());
  return in;
}

MatrixXd NeuralTwinScore::value(const MatrixXd& y, const VectorXd& eta) const {
  return net_->forward(stack(y, eta)).cast<double>();
}

VectorXd NeuralTwinScore::eta_vjp(const MatrixXd& y, const VectorXd& eta, const MatrixXd& v) const {
  ScoreNet::Cache cache;
  net_->forward(stack(y, eta), cache);
  const auto g = net_->backward(cache, v.cast<float>(), true);
  return g.input.bottomRows(eta.size()).cast<double>().rowwise().sum();
}

VectorXd AnalyticTwinScore::eta_vjp(const MatrixXd& y, const VectorXd& eta, const MatrixXd& v) const {
  VectorXd out(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    VectorXd plus = eta, minus = eta;
    plus(i) += h_;
    minus(i) -= h_;
    out(i) = (v.array() * (fn_(y, plus) - fn_(y, minus)).array()).sum() / (2.0 * h_);
  }
  return out;
}

CalibConfig::CalibConfig() {
  real_dsm.steps = 1000;
  twin_dsm.steps = 2000;
}

void CalibConfig::validate() const {
  if (!(eta_max > eta_min)) throw Error(ErrorCode::InvalidArgument, "eta range is empty");
  if (!(step_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
  if (iterations < 0) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 0");
  if (eta_draws < 1 || samples_per_draw < 1 || batch_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "pool and batch sizes must be positive");
  }
  if (eta0.size() == 0 || !eta0.allFinite()) throw Error(ErrorCode::InvalidArgument, "eta0 must be finite");
  real_dsm.validate();
  twin_dsm.validate();
}

ScoreFn train_real_score(const MatrixXd& y_real, const DsmConfig& dsm, bool stein_calibrate) {
  if (y_real.cols() == 0) throw Error(ErrorCode::EmptyDataset, "no real observations");
  auto net = std::make_shared<const ScoreNet>(train_dsm(y_real, nullptr, dsm));
  ScoreFn score = neural_score(net, ScoreKind::marginal, dsm.dsm_noise_var);
  if (!stein_calibrate || y_real.rows() != 1) return score;
  return stein_calibrate_marginal(score, y_real).score;
}

NeuralTwinScore train_twin_score(const DagSpec& spec, const ParamStore& base, const CalibConfig& config) {
  config.validate();
  check_params(spec, base);
  const Index eta_dim = base.at(config.param_key).size();
  const Index per = config.samples_per_draw;
  const Index total = config.eta_draws * per;
  MatrixXd samples(spec.output_dim(), total);
  MatrixXd conditions(eta_dim, total);
  const CounterRng eta_rng(config.seed, "twin-eta");
  const CounterRng dag_rng(config.seed, "twin-pool");
  for (Index d = 0; d < config.eta_draws; ++d) {
    VectorXd eta(eta_dim);
    for (Index k = 0; k < eta_dim; ++k) {
      const double u = eta_rng.uniform(static_cast<std::uint64_t>(d * eta_dim + k));
      eta(k) = config.eta_min + (config.eta_max - config.eta_min) * u;
    }
    ParamStore params = base;
    params.set(config.param_key, eta);
    const SampleBatch b = sample_dag(spec, params, per, dag_rng.bits(static_cast<std::uint64_t>(d)));
    samples.middleCols(d * per, per) = b.y;
    conditions.middleCols(d * per, per) = eta.replicate(1, per);
  }
  auto net = std::make_shared<const ScoreNet>(train_dsm(samples, &conditions, config.twin_dsm));
  return NeuralTwinScore(std::move(net), spec.output_dim(), config.twin_dsm.dsm_noise_var);
}

DivergenceEstimate fisher_divergence_estimate(const ScoreFn& real, const ParametricScore& twin, const VectorXd& eta,
                                              const MatrixXd& y) {
  const Index b = y.cols();
  if (b == 0) throw Error(ErrorCode::EmptyBatch, "no samples for the divergence");
  const MatrixXd d = real(y) - twin.value(y, eta);
  if (!d.allFinite()) throw Error(ErrorCode::NonFiniteScore, "score evaluation produced NaN or Inf");
  const Eigen::ArrayXd sq = d.colwise().squaredNorm().transpose().array();
  DivergenceEstimate out;
  out.value = sq.mean();
  out.se = b > 1 ? std::sqrt((sq - out.value).square().sum() / (b - 1.0) / b) : 0.0;
  out.eta_gradient = twin.eta_vjp(y, eta, (-2.0 / b) * d);
  return out;
}

CalibTrace calibrate_run(const MatrixXd& y_real, const ScoreFn& real, const ParametricScore& twin,
                         const CalibConfig& config) {
  config.validate();
  if (y_real.cols() == 0) throw Error(ErrorCode::EmptyDataset, "no real observations");
  if (config.eta0.size() != twin.eta_dim()) throw Error(ErrorCode::DimMismatch, "eta0 does not match the twin");
  // Fixed subsample: the descent sees one deterministic objective.
  MatrixXd y = y_real;
  if (y_real.cols() > config.batch_size) {
    const CounterRng rng(config.seed, "calib-batch");
    y.resize(y_real.rows(), config.batch_size);
    for (Index b = 0; b < config.batch_size; ++b) {
      y.col(b) = y_real.col(static_cast<Index>(rng.below(b, static_cast<std::uint64_t>(y_real.cols()))));
    }
  }
  CalibTrace trace;
  trace.real_scale = real.scale();
  VectorXd eta = config.eta0;
  for (int it = 0;; ++it) {
    const DivergenceEstimate j = fisher_divergence_estimate(real, twin, eta, y);
    trace.steps.push_back({it, eta, j.value, j.se});
    if (it == config.iterations) break;
    if (!j.eta_gradient.allFinite()) throw Error(ErrorCode::NonFiniteGradient, "divergence gradient is not finite");
    eta -= config.step_size * j.eta_gradient;
  }
  trace.final_eta = eta;
  return trace;
}

CalibTrace calibrate_run(const MatrixXd& y_real, const DagSpec& spec, const ParamStore& base,
                         const CalibConfig& config) {
  config.validate();
  DsmConfig real_dsm = config.real_dsm;
  real_dsm.seed = CounterRng(config.seed, "real-score").bits(0);
  const ScoreFn real = train_real_score(y_real, real_dsm, config.stein_calibrate_real);
  CalibConfig twin_config = config;
  twin_config.twin_dsm.seed = CounterRng(config.seed, "twin-score").bits(0);
  const NeuralTwinScore twin = train_twin_score(spec, base, twin_config);
  return calibrate_run(y_real, real, twin, config);
}

}  // namespace infograd
