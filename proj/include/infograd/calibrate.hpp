// SPDX-License-Identifier: Apache-2.0
//
// Digital-twin calibration: choose the twin's parameter eta so that its
// output score s(y; eta) matches the score learned from unpaired
// observations of the real system, by descending the Fisher divergence
//
//   J(eta) = E_{y ~ real} || s_real(y) - s_twin(y; eta) ||^2.
#pragma once

#include "infograd/graph.hpp"
#include "infograd/neural.hpp"
#include "infograd/scores.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace infograd {

/// Output score of a parameterized model, with its derivative in eta.
class ParametricScore {
 public:
  virtual ~ParametricScore() = default;
  virtual Index eta_dim() const = 0;
  /// s(y; eta), shaped like y.
  virtual MatrixXd value(const MatrixXd& y, const VectorXd& eta) const = 0;
  /// sum_b <v_b, d s(y_b; eta) / d eta>.
  virtual VectorXd eta_vjp(const MatrixXd& y, const VectorXd& eta, const MatrixXd& v) const = 0;
};

/// Network on concat(y, eta); the eta derivative is its input gradient.
class NeuralTwinScore : public ParametricScore {
 public:
  NeuralTwinScore(std::shared_ptr<const ScoreNet> net, Index y_dim, double t_dsm)
      : net_(std::move(net)), y_dim_(y_dim), t_dsm_(t_dsm) {}
  Index eta_dim() const override { return net_->input_dim() - y_dim_; }
  MatrixXd value(const MatrixXd& y, const VectorXd& eta) const override;
  VectorXd eta_vjp(const MatrixXd& y, const VectorXd& eta, const MatrixXd& v) const override;
  double t_dsm() const noexcept { return t_dsm_; }
  const ScoreNet& net() const { return *net_; }

 private:
  ScoreNet::Matrix stack(const MatrixXd& y, const VectorXd& eta) const;
  std::shared_ptr<const ScoreNet> net_;
  Index y_dim_;
  double t_dsm_;
};

/// Closed-form score with a central-difference eta derivative.
class AnalyticTwinScore : public ParametricScore {
 public:
  using Fn = std::function<MatrixXd(const MatrixXd& y, const VectorXd& eta)>;
  AnalyticTwinScore(Fn fn, Index eta_dim, double h = 1e-5) : fn_(std::move(fn)), eta_dim_(eta_dim), h_(h) {}
  Index eta_dim() const override { return eta_dim_; }
  MatrixXd value(const MatrixXd& y, const VectorXd& eta) const override { return fn_(y, eta); }
  VectorXd eta_vjp(const MatrixXd& y, const VectorXd& eta, const MatrixXd& v) const override;

 private:
  Fn fn_;
  Index eta_dim_;
  double h_;
};

struct CalibConfig {
  std::string param_key = "eta";  // twin parameter being calibrated
  double eta_min = 0.0;           // pre-training range, per component
  double eta_max = 3.0;
  Index eta_draws = 512;          // distinct eta values in the twin training pool
  Index samples_per_draw = 256;
  DsmConfig real_dsm;
  DsmConfig twin_dsm;
  bool stein_calibrate_real = true;
  double step_size = 1.0;
  int iterations = 100;
  Index batch_size = 20000;  // real observations per divergence estimate
  VectorXd eta0 = VectorXd::Constant(1, 0.5);
  std::uint64_t seed = 0;

  CalibConfig();
  void validate() const;
};

/// Marginal score of the observations (DSM), Stein-calibrated when scalar.
ScoreFn train_real_score(const MatrixXd& y_real, const DsmConfig& dsm, bool stein_calibrate = true);

/// eta-conditioned twin score: the pool holds eta_draws values of eta drawn
/// uniformly from [eta_min, eta_max], each with samples_per_draw DAG samples.
NeuralTwinScore train_twin_score(const DagSpec& spec, const ParamStore& base, const CalibConfig& config);

struct DivergenceEstimate {
  double value = 0.0;
  double se = 0.0;
  VectorXd eta_gradient;
};

/// Mean of ||s_real(y) - s_twin(y; eta)||^2 over y, with its eta gradient.
DivergenceEstimate fisher_divergence_estimate(const ScoreFn& real, const ParametricScore& twin, const VectorXd& eta,
                                              const MatrixXd& y);

struct CalibStep {
  int iteration = 0;
  VectorXd eta;
  double divergence = 0.0;
  double se = 0.0;
};

struct CalibTrace {
  std::vector<CalibStep> steps;
  VectorXd final_eta;
  double real_scale = 1.0;  // Stein factor of the real score
};

/// Gradient descent on the divergence. Only marginal observations of the real
/// system are read. The trace holds the start and every update.
CalibTrace calibrate_run(const MatrixXd& y_real, const ScoreFn& real, const ParametricScore& twin,
                         const CalibConfig& config);

/// Trains both score models and runs the descent.
CalibTrace calibrate_run(const MatrixXd& y_real, const DagSpec& spec, const ParamStore& base,
                         const CalibConfig& config);

}  // namespace infograd
