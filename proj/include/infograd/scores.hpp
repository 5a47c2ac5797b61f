// SPDX-License-Identifier: Apache-2.0
//
// Score functions s(y) = grad_y log p(y) and s(y | c) behind one interface,
// with analytic Gaussian, neural (DSM-trained) and Stein-calibrated providers.
#pragma once

#include "infograd/graph.hpp"
#include "infograd/neural.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace infograd {

enum class ScoreKind { marginal, conditional_on_x, conditional_on_x1x2 };
enum class ScoreProvider { analytic_gaussian, neural, calibrated };

std::string to_string(ScoreKind kind);
std::string to_string(ScoreProvider provider);

class ScoreFn {
 public:
  /// y is (d x B); cond is (d_c x B), empty for marginal scores.
  using EvalFn = std::function<MatrixXd(const MatrixXd& y, const MatrixXd& cond)>;

  ScoreFn(ScoreKind kind, ScoreProvider provider, EvalFn fn, double t_dsm = 0.0)
      : kind_(kind), provider_(provider), fn_(std::move(fn)), t_dsm_(t_dsm) {}

  MatrixXd operator()(const MatrixXd& y, const MatrixXd& cond = MatrixXd()) const;

  ScoreKind kind() const noexcept { return kind_; }
  ScoreProvider provider() const noexcept { return provider_; }
  /// Smoothing level the provider was trained at (0 for analytic scores).
  double t_dsm() const noexcept { return t_dsm_; }
  double scale() const noexcept { return scale_; }
  /// Provider of the wrapped score when this one is calibrated.
  ScoreProvider base_provider() const noexcept { return base_provider_.value_or(provider_); }

  /// Wrapper multiplying every evaluation by c.
  ScoreFn scaled(double c) const;

 private:
  ScoreKind kind_;
  ScoreProvider provider_;
  EvalFn fn_;
  double t_dsm_ = 0.0;
  double scale_ = 1.0;
  std::optional<ScoreProvider> base_provider_;
};

// --- Gaussian scores as expression-friendly free functions -------------------

/// -cov^{-1} (y - mean), column by column. Throws SingularCovariance unless
/// cov is positive definite.
template <typename DerivedY, typename DerivedMean>
MatrixXd gaussian_conditional_score(const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedMean>& mean,
                                    const MatrixXd& cov) {
  if (cov.rows() != y.rows() || cov.cols() != y.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "covariance does not match score dimension");
  }
  const Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !(cov.diagonal().array() > 0.0).all()) {
    throw Error(ErrorCode::SingularCovariance, "covariance is not positive definite");
  }
  MatrixXd centered = y - mean;
  return -llt.solve(centered);
}

template <typename DerivedY>
MatrixXd gaussian_marginal_score(const Eigen::MatrixBase<DerivedY>& y, const MatrixXd& cov) {
  return gaussian_conditional_score(y, MatrixXd::Zero(y.rows(), y.cols()), cov);
}

inline double gaussian_marginal_score(double y, double variance) {
  return gaussian_marginal_score(MatrixXd::Constant(1, 1, y), MatrixXd::Constant(1, 1, variance))(0, 0);
}

inline double gaussian_conditional_score(double y, double mean, double variance) {
  return gaussian_conditional_score(MatrixXd::Constant(1, 1, y), MatrixXd::Constant(1, 1, mean),
                                    MatrixXd::Constant(1, 1, variance))(0, 0);
}

// --- linear Gaussian DAGs ---------------------------------------------------

/// Output statistics of Y given a set of conditioning nodes C:
///   Y | C=c  ~  N(offset + gain * c, cov).
struct GaussianConditional {
  MatrixXd gain;
  VectorXd offset;
  MatrixXd cov;

  MatrixXd mean(const MatrixXd& cond) const;
};

/// Exact reduction of a DAG whose output ancestors are all linear. Every node
/// value is written as  mean + jac * x + noise_coeff * xi  with x the input
/// values and xi the standard-normal noise sources.
class LinearGaussianReduction {
 public:
  /// Effective gain of Y with respect to the inputs (d_out x d_in).
  const MatrixXd& gain() const noexcept { return gain_; }
  /// Effective noise covariance sigma_N^2 of Y given X.
  const MatrixXd& noise_cov() const noexcept { return noise_cov_; }
  /// Marginal output covariance v_Y.
  const MatrixXd& output_cov() const noexcept { return output_cov_; }
  const VectorXd& output_mean() const noexcept { return output_mean_; }
  const MatrixXd& input_cov() const noexcept { return input_cov_; }

  /// Scalar shortcuts for single-output, single-input DAGs.
  double gain_scalar() const { return gain_(0, 0); }
  double noise_var() const { return noise_cov_(0, 0); }
  double output_var() const { return output_cov_(0, 0); }

  /// Y given the listed nodes (any nodes of the DAG, not only inputs).
  GaussianConditional condition_on(const std::vector<std::string>& nodes) const;
  /// Covariance between two stacked node lists.
  MatrixXd cross_cov(const std::vector<std::string>& a, const std::vector<std::string>& b) const;

  const DagSpec& spec() const noexcept { return spec_; }

 private:
  friend LinearGaussianReduction linear_gaussian_reduce(const DagSpec&, const ParamStore&,
                                                        const std::map<std::string, double>*);
  struct Affine {
    VectorXd mean;
    MatrixXd jac;
    MatrixXd noise;
  };
  Affine stacked(const std::vector<std::string>& nodes) const;

  DagSpec spec_;
  std::map<std::string, Affine> nodes_;
  MatrixXd input_cov_;
  MatrixXd gain_, noise_cov_, output_cov_;
  VectorXd output_mean_;
};

/// Propagates means and covariances through a linear DAG. Input variances
/// default to the DAG's input priors. Throws NonlinearNode when a tanh or mlp node
/// is an ancestor of an output.
LinearGaussianReduction linear_gaussian_reduce(const DagSpec& spec, const ParamStore& params,
                                               const std::map<std::string, double>* input_variances = nullptr);

/// Analytic score of Y_t = Y + sqrt(t) Z' (t = 0 gives the score of Y).
ScoreFn analytic_marginal_score(const LinearGaussianReduction& model, double extra_var = 0.0);
/// Analytic score of Y_t given the listed conditioning nodes.
ScoreFn analytic_conditional_score(const LinearGaussianReduction& model, const std::vector<std::string>& cond_nodes,
                                   ScoreKind kind = ScoreKind::conditional_on_x, double extra_var = 0.0);

// --- neural scores ----------------------------------------------------------

/// Wraps a DSM-trained network; the network input is concat(y, cond).
ScoreFn neural_score(std::shared_ptr<const ScoreNet> net, ScoreKind kind, double t_dsm);

// --- Stein calibration ------------------------------------------------------

struct SteinCalibration {
  ScoreFn score;
  double scale = 1.0;     // c
  double scale_se = 0.0;  // delta-method standard error of c
  double moment = 0.0;    // sample mean that c inverts
  bool applied = false;   // false when skipped for multidimensional y
};

/// c = -1 / mean(y * s(y)), enforcing E[Y s(Y)] = -1.
SteinCalibration stein_calibrate_marginal(const ScoreFn& score, const MatrixXd& y);

/// c = -1 / mean((y - E[Y|X]) * s(y | x)).
SteinCalibration stein_calibrate_conditional(const ScoreFn& score, const MatrixXd& y, const MatrixXd& cond,
                                             const MatrixXd& cond_mean);

/// E[Y | C = c] from the exact linear reduction.
MatrixXd conditional_mean_linear(const LinearGaussianReduction& model, const std::vector<std::string>& cond_nodes,
                                 const MatrixXd& cond);

/// E[Y | X = x] approximated by averaging y_r + t * s(y_r | x) over
/// `replicates` fresh noise draws of the DAG at the same inputs.
MatrixXd conditional_mean_replicates(const DagSpec& spec, const ParamStore& params, const MatrixXd& x,
                                     const ScoreFn& cond_score, const std::vector<std::string>& cond_nodes,
                                     double t, int replicates, std::uint64_t seed);

// --- noise-level-conditioned score family -----------------------------------

/// Network s(y_t, log t [, c]) trained by DSM across noise levels in
/// [t_min, t_max]; at(t) yields the score of Y_t = Y + sqrt(t) Z'.
class NoiseConditionalScore {
 public:
  NoiseConditionalScore(std::shared_ptr<const ScoreNet> net, Index y_dim, Index cond_dim, double t_min, double t_max)
      : net_(std::move(net)), y_dim_(y_dim), cond_dim_(cond_dim), t_min_(t_min), t_max_(t_max) {}

  ScoreFn at(double t, ScoreKind kind) const;
  double t_min() const noexcept { return t_min_; }
  double t_max() const noexcept { return t_max_; }
  const ScoreNet& net() const { return *net_; }

 private:
  std::shared_ptr<const ScoreNet> net_;
  Index y_dim_;
  Index cond_dim_;
  double t_min_;
  double t_max_;
};

/// Levels are drawn log-uniformly; the loss is weighted by t so all levels
/// contribute on the same scale.
NoiseConditionalScore train_noise_conditional_score(const MatrixXd& samples, const MatrixXd* conditions,
                                                    double t_min, double t_max, const DsmConfig& config);

}  // namespace infograd
