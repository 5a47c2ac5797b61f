// SPDX-License-Identifier: Apache-2.0
//
// Monte-Carlo information gradients
//
//   grad_eta I(X; Y) = E[ (D_eta Y)^T (s_{Y|X}(Y|X) - s_Y(Y)) ]
//
// The score difference is computed first and enters the tape as a constant
// cotangent, so one backward pass yields every parameter's gradient.
#pragma once

#include "infograd/scores.hpp"
#include "infograd/tape.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace infograd {

struct GradientEstimate {
  std::map<std::string, VectorXd> mean;
  /// Per-sample standard deviation / sqrt(B).
  std::map<std::string, VectorXd> se;
  Index batch_size = 0;
  std::string fine_provider;    // provider of the conditional score
  std::string coarse_provider;  // provider of the subtracted score

  const VectorXd& operator[](const std::string& key) const { return mean.at(key); }
  /// Flattened in key order, matching ParamStore::flat().
  VectorXd flat() const;
  VectorXd flat_se() const;
};

/// Streams per-sample VJP contributions and reduces them in a fixed order.
class GradientAccumulator {
 public:
  void add(const VjpResult& vjp);
  GradientEstimate finish() const;
  Index count() const noexcept { return count_; }

 private:
  std::map<std::string, VectorXd> sum_;
  std::map<std::string, VectorXd> sum_sq_;
  Index count_ = 0;
};

/// Score difference s_{Y|X}(y|x) - s_Y(y); throws NonFiniteScore on NaN/Inf.
MatrixXd score_difference(const ScoreFn& fine, const MatrixXd& fine_cond, const ScoreFn& coarse,
                          const MatrixXd& coarse_cond, const MatrixXd& y);

/// One-batch estimate. Scores must be {marginal, conditional_on_x}; the
/// conditional score is evaluated with cond = batch.x.
GradientEstimate info_gradient(const DagSpec& spec, const ParamStore& params, const ScoreFn& score_marginal,
                               const ScoreFn& score_conditional, const SampleBatch& batch);

/// Gradient of I(X1; Y | X2): cotangent s_{Y|X1,X2} - s_{Y|X2}. The two
/// node lists pick the conditioning values out of the batch.
GradientEstimate cond_mi_gradient(const DagSpec& spec, const ParamStore& params, const ScoreFn& score_y_given_x1x2,
                                  const ScoreFn& score_y_given_x2, const SampleBatch& batch,
                                  const std::vector<std::string>& x1x2_nodes,
                                  const std::vector<std::string>& x2_nodes);

/// -mean <v, y>; its tape gradient is minus the information gradient.
double surrogate_vjp_loss_value(const MatrixXd& y, const MatrixXd& v);

/// Cotangent for a freshly sampled batch.
using CotangentFn = std::function<MatrixXd(const SampleBatch&)>;

/// Draws `samples` DAG executions in chunks (chunk c covers sample indices
/// [c*chunk, (c+1)*chunk)), so the result does not depend on the chunk size.
GradientEstimate monte_carlo_gradient(const DagSpec& spec, const ParamStore& params, Index samples, Index chunk,
                                      std::uint64_t seed, const CotangentFn& cotangent);

GradientEstimate info_gradient_mc(const DagSpec& spec, const ParamStore& params, const ScoreFn& score_marginal,
                                  const ScoreFn& score_conditional, Index samples, std::uint64_t seed,
                                  Index chunk = 8192);

}  // namespace infograd
