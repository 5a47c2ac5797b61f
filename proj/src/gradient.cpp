// SPDX-License-Identifier: Apache-2.0
#include "infograd/gradient.hpp"

#include <algorithm>
#include <cmath>

namespace infograd {

VectorXd GradientEstimate::flat() const {
  Index n = 0;
  for (const auto& [k, v] : mean) n += v.size();
  VectorXd out(n);
  Index off = 0;
  for (const auto& [k, v] : mean) {
    out.segment(off, v.size()) = v;
    off += v.size();
  }
  return out;
}

VectorXd GradientEstimate::flat_se() const {
  Index n = 0;
  for (const auto& [k, v] : se) n += v.size();
  VectorXd out(n);
  Index off = 0;
  for (const auto& [k, v] : se) {
    out.segment(off, v.size()) = v;
    off += v.size();
  }
  return out;
}

void GradientAccumulator::add(const VjpResult& vjp) {
  Index b = 0;
  for (const auto& [key, g] : vjp.per_sample) {
    b = g.cols();
    auto it = sum_.find(key);
    if (it == sum_.end()) {
      sum_[key] = g.rowwise().sum();
      sum_sq_[key] = g.array().square().rowwise().sum().matrix();
    } else {
      it->second += g.rowwise().sum();
      sum_sq_[key] += g.array().square().rowwise().sum().matrix();
    }
  }
  count_ += b;
}

GradientEstimate GradientAccumulator::finish() const {
  if (count_ == 0) throw Error(ErrorCode::EmptyBatch, "no samples were accumulated");
  GradientEstimate out;
  out.batch_size = count_;
  const double n = static_cast<double>(count_);
  for (const auto& [key, s] : sum_) {
    const VectorXd m = s / n;
    VectorXd var = (sum_sq_.at(key) / n - m.cwiseAbs2()).cwiseMax(0.0);
    if (count_ > 1) var *= n / (n - 1.0);
    out.mean[key] = m;
    out.se[key] = (var / n).cwiseSqrt();
  }
  return out;
}

MatrixXd score_difference(const ScoreFn& fine, const MatrixXd& fine_cond, const ScoreFn& coarse,
                          const MatrixXd& coarse_cond, const MatrixXd& y) {
  MatrixXd v = fine(y, fine_cond) - coarse(y, coarse_cond);
  if (!v.allFinite()) throw Error(ErrorCode::NonFiniteScore, "score evaluation produced NaN or Inf");
  return v;
}

namespace {

GradientEstimate one_batch(const DagSpec& spec, const ParamStore& params, const SampleBatch& batch,
                           const MatrixXd& v) {
  const Tape tape = Tape::record(spec, params, batch);
  GradientAccumulator acc;
  acc.add(tape.vjp(v));
  return acc.finish();
}

void require_kind(const ScoreFn& s, ScoreKind kind, const char* role) {
  if (s.kind() != kind) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(role) + " score has kind " + to_string(s.kind()) + ", expected " + to_string(kind));
  }
}

}  // namespace

GradientEstimate info_gradient(const DagSpec& spec, const ParamStore& params, const ScoreFn& score_marginal,
                               const ScoreFn& score_conditional, const SampleBatch& batch) {
  require_kind(score_marginal, ScoreKind::marginal, "marginal");
  require_kind(score_conditional, ScoreKind::conditional_on_x, "conditional");
  const MatrixXd v = score_difference(score_conditional, batch.x, score_marginal, MatrixXd(), batch.y);
  GradientEstimate g = one_batch(spec, params, batch, v);
  g.fine_provider = to_string(score_conditional.provider());
  g.coarse_provider = to_string(score_marginal.provider());
  return g;
}

GradientEstimate cond_mi_gradient(const DagSpec& spec, const ParamStore& params, const ScoreFn& score_y_given_x1x2,
                                  const ScoreFn& score_y_given_x2, const SampleBatch& batch,
                                  const std::vector<std::string>& x1x2_nodes,
                                  const std::vector<std::string>& x2_nodes) {
  require_kind(score_y_given_x1x2, ScoreKind::conditional_on_x1x2, "joint conditional");
  require_kind(score_y_given_x2, ScoreKind::conditional_on_x, "partial conditional");
  const MatrixXd v = score_difference(score_y_given_x1x2, batch.stack(x1x2_nodes), score_y_given_x2,
                                      batch.stack(x2_nodes), batch.y);
  GradientEstimate g = one_batch(spec, params, batch, v);
  g.fine_provider = to_string(score_y_given_x1x2.provider());
  g.coarse_provider = to_string(score_y_given_x2.provider());
  return g;
}

double surrogate_vjp_loss_value(const MatrixXd& y, const MatrixXd& v) {
  if (y.rows() != v.rows() || y.cols() != v.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "cotangent and output shapes differ");
  }
  if (y.cols() == 0) throw Error(ErrorCode::EmptyBatch, "empty batch");
  return -(v.array() * y.array()).sum() / static_cast<double>(y.cols());
}

GradientEstimate monte_carlo_gradient(const DagSpec& spec, const ParamStore& params, Index samples, Index chunk,
                                      std::uint64_t seed, const CotangentFn& cotangent) {
  if (samples < 1) throw Error(ErrorCode::EmptyBatch, "sample count must be positive");
  if (chunk < 1) throw Error(ErrorCode::InvalidArgument, "chunk size must be positive");
  GradientAccumulator acc;
  for (Index first = 0; first < samples; first += chunk) {
    const Index n = std::min(chunk, samples - first);
    const auto start = static_cast<std::uint64_t>(first);
    const SampleBatch batch = forward_sample(spec, params, sample_inputs(spec, n, seed, start), seed, start);
    const MatrixXd v = cotangent(batch);
    if (!v.allFinite()) throw Error(ErrorCode::NonFiniteScore, "score evaluation produced NaN or Inf");
    acc.add(Tape::record(spec, params, batch).vjp(v));
  }
  return acc.finish();
}

GradientEstimate info_gradient_mc(const DagSpec& spec, const ParamStore& params, const ScoreFn& score_marginal,
                                  const ScoreFn& score_conditional, Index samples, std::uint64_t seed, Index chunk) {
  require_kind(score_marginal, ScoreKind::marginal, "marginal");
  require_kind(score_conditional, ScoreKind::conditional_on_x, "conditional");
  GradientEstimate g = monte_carlo_gradient(spec, params, samples, chunk, seed, [&](const SampleBatch& b) {
    return score_difference(score_conditional, b.x, score_marginal, MatrixXd(), b.y);
  });
  g.fine_provider = to_string(score_conditional.provider());
  g.coarse_provider = to_string(score_marginal.provider());
  return g;
}

}  // namespace infograd
