// SPDX-License-Identifier: Apache-2.0
#include "infograd/scores.hpp"

#include <cmath>
#include <iostream>
#include <set>

namespace infograd {

std::string to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::marginal: return "marginal";
    case ScoreKind::conditional_on_x: return "conditional_on_x";
    case ScoreKind::conditional_on_x1x2: return "conditional_on_x1x2";
  }
  return "unknown";
}

std::string to_string(ScoreProvider provider) {
  switch (provider) {
    case ScoreProvider::analytic_gaussian: return "analytic_gaussian";
    case ScoreProvider::neural: return "neural";
    case ScoreProvider::calibrated: return "calibrated";
  }
  return "unknown";
}

MatrixXd ScoreFn::operator()(const MatrixXd& y, const MatrixXd& cond) const {
  MatrixXd s = fn_(y, cond);
  if (s.rows() != y.rows() || s.cols() != y.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "score output shape differs from y");
  }
  return s;
}

ScoreFn ScoreFn::scaled(double c) const {
  ScoreFn out(kind_, ScoreProvider::calibrated,
              [inner = fn_, c](const MatrixXd& y, const MatrixXd& cond) -> MatrixXd { return c * inner(y, cond); },
              t_dsm_);
  out.scale_ = scale_ * c;
  out.base_provider_ = base_provider();
  return out;
}

// --- linear reduction -------------------------------------------------------

MatrixXd GaussianConditional::mean(const MatrixXd& cond) const {
  MatrixXd m = gain * cond;
  m.colwise() += offset;
  return m;
}

LinearGaussianReduction::Affine LinearGaussianReduction::stacked(const std::vector<std::string>& nodes) const {
  Index rows = 0;
  for (const auto& id : nodes) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw Error(ErrorCode::InvalidArgument, "node '" + id + "' is not part of the reduction");
    rows += it->second.mean.size();
  }
  Affine out{VectorXd(rows), MatrixXd(rows, input_cov_.rows()), MatrixXd(rows, nodes_.begin()->second.noise.cols())};
  Index off = 0;
  for (const auto& id : nodes) {
    const auto& a = nodes_.at(id);
    const Index d = a.mean.size();
    out.mean.segment(off, d) = a.mean;
    out.jac.middleRows(off, d) = a.jac;
    out.noise.middleRows(off, d) = a.noise;
    off += d;
  }
  return out;
}

MatrixXd LinearGaussianReduction::cross_cov(const std::vector<std::string>& a, const std::vector<std::string>& b) const {
  const Affine sa = stacked(a);
  const Affine sb = stacked(b);
  return sa.jac * input_cov_ * sb.jac.transpose() + sa.noise * sb.noise.transpose();
}

GaussianConditional LinearGaussianReduction::condition_on(const std::vector<std::string>& nodes) const {
  const Affine y = stacked(spec_.output_ids);
  GaussianConditional out;
  if (nodes.empty()) {
    out.gain = MatrixXd(y.mean.size(), 0);
    out.offset = y.mean;
    out.cov = output_cov_;
    return out;
  }
  const Affine c = stacked(nodes);
  const MatrixXd s_cc = c.jac * input_cov_ * c.jac.transpose() + c.noise * c.noise.transpose();
  const MatrixXd s_yc = y.jac * input_cov_ * c.jac.transpose() + y.noise * c.noise.transpose();
  // pseudo-inverse: conditioning nodes may be degenerate (zero power)
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(s_cc);
  out.gain = cod.solve(MatrixXd(s_yc.transpose())).transpose();
  out.offset = y.mean - out.gain * c.mean;
  MatrixXd cov = output_cov_ - out.gain * s_yc.transpose();
  out.cov = 0.5 * (cov + cov.transpose());
  return out;
}

LinearGaussianReduction linear_gaussian_reduce(const DagSpec& spec, const ParamStore& params,
                                               const std::map<std::string, double>* input_variances) {
  const auto order = validate(spec);
  check_params(spec, params);

  // Only ancestors of the outputs must be linear.
  std::vector<char> relevant(spec.nodes.size(), 0);
  for (const auto& id : spec.output_ids) relevant[spec.node_index(id)] = 1;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!relevant[*it]) continue;
    for (const auto& p : spec.nodes[*it].parents) relevant[spec.node_index(p)] = 1;
  }

  LinearGaussianReduction r;
  r.spec_ = spec;
  const Index d_in = spec.input_dim();
  Index n_noise = 0;
  for (const auto& n : spec.nodes) {
    if (n.noise_std > 0.0) n_noise += n.dim;
  }
  r.input_cov_ = MatrixXd::Zero(d_in, d_in);
  {
    Index off = 0;
    for (const auto& id : spec.input_ids) {
      const Index d = spec.node(id).dim;
      double var = spec.variance_of(id);
      if (input_variances) {
        auto it = input_variances->find(id);
        if (it != input_variances->end()) var = it->second;
      }
      if (var < 0.0) throw Error(ErrorCode::InvalidArgument, "input '" + id + "' has negative variance");
      r.input_cov_.diagonal().segment(off, d).setConstant(var);
      off += d;
    }
  }

  Index noise_off = 0;
  std::map<std::string, Index> noise_offsets;
  for (const auto& n : spec.nodes) {
    if (n.noise_std > 0.0) {
      noise_offsets[n.id] = noise_off;
      noise_off += n.dim;
    }
  }

  for (Index i : order) {
    const auto& n = spec.nodes[i];
    if (!relevant[i]) continue;
    LinearGaussianReduction::Affine a{VectorXd::Zero(n.dim), MatrixXd::Zero(n.dim, d_in),
                                      MatrixXd::Zero(n.dim, n_noise)};
    auto parent = [&](std::size_t k) -> const LinearGaussianReduction::Affine& { return r.nodes_.at(n.parents[k]); };
    const VectorXd* eta = n.param_key ? &params.at(*n.param_key) : nullptr;
    switch (n.func) {
      case FuncKind::input: {
        Index off = 0;
        for (const auto& id : spec.input_ids) {
          if (id == n.id) break;
          off += spec.node(id).dim;
        }
        a.jac.middleCols(off, n.dim).setIdentity();
        break;
      }
      case FuncKind::linear_gain:
      case FuncKind::sqrt_gain:
      case FuncKind::affine: {
        double g = (*eta)(0);
        if (n.func == FuncKind::sqrt_gain) {
          if (g < 0.0) throw Error(ErrorCode::InvalidArgument, "node '" + n.id + "': sqrt_gain parameter < 0");
          g = std::sqrt(g);
        }
        a.mean = g * parent(0).mean;
        a.jac = g * parent(0).jac;
        a.noise = g * parent(0).noise;
        if (n.func == FuncKind::affine) a.mean.array() += (*eta)(1);
        break;
      }
      case FuncKind::weighted_sum: {
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
          double c = n.weights.empty() ? 1.0 : n.weights[k];
          if (n.param_key) {
            if (n.param_slots.empty()) {
              c = (*eta)(static_cast<Index>(k));
            } else {
              for (std::size_t s = 0; s < n.param_slots.size(); ++s) {
                if (n.param_slots[s] == static_cast<Index>(k)) c = (*eta)(static_cast<Index>(s));
              }
            }
          }
          a.mean += c * parent(k).mean;
          a.jac += c * parent(k).jac;
          a.noise += c * parent(k).noise;
        }
        break;
      }
      case FuncKind::tanh_gain:
      case FuncKind::mlp:
        throw Error(ErrorCode::NonlinearNode,
                    "node '" + n.id + "' (" + to_string(n.func) + ") lies on an input-output path");
    }
    if (n.noise_std > 0.0) {
      a.noise.middleCols(noise_offsets.at(n.id), n.dim).diagonal().setConstant(n.noise_std);
    }
    r.nodes_.emplace(n.id, std::move(a));
  }

  const auto y = r.stacked(spec.output_ids);
  r.gain_ = y.jac;
  r.output_mean_ = y.mean;
  r.noise_cov_ = y.noise * y.noise.transpose();
  r.output_cov_ = y.jac * r.input_cov_ * y.jac.transpose() + r.noise_cov_;
  return r;
}

namespace {

MatrixXd with_extra(const MatrixXd& cov, double extra_var) {
  return cov + extra_var * MatrixXd::Identity(cov.rows(), cov.cols());
}

void require_pd(const MatrixXd& cov, const char* what) {
  const Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !(cov.diagonal().array() > 0.0).all()) {
    throw Error(ErrorCode::SingularCovariance, std::string(what) + " covariance is not positive definite");
  }
}

}  // namespace

ScoreFn analytic_marginal_score(const LinearGaussianReduction& model, double extra_var) {
  const MatrixXd cov = with_extra(model.output_cov(), extra_var);
  require_pd(cov, "marginal");
  const VectorXd mean = model.output_mean();
  return ScoreFn(ScoreKind::marginal, ScoreProvider::analytic_gaussian,
                 [cov, mean](const MatrixXd& y, const MatrixXd&) -> MatrixXd {
                   return gaussian_conditional_score(y, mean.replicate(1, y.cols()), cov);
                 });
}

ScoreFn analytic_conditional_score(const LinearGaussianReduction& model, const std::vector<std::string>& cond_nodes,
                                   ScoreKind kind, double extra_var) {
  GaussianConditional c = model.condition_on(cond_nodes);
  c.cov = with_extra(c.cov, extra_var);
  require_pd(c.cov, "conditional");
  return ScoreFn(kind, ScoreProvider::analytic_gaussian, [c](const MatrixXd& y, const MatrixXd& cond) -> MatrixXd {
    if (cond.rows() != c.gain.cols() || cond.cols() != y.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "conditioning batch does not match the score");
    }
    return gaussian_conditional_score(y, c.mean(cond), c.cov);
  });
}

ScoreFn neural_score(std::shared_ptr<const ScoreNet> net, ScoreKind kind, double t_dsm) {
  return ScoreFn(
      kind, ScoreProvider::neural,
      [net](const MatrixXd& y, const MatrixXd& cond) -> MatrixXd {
        if (cond.size() == 0) return evaluate(*net, y);
        if (cond.cols() != y.cols()) throw Error(ErrorCode::ShapeMismatch, "conditioning batch is misaligned");
        MatrixXd in(y.rows() + cond.rows(), y.cols());
        in << y, cond;
        return evaluate(*net, in);
      },
      t_dsm);
}

// --- Stein calibration ------------------------------------------------------

namespace {

SteinCalibration calibrate_from_products(const ScoreFn& score, const Eigen::ArrayXd& products) {
  const double n = static_cast<double>(products.size());
  const double m = products.mean();
  if (!std::isfinite(m)) throw Error(ErrorCode::NonFiniteScore, "Stein moment is not finite");
  if (std::abs(m) < 1e-8) {
    throw Error(ErrorCode::DegenerateMoment, "|E[Y s(Y)]| < 1e-8; the score cannot be rescaled");
  }
  const double var = products.size() > 1 ? (products - m).square().sum() / (n - 1.0) : 0.0;
  const double se_m = std::sqrt(var / n);
  const double c = -1.0 / m;
  return SteinCalibration{score.scaled(c), c, se_m / (m * m), m, true};
}

}  // namespace

SteinCalibration stein_calibrate_marginal(const ScoreFn& score, const MatrixXd& y) {
  if (y.cols() == 0) throw Error(ErrorCode::EmptyDataset, "no samples for Stein calibration");
  if (y.rows() != 1) {
    std::cerr << "warning: Stein calibration is scalar-only; skipped for " << y.rows() << "-dimensional output\n";
    return SteinCalibration{score, 1.0, 0.0, 0.0, false};
  }
  const MatrixXd s = score(y);
  return calibrate_from_products(score, (y.array() * s.array()).row(0).transpose());
}

SteinCalibration stein_calibrate_conditional(const ScoreFn& score, const MatrixXd& y, const MatrixXd& cond,
                                             const MatrixXd& cond_mean) {
  if (y.cols() == 0) throw Error(ErrorCode::EmptyDataset, "no samples for Stein calibration");
  if (cond_mean.rows() != y.rows() || cond_mean.cols() != y.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "conditional mean batch differs from y");
  }
  if (y.rows() != 1) {
    std::cerr << "warning: Stein calibration is scalar-only; skipped for " << y.rows() << "-dimensional output\n";
    return SteinCalibration{score, 1.0, 0.0, 0.0, false};
  }
  const MatrixXd s = score(y, cond);
  return calibrate_from_products(score, ((y - cond_mean).array() * s.array()).row(0).transpose());
}

MatrixXd conditional_mean_linear(const LinearGaussianReduction& model, const std::vector<std::string>& cond_nodes,
                                 const MatrixXd& cond) {
  return model.condition_on(cond_nodes).mean(cond);
}

MatrixXd conditional_mean_replicates(const DagSpec& spec, const ParamStore& params, const MatrixXd& x,
                                     const ScoreFn& cond_score, const std::vector<std::string>& cond_nodes,
                                     double t, int replicates, std::uint64_t seed) {
  if (replicates < 1) throw Error(ErrorCode::InvalidArgument, "replicates must be >= 1");
  const CounterRng rng(seed, "replicate");
  MatrixXd acc = MatrixXd::Zero(spec.output_dim(), x.cols());
  for (int r = 0; r < replicates; ++r) {
    const SampleBatch b = forward_sample(spec, params, x, rng.bits(static_cast<std::uint64_t>(r)));
    acc += b.y + t * cond_score(b.y, b.stack(cond_nodes));
  }
  return acc / static_cast<double>(replicates);
}

// --- noise-conditional family -----------------------------------------------

ScoreFn NoiseConditionalScore::at(double t, ScoreKind kind) const {
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "noise level must be positive");
  const float feature = static_cast<float>(std::log(t));
  auto net = net_;
  const Index yd = y_dim_;
  const Index cd = cond_dim_;
  return ScoreFn(
      kind, ScoreProvider::neural,
      [net, feature, yd, cd](const MatrixXd& y, const MatrixXd& cond) -> MatrixXd {
        if (y.rows() != yd || (cd > 0 && (cond.rows() != cd || cond.cols() != y.cols()))) {
          throw Error(ErrorCode::ShapeMismatch, "noise-conditional score input has the wrong shape");
        }
        ScoreNet::Matrix in(yd + 1 + cd, y.cols());
        in.topRows(yd) = y.cast<float>();
        in.row(yd).setConstant(feature);
        if (cd > 0) in.bottomRows(cd) = cond.cast<float>();
        return net->forward(in).cast<double>();
      },
      t);
}

NoiseConditionalScore train_noise_conditional_score(const MatrixXd& samples, const MatrixXd* conditions,
                                                    double t_min, double t_max, const DsmConfig& config) {
  config.validate();
  if (samples.cols() == 0) throw Error(ErrorCode::EmptyDataset, "no training samples");
  if (!(t_min > 0.0) || !(t_max > t_min)) throw Error(ErrorCode::InvalidArgument, "need 0 < t_min < t_max");
  if (conditions && conditions->cols() != samples.cols()) {
    throw Error(ErrorCode::DimMismatch, "condition batch is not aligned with samples");
  }
  const Index d = samples.rows();
  const Index c = conditions ? conditions->rows() : 0;
  std::vector<Index> widths{d + 1 + c};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(d);
  ScoreNet net = ScoreNet::glorot(widths, config.seed);
  AdamW<float> opt(net, AdamWConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});

  const CounterRng rng(config.seed, "ncsn");
  const CounterRng idx_rng = rng.split("index");
  const CounterRng lvl_rng = rng.split("level");
  const CounterRng noise_rng = rng.split("noise");
  const auto n = static_cast<std::uint64_t>(samples.cols());
  const double log_lo = std::log(t_min);
  const double log_hi = std::log(t_max);
  const Index batch = config.batch_size;
  ScoreNet::Matrix input(d + 1 + c, batch);
  ScoreNet::Matrix target(d, batch);
  ScoreNet::Matrix weight(1, batch);
  ScoreNet::Cache cache;
  ScoreNet::Gradients grads;
  for (int step = 0; step < config.steps; ++step) {
    const std::uint64_t base = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(batch);
    for (Index b = 0; b < batch; ++b) {
      const auto i = static_cast<Index>(idx_rng.below(base + b, n));
      const double t = std::exp(log_lo + (log_hi - log_lo) * lvl_rng.uniform(base + b));
      const double sd = std::sqrt(t);
      for (Index k = 0; k < d; ++k) {
        const double z = noise_rng.normal((base + b) * static_cast<std::uint64_t>(d) + k);
        input(k, b) = static_cast<float>(samples(k, i) + sd * z);
        target(k, b) = static_cast<float>(-z / sd);
      }
      input(d, b) = static_cast<float>(std::log(t));
      for (Index k = 0; k < c; ++k) input(d + 1 + k, b) = static_cast<float>((*conditions)(k, i));
      weight(0, b) = static_cast<float>(t);
    }
    const ScoreNet::Matrix diff = net.forward(input, cache) - target;
    const ScoreNet::Matrix weighted = diff.array().rowwise() * weight.row(0).array();
    const double loss = (weighted.array() * diff.array()).cast<double>().sum() / static_cast<double>(batch);
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "noise-conditional DSM diverged");
    net.backward(cache, weighted * (2.0f / static_cast<float>(batch)), grads, false);
    opt.step(net, grads);
  }
  return NoiseConditionalScore(std::make_shared<const ScoreNet>(std::move(net)), d, c, t_min, t_max);
}

}  // namespace infograd
