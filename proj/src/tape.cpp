// SPDX-License-Identifier: Apache-2.0
#include "infograd/tape.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace infograd {

std::map<std::string, VectorXd> VjpResult::mean() const {
  std::map<std::string, VectorXd> out;
  for (const auto& [k, m] : per_sample) out[k] = m.rowwise().mean();
  return out;
}

Tape Tape::record(const DagSpec& spec, const ParamStore& params, const SampleBatch& batch) {
  Tape t;
  t.spec_ = spec;
  t.params_ = params;
  t.order_ = validate(spec);
  t.batch_ = replay(spec, params, batch);
  t.y_ = t.batch_.y;
  for (Index i : t.order_) {
    const auto& n = spec.nodes[i];
    if (n.func != FuncKind::mlp) continue;
    std::vector<const MatrixXd*> parents;
    for (const auto& p : n.parents) parents.push_back(&t.batch_.values[spec.node_index(p)]);
    const MatrixXd in = concat_rows(parents);
    std::vector<Index> widths{in.rows()};
    widths.insert(widths.end(), n.hidden.begin(), n.hidden.end());
    widths.push_back(n.dim);
    Mlp<double> net(widths);
    net.set_flat(params.at(*n.param_key));
    Mlp<double>::Cache cache;
    net.forward(in, cache);
    t.mlp_state_.emplace(i, std::make_pair(std::move(net), std::move(cache)));
  }
  return t;
}

std::vector<std::string> Tape::param_keys() const {
  std::set<std::string> keys;
  for (const auto& n : spec_.nodes) {
    if (n.param_key) keys.insert(*n.param_key);
  }
  return {keys.begin(), keys.end()};
}

VjpResult Tape::vjp(const MatrixXd& cotangent) const {
  const Index batch = y_.cols();
  if (cotangent.rows() != y_.rows() || cotangent.cols() != batch) {
    throw Error(ErrorCode::ShapeMismatch, "cotangent is " + std::to_string(cotangent.rows()) + "x" +
                                              std::to_string(cotangent.cols()) + ", output is " +
                                              std::to_string(y_.rows()) + "x" + std::to_string(batch));
  }
  VjpResult result;
  for (const auto& [key, v] : params_.entries()) result.per_sample[key] = MatrixXd::Zero(v.size(), batch);

  std::vector<MatrixXd> adj(spec_.nodes.size());
  std::vector<char> live(spec_.nodes.size(), 0);
  Index off = 0;
  for (const auto& id : spec_.output_ids) {
    const Index i = spec_.node_index(id);
    const Index d = spec_.nodes[i].dim;
    if (!live[i]) {
      adj[i] = MatrixXd::Zero(d, batch);
      live[i] = 1;
    }
    adj[i] += cotangent.middleRows(off, d);
    off += d;
  }

  auto accumulate = [&](Index parent, const MatrixXd& g) {
    if (!live[parent]) {
      adj[parent] = g;
      live[parent] = 1;
    } else {
      adj[parent] += g;
    }
  };

  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const Index i = *it;
    if (!live[i]) continue;
    const auto& n = spec_.nodes[i];
    if (n.func == FuncKind::input) continue;
    const MatrixXd& a = adj[i];
    std::vector<Index> parents;
    for (const auto& p : n.parents) parents.push_back(spec_.node_index(p));
    const VectorXd* eta = n.param_key ? &params_.at(*n.param_key) : nullptr;
    MatrixXd* grad = n.param_key ? &result.per_sample.at(*n.param_key) : nullptr;

    switch (n.func) {
      case FuncKind::input: break;
      case FuncKind::linear_gain: {
        const MatrixXd& x = batch_.values[parents[0]];
        grad->row(0) += (a.array() * x.array()).colwise().sum().matrix();
        accumulate(parents[0], (*eta)(0) * a);
        break;
      }
      case FuncKind::affine: {
        const MatrixXd& x = batch_.values[parents[0]];
        grad->row(0) += (a.array() * x.array()).colwise().sum().matrix();
        grad->row(1) += a.colwise().sum();
        accumulate(parents[0], (*eta)(0) * a);
        break;
      }
      case FuncKind::tanh_gain: {
        const MatrixXd& x = batch_.values[parents[0]];
        const Eigen::ArrayXXd th = ((*eta)(0) * x.array()).tanh();
        const Eigen::ArrayXXd local = a.array() * (1.0 - th.square());
        grad->row(0) += (local * x.array()).colwise().sum().matrix();
        accumulate(parents[0], ((*eta)(0) * local).matrix());
        break;
      }
      case FuncKind::sqrt_gain: {
        const MatrixXd& x = batch_.values[parents[0]];
        const double root = std::sqrt((*eta)(0));
        grad->row(0) += ((a.array() * x.array()).colwise().sum() / (2.0 * root)).matrix();
        accumulate(parents[0], root * a);
        break;
      }
      case FuncKind::weighted_sum: {
        for (std::size_t k = 0; k < parents.size(); ++k) {
          double c = n.weights.empty() ? 1.0 : n.weights[k];
          Index slot = -1;
          if (n.param_key) {
            if (n.param_slots.empty()) {
              slot = static_cast<Index>(k);
            } else {
              auto s = std::find(n.param_slots.begin(), n.param_slots.end(), static_cast<Index>(k));
              if (s != n.param_slots.end()) slot = s - n.param_slots.begin();
            }
          }
          if (slot >= 0) {
            c = (*eta)(slot);
            const MatrixXd& x = batch_.values[parents[k]];
            grad->row(slot) += (a.array() * x.array()).colwise().sum().matrix();
          }
          accumulate(parents[k], c * a);
        }
        break;
      }
      case FuncKind::mlp: {
        const auto& [net, cache] = mlp_state_.at(i);
        MatrixXd input_grad;
        *grad += net.per_sample_gradients(cache, a, input_grad);
        Index row = 0;
        for (Index p : parents) {
          const Index d = spec_.nodes[p].dim;
          accumulate(p, input_grad.middleRows(row, d));
          row += d;
        }
        break;
      }
    }
  }
  return result;
}

VjpResult finite_diff_vjp(const DagSpec& spec, const ParamStore& params, const SampleBatch& batch,
                          const MatrixXd& cotangent, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  VjpResult result;
  const Index b = batch.size();
  for (const auto& [key, value] : params.entries()) {
    MatrixXd g(value.size(), b);
    for (Index i = 0; i < value.size(); ++i) {
      ParamStore plus = params;
      ParamStore minus = params;
      plus.at(key)(i) += h;
      minus.at(key)(i) -= h;
      const MatrixXd yp = replay(spec, plus, batch).y;
      const MatrixXd ym = replay(spec, minus, batch).y;
      if (yp.rows() != cotangent.rows() || yp.cols() != cotangent.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "cotangent shape differs from output shape");
      }
      g.row(i) = ((cotangent.array() * (yp - ym).array()).colwise().sum() / (2.0 * h)).matrix();
    }
    result.per_sample[key] = std::move(g);
  }
  return result;
}

}  // namespace infograd
