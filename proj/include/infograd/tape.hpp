// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation of one recorded DAG execution. Backward
// rules are written per registry function; noise enters additively and
// therefore has no backward work.
#pragma once

#include "infograd/graph.hpp"
#include "infograd/neural.hpp"

#include <map>
#include <string>
#include <vector>

namespace infograd {

/// Per-sample vector-Jacobian products (D_eta Y)^T v for every parameter key.
struct VjpResult {
  /// key -> (param length x B)
  std::map<std::string, MatrixXd> per_sample;

  VectorXd mean(const std::string& key) const { return per_sample.at(key).rowwise().mean(); }
  std::map<std::string, VectorXd> mean() const;
};

class Tape {
 public:
  /// Re-executes the DAG on the batch's stored inputs and noise under
  /// `params`, keeping what the backward rules need.
  static Tape record(const DagSpec& spec, const ParamStore& params, const SampleBatch& batch);

  const MatrixXd& output() const noexcept { return y_; }
  const SampleBatch& values() const noexcept { return batch_; }
  /// Parameter keys referenced by the recorded nodes.
  std::vector<std::string> param_keys() const;

  /// Backpropagates a cotangent shaped like the output (d_out x B). The
  /// cotangent is a constant: nothing flows into it.
  VjpResult vjp(const MatrixXd& cotangent) const;

 private:
  Tape() = default;

  DagSpec spec_;
  ParamStore params_;
  std::vector<Index> order_;
  SampleBatch batch_;
  MatrixXd y_;
  /// mlp nodes keep their network and forward cache.
  std::map<Index, std::pair<Mlp<double>, Mlp<double>::Cache>> mlp_state_;
};

/// Central differences of <v_b, y_b(params +- h e_i)> for every parameter
/// coordinate i, per sample, with the batch's noise held fixed.
VjpResult finite_diff_vjp(const DagSpec& spec, const ParamStore& params, const SampleBatch& batch,
                          const MatrixXd& cotangent, double h);

}  // namespace infograd
