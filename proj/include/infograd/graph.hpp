// SPDX-License-Identifier: Apache-2.0
//
// Stochastic computational DAGs with additive Gaussian noise.
//
// Every node computes  V_j = f_j(parents; eta_j) + sigma_j * eps_j  with
// eps_j i.i.d. standard normal. Noise is drawn from a counter-based stream
// keyed by (seed, node id, sample index), so a batch can be regenerated or
// extended in any order and replayed under different parameters.
#pragma once

#include "infograd/error.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace infograd {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class FuncKind {
  input,
  linear_gain,   // y = eta * x
  affine,        // y = eta[0] * x + eta[1]
  weighted_sum,  // y = sum_i c_i x_i, c_i fixed or taken from eta
  tanh_gain,     // y = tanh(eta * x)
  sqrt_gain,     // y = sqrt(eta) * x, eta >= 0 (power parameterization)
  mlp,           // y = MLP_eta(concat(parents)), SiLU hidden layers
};

std::string to_string(FuncKind kind);
FuncKind func_kind_from_string(const std::string& name);

struct NodeSpec {
  std::string id;
  std::vector<std::string> parents;
  FuncKind func = FuncKind::input;
  std::optional<std::string> param_key;
  double noise_std = 0.0;
  Index dim = 1;
  /// weighted_sum: fixed per-parent weights (default 1).
  std::vector<double> weights;
  /// weighted_sum: parent slots whose weights are read from the parameter
  /// vector, in order. Empty with a param_key means every slot.
  std::vector<Index> param_slots;
  /// mlp: hidden layer widths.
  std::vector<Index> hidden;
};

struct DagSpec {
  std::vector<NodeSpec> nodes;
  std::vector<std::string> input_ids;
  std::vector<std::string> output_ids;
  /// Gaussian input prior variance per input node (default 1).
  std::map<std::string, double> input_variance;

  const NodeSpec& node(const std::string& id) const;
  Index node_index(const std::string& id) const;
  bool has_node(const std::string& id) const;
  Index input_dim() const;
  Index output_dim() const;
  double variance_of(const std::string& input_id) const;
  /// Total dimension of a list of nodes.
  Index dim_of(const std::vector<std::string>& ids) const;
};

/// Named parameter vectors, flattened in key order.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(std::initializer_list<std::pair<const std::string, VectorXd>> init) : entries_(init) {}

  void set(const std::string& key, VectorXd value) { entries_[key] = std::move(value); }
  void set(const std::string& key, double value) { entries_[key] = VectorXd::Constant(1, value); }
  const VectorXd& at(const std::string& key) const;
  VectorXd& at(const std::string& key);
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  double scalar(const std::string& key) const { return at(key)(0); }

  const std::map<std::string, VectorXd>& entries() const noexcept { return entries_; }
  std::vector<std::string> keys() const;

  Index size() const;
  VectorXd flat() const;
  /// Inverse of flat(); the layout of *this is kept.
  void set_flat(const VectorXd& flat);
  ParamStore with_flat(const VectorXd& flat) const;

 private:
  std::map<std::string, VectorXd> entries_;
};

/// One forward execution. values/noise are aligned with DagSpec::nodes and
/// stored one sample per column (dim x B). Noise holds sigma_j * eps_j and is
/// empty for deterministic nodes.
struct SampleBatch {
  std::vector<std::string> node_ids;
  std::vector<MatrixXd> values;
  std::vector<MatrixXd> noise;
  MatrixXd x;  // concatenated input nodes (d_in x B)
  MatrixXd y;  // concatenated output nodes (d_out x B)

  Index size() const { return x.cols(); }
  const MatrixXd& value(const std::string& id) const;
  /// Rows of the listed nodes stacked in order.
  MatrixXd stack(const std::vector<std::string>& ids) const;
};

/// Checks structure and returns a topological order of node indices
/// (parents first; ties keep declaration order).
std::vector<Index> validate(const DagSpec& spec);
std::vector<std::string> topological_ids(const DagSpec& spec);

/// Parameter length a node expects from the store.
Index expected_param_length(const NodeSpec& node, const DagSpec& spec);
/// Throws DimMismatch/InvalidSpec when the store cannot drive the DAG.
void check_params(const DagSpec& spec, const ParamStore& params);

/// Draws Gaussian inputs (d_in x B) from the configured priors.
MatrixXd sample_inputs(const DagSpec& spec, Index batch, std::uint64_t seed, std::uint64_t first_index = 0);

/// Runs the DAG on x_batch with fresh noise. Sample b uses noise index
/// first_index + b, so consecutive chunks concatenate to one large batch.
SampleBatch forward_sample(const DagSpec& spec, const ParamStore& params, const MatrixXd& x_batch,
                           std::uint64_t seed, std::uint64_t first_index = 0);

/// Samples inputs and runs the DAG in one call.
SampleBatch sample_dag(const DagSpec& spec, const ParamStore& params, Index batch, std::uint64_t seed,
                       std::uint64_t first_index = 0);

/// Recomputes every node from the stored inputs and noise under `params`.
SampleBatch replay(const DagSpec& spec, const ParamStore& params, const SampleBatch& batch);

/// Evaluates the deterministic part f_j of one node on its parent values.
MatrixXd evaluate_node(const NodeSpec& node, const std::vector<const MatrixXd*>& parents, const VectorXd* eta);

/// Stacks parent rows for an mlp node.
MatrixXd concat_rows(const std::vector<const MatrixXd*>& parts);

// --- configuration files ----------------------------------------------------

struct DagConfig {
  DagSpec spec;
  ParamStore params;
};

/// Parses the JSON DAG description. Errors name the node and field.
DagConfig parse_dag_config(const std::string& text);
DagConfig load_dag_config(const std::string& path);
std::string dag_config_to_string(const DagConfig& config);

}  // namespace infograd
