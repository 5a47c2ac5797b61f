// SPDX-License-Identifier: Apache-2.0
#include "infograd/graph.hpp"

#include "infograd/neural.hpp"
#include "infograd/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace infograd {
namespace {

bool is_unary(FuncKind f) {
  return f == FuncKind::linear_gain || f == FuncKind::affine || f == FuncKind::tanh_gain ||
         f == FuncKind::sqrt_gain;
}

std::string node_ctx(const NodeSpec& n) { return "node '" + n.id + "'"; }

}  // namespace

std::string to_string(FuncKind kind) {
  switch (kind) {
    case FuncKind::input: return "input";
    case FuncKind::linear_gain: return "linear_gain";
    case FuncKind::affine: return "affine";
    case FuncKind::weighted_sum: return "weighted_sum";
    case FuncKind::tanh_gain: return "tanh_gain";
    case FuncKind::sqrt_gain: return "sqrt_gain";
    case FuncKind::mlp: return "mlp";
  }
  return "unknown";
}

FuncKind func_kind_from_string(const std::string& name) {
  for (FuncKind f : {FuncKind::input, FuncKind::linear_gain, FuncKind::affine, FuncKind::weighted_sum,
                     FuncKind::tanh_gain, FuncKind::sqrt_gain, FuncKind::mlp}) {
    if (to_string(f) == name) return f;
  }
  throw Error(ErrorCode::ConfigParse, "unknown function kind '" + name + "'");
}

// --- DagSpec ----------------------------------------------------------------

Index DagSpec::node_index(const std::string& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return static_cast<Index>(i);
  }
  throw Error(ErrorCode::DanglingParent, "no node with id '" + id + "'");
}

const NodeSpec& DagSpec::node(const std::string& id) const { return nodes[node_index(id)]; }

bool DagSpec::has_node(const std::string& id) const {
  return std::any_of(nodes.begin(), nodes.end(), [&](const NodeSpec& n) { return n.id == id; });
}

Index DagSpec::dim_of(const std::vector<std::string>& ids) const {
  Index d = 0;
  for (const auto& id : ids) d += node(id).dim;
  return d;
}

Index DagSpec::input_dim() const { return dim_of(input_ids); }
Index DagSpec::output_dim() const { return dim_of(output_ids); }

double DagSpec::variance_of(const std::string& input_id) const {
  auto it = input_variance.find(input_id);
  return it == input_variance.end() ? 1.0 : it->second;
}

// --- ParamStore -------------------------------------------------------------

const VectorXd& ParamStore::at(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorCode::InvalidSpec, "missing parameter '" + key + "'");
  return it->second;
}

VectorXd& ParamStore::at(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorCode::InvalidSpec, "missing parameter '" + key + "'");
  return it->second;
}

std::vector<std::string> ParamStore::keys() const {
  std::vector<std::string> k;
  for (const auto& [key, _] : entries_) k.push_back(key);
  return k;
}

Index ParamStore::size() const {
  Index n = 0;
  for (const auto& [_, v] : entries_) n += v.size();
  return n;
}

VectorXd ParamStore::flat() const {
  VectorXd out(size());
  Index off = 0;
  for (const auto& [_, v] : entries_) {
    out.segment(off, v.size()) = v;
    off += v.size();
  }
  return out;
}

void ParamStore::set_flat(const VectorXd& flat) {
  if (flat.size() != size()) {
    throw Error(ErrorCode::DimMismatch, "flat vector has length " + std::to_string(flat.size()) +
                                            ", store holds " + std::to_string(size()));
  }
  Index off = 0;
  for (auto& [_, v] : entries_) {
    v = flat.segment(off, v.size());
    off += v.size();
  }
}

ParamStore ParamStore::with_flat(const VectorXd& flat) const {
  ParamStore out = *this;
  out.set_flat(flat);
  return out;
}

// --- SampleBatch ------------------------------------------------------------

const MatrixXd& SampleBatch::value(const std::string& id) const {
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    if (node_ids[i] == id) return values[i];
  }
  throw Error(ErrorCode::InvalidArgument, "batch has no node '" + id + "'");
}

MatrixXd SampleBatch::stack(const std::vector<std::string>& ids) const {
  std::vector<const MatrixXd*> parts;
  for (const auto& id : ids) parts.push_back(&value(id));
  if (parts.empty()) return MatrixXd(0, size());
  return concat_rows(parts);
}

MatrixXd concat_rows(const std::vector<const MatrixXd*>& parts) {
  Index rows = 0;
  for (const auto* p : parts) rows += p->rows();
  MatrixXd out(rows, parts.front()->cols());
  Index off = 0;
  for (const auto* p : parts) {
    out.middleRows(off, p->rows()) = *p;
    off += p->rows();
  }
  return out;
}

// --- validation -------------------------------------------------------------

Index expected_param_length(const NodeSpec& node, const DagSpec& spec) {
  switch (node.func) {
    case FuncKind::input: return 0;
    case FuncKind::linear_gain:
    case FuncKind::tanh_gain:
    case FuncKind::sqrt_gain: return 1;
    case FuncKind::affine: return 2;
    case FuncKind::weighted_sum:
      if (!node.param_key) return 0;
      return node.param_slots.empty() ? static_cast<Index>(node.parents.size())
                                      : static_cast<Index>(node.param_slots.size());
    case FuncKind::mlp: {
      std::vector<Index> widths{spec.dim_of(node.parents)};
      widths.insert(widths.end(), node.hidden.begin(), node.hidden.end());
      widths.push_back(node.dim);
      return Mlp<double>::param_count_for(widths);
    }
  }
  return 0;
}

std::vector<Index> validate(const DagSpec& spec) {
  if (spec.nodes.empty()) throw Error(ErrorCode::InvalidSpec, "DAG has no nodes");
  std::map<std::string, Index> index;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const auto& n = spec.nodes[i];
    if (n.id.empty()) throw Error(ErrorCode::InvalidSpec, "node with empty id");
    if (!index.emplace(n.id, static_cast<Index>(i)).second) {
      throw Error(ErrorCode::InvalidSpec, "duplicate node id '" + n.id + "'");
    }
  }
  for (const auto& n : spec.nodes) {
    for (const auto& p : n.parents) {
      if (!index.count(p)) throw Error(ErrorCode::DanglingParent, node_ctx(n) + ": parent '" + p + "' missing");
    }
  }

  // Kahn's algorithm; the min-heap on declaration index keeps the order stable.
  const std::size_t count = spec.nodes.size();
  std::vector<std::size_t> indegree(count, 0);
  std::vector<std::vector<Index>> children(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (const auto& p : spec.nodes[i].parents) {
      children[index[p]].push_back(static_cast<Index>(i));
      ++indegree[i];
    }
  }
  std::priority_queue<Index, std::vector<Index>, std::greater<>> ready;
  for (std::size_t i = 0; i < count; ++i) {
    if (indegree[i] == 0) ready.push(static_cast<Index>(i));
  }
  std::vector<Index> order;
  while (!ready.empty()) {
    const Index i = ready.top();
    ready.pop();
    order.push_back(i);
    for (Index c : children[i]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (order.size() != count) {
    for (std::size_t i = 0; i < count; ++i) {
      if (indegree[i] > 0) throw Error(ErrorCode::CycleDetected, "cycle through node '" + spec.nodes[i].id + "'");
    }
  }

  for (const auto& n : spec.nodes) {
    if (!(n.noise_std >= 0.0) || !std::isfinite(n.noise_std)) {
      throw Error(ErrorCode::InvalidSpec, node_ctx(n) + ": noise_std must be finite and >= 0");
    }
    if (n.dim <= 0) throw Error(ErrorCode::DimMismatch, node_ctx(n) + ": dim must be positive");
    if (n.func == FuncKind::input) {
      if (!n.parents.empty()) throw Error(ErrorCode::InvalidSpec, node_ctx(n) + ": input node has parents");
      if (n.param_key) throw Error(ErrorCode::InvalidSpec, node_ctx(n) + ": input node has a param_key");
      if (n.noise_std != 0.0) throw Error(ErrorCode::InvalidSpec, node_ctx(n) + ": input node has noise");
      continue;
    }
    if (n.parents.empty()) throw Error(ErrorCode::InvalidSpec, node_ctx(n) + ": non-input node without parents");
    if (is_unary(n.func)) {
      if (n.parents.size() != 1) {
        throw Error(ErrorCode::DimMismatch, node_ctx(n) + ": " + to_string(n.func) + " takes exactly one parent");
      }
      if (spec.node(n.parents[0]).dim != n.dim) {
        throw Error(ErrorCode::DimMismatch, node_ctx(n) + ": parent dim differs from node dim");
      }
    }
    if (n.func == FuncKind::weighted_sum) {
      for (const auto& p : n.parents) {
        if (spec.node(p).dim != n.dim) {
          throw Error(ErrorCode::DimMismatch, node_ctx(n) + ": parent '" + p + "' dim differs from node dim");
        }
      }
      if (!n.weights.empty() && n.weights.size() != n.parents.size()) {
        throw Error(ErrorCode::DimMismatch, node_ctx(n) + ": weights length differs from parent count");
      }
      std::set<Index> seen;
      for (Index s : n.param_slots) {
        if (s < 0 || s >= static_cast<Index>(n.parents.size()) || !seen.insert(s).second) {
          throw Error(ErrorCode::InvalidSpec, node_ctx(n) + ": invalid param_slots entry");
        }
      }
      if (!n.param_slots.empty() && !n.param_key) {
        throw Error(ErrorCode::InvalidSpec, node_ctx(n) + ": param_slots without param_key");
      }
    } else if (!n.param_key) {
      throw Error(ErrorCode::InvalidSpec, node_ctx(n) + ": " + to_string(n.func) + " needs a param_key");
    }
  }

  if (spec.input_ids.empty()) throw Error(ErrorCode::InvalidSpec, "no input nodes designated");
  if (spec.output_ids.empty()) throw Error(ErrorCode::InvalidSpec, "no output nodes designated");
  for (const auto& id : spec.input_ids) {
    if (!index.count(id)) throw Error(ErrorCode::InvalidSpec, "input '" + id + "' is not a node");
    if (spec.nodes[index[id]].func != FuncKind::input) {
      throw Error(ErrorCode::InvalidSpec, "input '" + id + "' is not an input node");
    }
  }
  for (const auto& n : spec.nodes) {
    if (n.func == FuncKind::input &&
        std::find(spec.input_ids.begin(), spec.input_ids.end(), n.id) == spec.input_ids.end()) {
      throw Error(ErrorCode::InvalidSpec, node_ctx(n) + ": input node not listed in inputs");
    }
  }
  std::vector<char> reach(count, 0);
  for (Index i : order) {
    const auto& n = spec.nodes[i];
    if (n.func == FuncKind::input) reach[i] = 1;
    for (const auto& p : n.parents) reach[i] |= reach[index[p]];
  }
  for (const auto& id : spec.output_ids) {
    if (!index.count(id)) throw Error(ErrorCode::InvalidSpec, "output '" + id + "' is not a node");
    if (!reach[index[id]]) throw Error(ErrorCode::InvalidSpec, "output '" + id + "' is unreachable from inputs");
  }
  return order;
}

std::vector<std::string> topological_ids(const DagSpec& spec) {
  std::vector<std::string> ids;
  for (Index i : validate(spec)) ids.push_back(spec.nodes[i].id);
  return ids;
}

void check_params(const DagSpec& spec, const ParamStore& params) {
  for (const auto& n : spec.nodes) {
    if (!n.param_key) continue;
    const Index want = expected_param_length(n, spec);
    if (!params.contains(*n.param_key)) {
      throw Error(ErrorCode::InvalidSpec, node_ctx(n) + ": parameter '" + *n.param_key + "' not in store");
    }
    if (params.at(*n.param_key).size() != want) {
      throw Error(ErrorCode::DimMismatch, node_ctx(n) + ": parameter '" + *n.param_key + "' has length " +
                                              std::to_string(params.at(*n.param_key).size()) + ", expected " +
                                              std::to_string(want));
    }
  }
}

// --- execution --------------------------------------------------------------

MatrixXd evaluate_node(const NodeSpec& node, const std::vector<const MatrixXd*>& parents, const VectorXd* eta) {
  switch (node.func) {
    case FuncKind::input:
      throw Error(ErrorCode::InvalidArgument, "input nodes are not evaluated");
    case FuncKind::linear_gain: return (*eta)(0) * *parents[0];
    case FuncKind::affine: return ((*eta)(0) * parents[0]->array() + (*eta)(1)).matrix();
    case FuncKind::tanh_gain: return ((*eta)(0) * parents[0]->array()).tanh().matrix();
    case FuncKind::sqrt_gain: {
      if ((*eta)(0) < 0.0) {
        throw Error(ErrorCode::InvalidArgument, node_ctx(node) + ": sqrt_gain parameter must be >= 0");
      }
      return std::sqrt((*eta)(0)) * *parents[0];
    }
    case FuncKind::weighted_sum: {
      MatrixXd out = MatrixXd::Zero(node.dim, parents[0]->cols());
      for (std::size_t i = 0; i < parents.size(); ++i) {
        double c = node.weights.empty() ? 1.0 : node.weights[i];
        if (node.param_key) {
          if (node.param_slots.empty()) {
            c = (*eta)(static_cast<Index>(i));
          } else {
            auto it = std::find(node.param_slots.begin(), node.param_slots.end(), static_cast<Index>(i));
            if (it != node.param_slots.end()) c = (*eta)(it - node.param_slots.begin());
          }
        }
        out += c * *parents[i];
      }
      return out;
    }
    case FuncKind::mlp: {
      const MatrixXd in = concat_rows(parents);
      std::vector<Index> widths{in.rows()};
      widths.insert(widths.end(), node.hidden.begin(), node.hidden.end());
      widths.push_back(node.dim);
      Mlp<double> net(widths);
      net.set_flat(*eta);
      return net.forward(in);
    }
  }
  return {};
}

namespace {

SampleBatch run(const DagSpec& spec, const ParamStore& params, const MatrixXd& x_batch,
                const std::vector<MatrixXd>* stored_noise, std::uint64_t seed, std::uint64_t first_index) {
  const auto order = validate(spec);
  check_params(spec, params);
  if (x_batch.cols() == 0) throw Error(ErrorCode::EmptyBatch, "batch size must be positive");
  if (x_batch.rows() != spec.input_dim()) {
    throw Error(ErrorCode::DimMismatch, "x batch has " + std::to_string(x_batch.rows()) + " rows, inputs need " +
                                            std::to_string(spec.input_dim()));
  }
  const Index batch = x_batch.cols();
  SampleBatch out;
  out.x = x_batch;
  out.values.resize(spec.nodes.size());
  out.noise.resize(spec.nodes.size());
  for (const auto& n : spec.nodes) out.node_ids.push_back(n.id);

  Index off = 0;
  for (const auto& id : spec.input_ids) {
    const Index i = spec.node_index(id);
    out.values[i] = x_batch.middleRows(off, spec.nodes[i].dim);
    off += spec.nodes[i].dim;
  }
  for (Index i : order) {
    const auto& n = spec.nodes[i];
    if (n.func == FuncKind::input) continue;
    std::vector<const MatrixXd*> parents;
    for (const auto& p : n.parents) parents.push_back(&out.values[spec.node_index(p)]);
    const VectorXd* eta = n.param_key ? &params.at(*n.param_key) : nullptr;
    MatrixXd v = evaluate_node(n, parents, eta);
    if (n.noise_std > 0.0) {
      MatrixXd z;
      if (stored_noise) {
        z = (*stored_noise)[i];
        if (z.rows() != n.dim || z.cols() != batch) {
          throw Error(ErrorCode::DimMismatch, node_ctx(n) + ": stored noise has the wrong shape");
        }
      } else {
        z.resize(n.dim, batch);
        const CounterRng rng(seed, "noise/" + n.id);
        rng.fill_normal(z, first_index * static_cast<std::uint64_t>(n.dim));
        z *= n.noise_std;
      }
      v += z;
      out.noise[i] = std::move(z);
    }
    out.values[i] = std::move(v);
  }
  std::vector<const MatrixXd*> ys;
  for (const auto& id : spec.output_ids) ys.push_back(&out.values[spec.node_index(id)]);
  out.y = concat_rows(ys);
  return out;
}

}  // namespace

MatrixXd sample_inputs(const DagSpec& spec, Index batch, std::uint64_t seed, std::uint64_t first_index) {
  if (batch <= 0) throw Error(ErrorCode::EmptyBatch, "batch size must be positive");
  MatrixXd x(spec.input_dim(), batch);
  Index off = 0;
  for (const auto& id : spec.input_ids) {
    const Index d = spec.node(id).dim;
    const double var = spec.variance_of(id);
    if (!(var >= 0.0)) throw Error(ErrorCode::InvalidSpec, "input '" + id + "' has negative variance");
    MatrixXd block(d, batch);
    CounterRng(seed, "input/" + id).fill_normal(block, first_index * static_cast<std::uint64_t>(d));
    x.middleRows(off, d) = std::sqrt(var) * block;
    off += d;
  }
  return x;
}

SampleBatch forward_sample(const DagSpec& spec, const ParamStore& params, const MatrixXd& x_batch,
                           std::uint64_t seed, std::uint64_t first_index) {
  return run(spec, params, x_batch, nullptr, seed, first_index);
}

SampleBatch sample_dag(const DagSpec& spec, const ParamStore& params, Index batch, std::uint64_t seed,
                       std::uint64_t first_index) {
  return forward_sample(spec, params, sample_inputs(spec, batch, seed, first_index), seed, first_index);
}

SampleBatch replay(const DagSpec& spec, const ParamStore& params, const SampleBatch& batch) {
  if (batch.noise.size() != spec.nodes.size()) {
    throw Error(ErrorCode::DimMismatch, "batch noise does not match the DAG's node count");
  }
  return run(spec, params, batch.x, &batch.noise, 0, 0);
}

// --- configuration ----------------------------------------------------------

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ConfigParse, where + ": " + what);
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(where + ": field '" + key + "'", e.what());
  }
}

VectorXd param_value(const json& v, const std::string& key, const DagSpec& spec) {
  const std::string where = "params: '" + key + "'";
  if (v.is_number()) return VectorXd::Constant(1, v.get<double>());
  if (v.is_array()) {
    VectorXd out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) config_error(where, "entries must be numbers");
      out(static_cast<Index>(i)) = v[i].get<double>();
    }
    return out;
  }
  if (v.is_object() && v.value("init", "") == "glorot") {
    for (const auto& n : spec.nodes) {
      if (n.param_key == key && n.func == FuncKind::mlp) {
        std::vector<Index> widths{spec.dim_of(n.parents)};
        widths.insert(widths.end(), n.hidden.begin(), n.hidden.end());
        widths.push_back(n.dim);
        return Mlp<double>::glorot(widths, v.value("seed", 0ULL)).flat();
      }
    }
    config_error(where, "glorot init is only defined for mlp parameters");
  }
  config_error(where, "expected a number, an array, or {\"init\": \"glorot\"}");
}

}  // namespace

DagConfig parse_dag_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    config_error("dag config", e.what());
  }
  if (!j.is_object()) config_error("dag config", "top level must be an object");
  static const std::set<std::string> top_keys{"nodes", "inputs", "outputs", "params", "input_dist"};
  for (const auto& [k, _] : j.items()) {
    if (!top_keys.count(k)) config_error("dag config", "unknown key '" + k + "'");
  }
  DagConfig cfg;
  if (!j.contains("nodes") || !j["nodes"].is_array()) config_error("dag config", "'nodes' must be a list");
  static const std::set<std::string> node_keys{"id",     "parents", "func",        "param_key", "noise_std",
                                               "dim",    "weights", "param_slots", "hidden"};
  std::size_t position = 0;
  for (const auto& jn : j["nodes"]) {
    std::string where = "node #" + std::to_string(position++);
    if (!jn.is_object()) config_error(where, "must be an object");
    NodeSpec n;
    n.id = field<std::string>(jn, "id", where);
    where = "node '" + n.id + "'";
    for (const auto& [k, _] : jn.items()) {
      if (!node_keys.count(k)) config_error(where, "unknown field '" + k + "'");
    }
    try {
      n.func = func_kind_from_string(field<std::string>(jn, "func", where));
    } catch (const Error& e) {
      config_error(where + ": field 'func'", e.what());
    }
    if (jn.contains("parents")) n.parents = field<std::vector<std::string>>(jn, "parents", where);
    if (jn.contains("param_key")) n.param_key = field<std::string>(jn, "param_key", where);
    if (jn.contains("noise_std")) n.noise_std = field<double>(jn, "noise_std", where);
    if (jn.contains("dim")) n.dim = field<Index>(jn, "dim", where);
    if (jn.contains("weights")) n.weights = field<std::vector<double>>(jn, "weights", where);
    if (jn.contains("param_slots")) n.param_slots = field<std::vector<Index>>(jn, "param_slots", where);
    if (jn.contains("hidden")) n.hidden = field<std::vector<Index>>(jn, "hidden", where);
    if (n.noise_std < 0.0) config_error(where + ": field 'noise_std'", "must be >= 0");
    if (n.dim <= 0) config_error(where + ": field 'dim'", "must be positive");
    cfg.spec.nodes.push_back(std::move(n));
  }
  cfg.spec.input_ids = field<std::vector<std::string>>(j, "inputs", "dag config");
  cfg.spec.output_ids = field<std::vector<std::string>>(j, "outputs", "dag config");
  if (j.contains("input_dist")) {
    for (const auto& [id, dist] : j["input_dist"].items()) {
      const std::string where = "input_dist: '" + id + "'";
      if (dist.value("type", "gaussian") != "gaussian") config_error(where, "only gaussian inputs are supported");
      const double var = field<double>(dist, "variance", where);
      if (var < 0.0) config_error(where + ": field 'variance'", "must be >= 0");
      cfg.spec.input_variance[id] = var;
    }
  }
  validate(cfg.spec);
  if (j.contains("params")) {
    for (const auto& [key, v] : j["params"].items()) cfg.params.set(key, param_value(v, key, cfg.spec));
  }
  for (const auto& n : cfg.spec.nodes) {
    if (n.param_key && !cfg.params.contains(*n.param_key)) {
      config_error("node '" + n.id + "': field 'param_key'", "parameter '" + *n.param_key + "' has no value");
    }
  }
  check_params(cfg.spec, cfg.params);
  return cfg;
}

DagConfig load_dag_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dag_config(ss.str());
}

std::string dag_config_to_string(const DagConfig& config) {
  json j;
  j["nodes"] = json::array();
  for (const auto& n : config.spec.nodes) {
    json jn{{"id", n.id}, {"func", to_string(n.func)}, {"dim", n.dim}};
    if (!n.parents.empty()) jn["parents"] = n.parents;
    if (n.param_key) jn["param_key"] = *n.param_key;
    if (n.noise_std != 0.0) jn["noise_std"] = n.noise_std;
    if (!n.weights.empty()) jn["weights"] = n.weights;
    if (!n.param_slots.empty()) jn["param_slots"] = n.param_slots;
    if (!n.hidden.empty()) jn["hidden"] = n.hidden;
    j["nodes"].push_back(jn);
  }
  j["inputs"] = config.spec.input_ids;
  j["outputs"] = config.spec.output_ids;
  j["params"] = json::object();
  for (const auto& [k, v] : config.params.entries()) j["params"][k] = std::vector<double>(v.data(), v.data() + v.size());
  j["input_dist"] = json::object();
  for (const auto& id : config.spec.input_ids) {
    j["input_dist"][id] = {{"type", "gaussian"}, {"variance", config.spec.variance_of(id)}};
  }
  return j.dump(2);
}

}  // namespace infograd
