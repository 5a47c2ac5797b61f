// SPDX-License-Identifier: Apache-2.0
#include "infograd/experiments.hpp"

#include "infograd/calibrate.hpp"
#include "infograd/gradient.hpp"
#include "infograd/mi.hpp"
#include "infograd/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#ifndef INFOGRAD_VERSION
#define INFOGRAD_VERSION "unknown"
#endif

namespace infograd {

namespace fs = std::filesystem;

std::string version_string() { return "infograd " INFOGRAD_VERSION; }

// --- tables -----------------------------------------------------------------

void Table::add(std::vector<double> row) {
  if (row.size() != columns.size()) throw Error(ErrorCode::ShapeMismatch, "row width differs from the header");
  rows.push_back(std::move(row));
}

std::vector<double> Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw Error(ErrorCode::InvalidArgument, "no column '" + name + "'");
  const auto c = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

std::string Table::to_csv() const {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17);
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << "\r\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) os << ',';
      if (std::isnan(r[i])) {
        os << "nan";
      } else {
        os << r[i];
      }
    }
    os << "\r\n";
  }
  return os.str();
}

// --- configuration ----------------------------------------------------------

namespace {

const char* kMultipath = R"({
  "nodes": [
    {"id": "x", "func": "input"},
    {"id": "v1", "func": "linear_gain", "parents": ["x"], "param_key": "eta1", "noise_std": 1.0},
    {"id": "v2", "func": "weighted_sum", "parents": ["x"], "noise_std": 1.0},
    {"id": "y", "func": "weighted_sum", "parents": ["v1", "v2"], "param_key": "eta2", "param_slots": [0], "noise_std": 1.0}
  ],
  "inputs": ["x"], "outputs": ["y"],
  "params": {"eta1": 1.0, "eta2": 1.0},
  "input_dist": {"x": {"type": "gaussian", "variance": 1.0}}
})";

const char* kCascade = R"({
  "nodes": [
    {"id": "x", "func": "input"},
    {"id": "y1", "func": "linear_gain", "parents": ["x"], "param_key": "eta1", "noise_std": 1.0},
    {"id": "y2", "func": "weighted_sum", "parents": ["y1"], "noise_std": 1.0}
  ],
  "inputs": ["x"], "outputs": ["y2"],
  "params": {"eta1": 1.0},
  "input_dist": {"x": {"type": "gaussian", "variance": 1.0}}
})";

const char* kTanh = R"({
  "nodes": [
    {"id": "x", "func": "input"},
    {"id": "y", "func": "tanh_gain", "parents": ["x"], "param_key": "eta", "noise_std": 0.5}
  ],
  "inputs": ["x"], "outputs": ["y"],
  "params": {"eta": 1.0},
  "input_dist": {"x": {"type": "gaussian", "variance": 1.0}}
})";

const char* kScalar = R"({
  "nodes": [
    {"id": "x", "func": "input"},
    {"id": "y", "func": "linear_gain", "parents": ["x"], "param_key": "eta", "noise_std": 1.0}
  ],
  "inputs": ["x"], "outputs": ["y"],
  "params": {"eta": 1.0},
  "input_dist": {"x": {"type": "gaussian", "variance": 1.0}}
})";

const char* kMac = R"({
  "nodes": [
    {"id": "xt1", "func": "input"},
    {"id": "xt2", "func": "input"},
    {"id": "x1", "func": "sqrt_gain", "parents": ["xt1"], "param_key": "p1"},
    {"id": "x2", "func": "sqrt_gain", "parents": ["xt2"], "param_key": "p2"},
    {"id": "y", "func": "weighted_sum", "parents": ["x1", "x2"], "noise_std": 1.0}
  ],
  "inputs": ["xt1", "xt2"], "outputs": ["y"],
  "params": {"p1": 1.0, "p2": 1.0},
  "input_dist": {"xt1": {"type": "gaussian", "variance": 1.0}, "xt2": {"type": "gaussian", "variance": 1.0}}
})";

Json dsm_defaults(int steps) {
  return {{"dsm_noise_var", 0.05}, {"dsm_batch", 4096},       {"dsm_steps", steps},
          {"learning_rate", 1e-3}, {"weight_decay", 1e-4},   {"hidden", {128, 128, 128}}};
}

Json merged(Json a, const Json& b) {
  for (const auto& [k, v] : b.items()) a[k] = v;
  return a;
}

DsmConfig dsm_from(const Json& c) {
  DsmConfig d;
  d.dsm_noise_var = c.at("dsm_noise_var").get<double>();
  d.batch_size = c.at("dsm_batch").get<Index>();
  d.steps = c.at("dsm_steps").get<int>();
  d.learning_rate = c.at("learning_rate").get<double>();
  d.weight_decay = c.at("weight_decay").get<double>();
  d.hidden = c.at("hidden").get<std::vector<Index>>();
  d.validate();
  return d;
}

std::uint64_t sub_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0) {
  return CounterRng(seed, purpose).bits(index);
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(precision) << v;
  return os.str();
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw Error(ErrorCode::ConfigParse, "grid_points must be >= 1");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
  return out;
}

double closed_form_mi(const DagSpec& spec, const ParamStore& p) { return gaussian_mi_closed_form(spec, p).value; }

/// d I / d params[key] by central differences of the closed form.
double closed_form_gradient(const DagSpec& spec, const ParamStore& p, const std::string& key, double h = 1e-6) {
  ParamStore plus = p, minus = p;
  plus.at(key)(0) += h;
  minus.at(key)(0) -= h;
  return (closed_form_mi(spec, plus) - closed_form_mi(spec, minus)) / (2.0 * h);
}

struct LearnedScores {
  ScoreFn marginal;
  ScoreFn conditional;
  double c_marginal = 1.0;
  double c_conditional = 1.0;
};

/// DSM networks for s_Y and s_{Y|X} on fresh DAG draws; the marginal score is
/// always Stein-calibrated, the conditional one on request.
LearnedScores learn_scores(const DagSpec& spec, const ParamStore& params, const DsmConfig& dsm, int conditional_steps,
                           Index train_samples, bool calibrate_conditional, int replicates, std::uint64_t seed) {
  const SampleBatch train = sample_dag(spec, params, train_samples, sub_seed(seed, "train"));
  DsmConfig d = dsm;
  d.seed = sub_seed(seed, "dsm-marginal");
  auto m = std::make_shared<const ScoreNet>(train_dsm(train.y, nullptr, d));
  d.seed = sub_seed(seed, "dsm-conditional");
  d.steps = conditional_steps;
  auto c = std::make_shared<const ScoreNet>(train_dsm(train.y, &train.x, d));
  LearnedScores out{neural_score(m, ScoreKind::marginal, dsm.dsm_noise_var),
                    neural_score(c, ScoreKind::conditional_on_x, dsm.dsm_noise_var)};
  const SteinCalibration cm = stein_calibrate_marginal(out.marginal, train.y);
  out.marginal = cm.score;
  out.c_marginal = cm.scale;
  if (calibrate_conditional) {
    MatrixXd mean;
    try {
      mean = conditional_mean_linear(linear_gaussian_reduce(spec, params), spec.input_ids, train.x);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonlinearNode) throw;
      mean = conditional_mean_replicates(spec, params, train.x, out.conditional, spec.input_ids, dsm.dsm_noise_var,
                                         replicates, sub_seed(seed, "replicates"));
    }
    const SteinCalibration cc = stein_calibrate_conditional(out.conditional, train.y, train.x, mean);
    out.conditional = cc.score;
    out.c_conditional = cc.scale;
  }
  return out;
}

GradientEstimate analytic_score_gradient(const DagSpec& spec, const ParamStore& params, Index samples, Index chunk,
                                         std::uint64_t seed) {
  const LinearGaussianReduction r = linear_gaussian_reduce(spec, params);
  return info_gradient_mc(spec, params, analytic_marginal_score(r), analytic_conditional_score(r, spec.input_ids),
                          samples, seed, chunk);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Central-difference error of the closed-form reference.
constexpr double kOracleSlack = 1e-8;

}  // namespace

std::vector<std::string> command_names() {
  return {"sweep-multipath", "pga-multipath", "tanh-sweep", "mac-region", "cascade-check", "fisher-mi",
          "calibrate-demo"};
}

Json default_config(const std::string& command) {
  if (command == "sweep-multipath") {
    return merged({{"dag", "multipath"},
                   {"keys", {"eta1", "eta2"}},
                   {"grid_min", -2.0},
                   {"grid_max", 2.0},
                   {"grid_points", 21},
                   {"eta_fixed", 1.0},
                   {"samples", 100000},
                   {"chunk", 8192},
                   {"learned", true},
                   {"train_samples", 100000}},
                  dsm_defaults(500));
  }
  if (command == "pga-multipath") {
    return merged({{"dag", "multipath"},
                   {"keys", {"eta1", "eta2"}},
                   {"eta_init", {1.0, 0.0}},
                   {"budget", 1.0},
                   {"step_size", 0.1},
                   {"iterations", 35},
                   {"samples", 100000},
                   {"chunk", 8192},
                   {"learned", true},
                   {"initial_dsm_steps", 1000},
                   {"refresh_dsm_steps", 200},
                   {"train_samples", 100000},
                   {"restarts", 1},
                   {"grid_angles", 3600}},
                  dsm_defaults(500));
  }
  if (command == "tanh-sweep") {
    return merged({{"eta_min", -3.0},
                   {"eta_max", 3.0},
                   {"grid_points", 13},
                   {"noise_var", 0.25},
                   {"fd_step", 0.01},
                   {"order", 512},
                   {"y_points", 2001},
                   {"grid_sd", 8.0},
                   {"samples", 100000},
                   {"chunk", 8192},
                   {"learned", true},
                   {"train_samples", 100000},
                   {"mean_replicates", 16},
                   {"conditional_dsm_steps", 2000}},
                  dsm_defaults(1000));
  }
  if (command == "mac-region") {
    return merged({{"noise_var", 1.0},
                   {"total_power", 2.0},
                   {"weights", 10},
                   {"step_size", 2.0},
                   {"max_iterations", 300},
                   {"tolerance", 1e-4},
                   {"samples", 100000},
                   {"chunk", 8192},
                   {"average_tail", 100},
                   {"power_floor", 0.05},
                   {"score_mode", "analytic"},
                   {"initial_dsm_steps", 1000},
                   {"refresh_dsm_steps", 200},
                   {"train_samples", 50000},
                   {"fisher_points", 64},
                   {"fisher_samples", 20000},
                   {"fisher_dsm_steps", 2000}},
                  dsm_defaults(500));
  }
  if (command == "cascade-check") {
    return {{"dag", "cascade"}, {"key", "eta1"}, {"grid", {-2.0, -1.0, 0.0, 1.0, 2.0}}, {"samples", 100000},
            {"chunk", 8192}};
  }
  if (command == "fisher-mi") {
    return {{"dag", "scalar"}, {"key", "eta"}, {"gains", {1.0, 0.0}}, {"points", 64}, {"samples", 100000}};
  }
  if (command == "calibrate-demo") {
    return merged({{"eta_true", 1.5},
                   {"eta0", 0.5},
                   {"noise_var", 1.0},
                   {"real_samples", 20000},
                   {"eta_min", 0.0},
                   {"eta_max", 3.0},
                   {"eta_draws", 512},
                   {"samples_per_draw", 256},
                   {"real_dsm_steps", 1000},
                   {"twin_dsm_steps", 2000},
                   {"stein_calibrate_real", true},
                   {"step_size", 1.0},
                   {"iterations", 100},
                   {"batch_size", 20000}},
                  dsm_defaults(1000));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
}

Json resolve_config(const std::string& command, const RunOptions& options) {
  Json config = default_config(command);
  auto assign = [&](const std::string& key, const Json& value, const std::string& origin) {
    if (!config.contains(key)) throw Error(ErrorCode::ConfigParse, origin + ": unknown key '" + key + "'");
    const Json& old = config[key];
    const bool ok = (old.is_number() && value.is_number()) || (old.is_boolean() && value.is_boolean()) ||
                    (old.is_string() && value.is_string()) || (old.is_array() && value.is_array());
    if (!ok) throw Error(ErrorCode::ConfigParse, origin + ": key '" + key + "' has the wrong type");
    config[key] = value;
  };
  if (!options.config_path.empty()) {
    std::ifstream in(options.config_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config '" + options.config_path + "'");
    Json file;
    try {
      file = Json::parse(in);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ConfigParse, options.config_path + ": " + e.what());
    }
    if (!file.is_object()) throw Error(ErrorCode::ConfigParse, options.config_path + ": expected an object");
    for (const auto& [k, v] : file.items()) assign(k, v, options.config_path);
  }
  for (const auto& o : options.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::ConfigParse, "override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(text);
    } catch (const Json::exception&) {
      value = text;
    }
    assign(key, value, "--override");
  }
  return config;
}

DagConfig builtin_dag(const std::string& name) {
  if (name == "multipath") return parse_dag_config(kMultipath);
  if (name == "cascade") return parse_dag_config(kCascade);
  if (name == "tanh") return parse_dag_config(kTanh);
  if (name == "scalar") return parse_dag_config(kScalar);
  if (name == "mac") return parse_dag_config(kMac);
  throw Error(ErrorCode::InvalidArgument, "no built-in DAG named '" + name + "'");
}

DagConfig dag_from_config(const Json& config, const std::string& fallback) {
  const std::string name = config.value("dag", fallback);
  if (name.find('/') == std::string::npos && name.find(".json") == std::string::npos) return builtin_dag(name);
  return load_dag_config(name);
}

// --- sweep-multipath --------------------------------------------------------

ExperimentOutput run_sweep_multipath(const Json& c, std::uint64_t seed) {
  const DagConfig dag = dag_from_config(c, "multipath");
  const auto keys = c.at("keys").get<std::vector<std::string>>();
  if (keys.size() != 2) throw Error(ErrorCode::ConfigParse, "'keys' must name two parameters");
  const auto grid = linspace(c.at("grid_min"), c.at("grid_max"), c.at("grid_points"));
  const Index samples = c.at("samples");
  const Index chunk = c.at("chunk");
  const bool learned = c.at("learned");
  const DsmConfig dsm = dsm_from(c);

  ExperimentOutput out;
  std::ostringstream report;
  for (std::size_t s = 0; s < 2; ++s) {
    const std::string& vary = keys[s];
    const std::string& fixed = keys[1 - s];
    Table t;
    t.columns = {"eta", "grad_analytic", "grad_mc_analytic_scores", "grad_mc_learned_scores",
                 "se_mc", "c_stein", "se_mc_learned"};
    int ok_analytic = 0, ok_learned = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      ParamStore p = dag.params;
      p.set(vary, grid[i]);
      p.set(fixed, c.at("eta_fixed").get<double>());
      const std::uint64_t point_seed = CounterRng(seed, "sweep").split(s).bits(i);
      const double exact = closed_form_gradient(dag.spec, p, vary);
      const GradientEstimate ga = analytic_score_gradient(dag.spec, p, samples, chunk, sub_seed(point_seed, "mc"));
      const double g = ga[vary](0), se = ga.se.at(vary)(0);
      ok_analytic += std::abs(g - exact) <= 3.0 * se + kOracleSlack;
      double gl = kNaN, sel = kNaN, cst = kNaN;
      if (learned) {
        const LearnedScores ls = learn_scores(dag.spec, p, dsm, dsm.steps, c.at("train_samples"), false, 1, point_seed);
        const GradientEstimate gl_est = info_gradient_mc(dag.spec, p, ls.marginal, ls.conditional, samples,
                                                         sub_seed(point_seed, "mc-learned"), chunk);
        gl = gl_est[vary](0);
        sel = gl_est.se.at(vary)(0);
        cst = ls.c_marginal;
        ok_learned += std::abs(gl - exact) <= std::max({3.0 * sel, 0.1 * std::abs(exact), 0.02});
      }
      t.add({grid[i], exact, g, gl, se, cst, sel});
    }
    const double n = static_cast<double>(grid.size());
    const bool pass_a = ok_analytic >= 0.95 * n;
    const bool pass_l = !learned || ok_learned >= 0.90 * n;
    out.passed = out.passed && pass_a && pass_l;
    report << "sweep " << vary << " (" << fixed << " = " << fmt(c.at("eta_fixed").get<double>()) << "): analytic-score "
           << ok_analytic << "/" << grid.size() << " within 3 SE";
    if (learned) report << ", learned-score " << ok_learned << "/" << grid.size() << " within tolerance";
    report << (pass_a && pass_l ? "  [pass]" : "  [FAIL]") << "\n";
    out.tables["sweep_" + vary + ".csv"] = std::move(t);
  }
  out.report = report.str();
  return out;
}

// --- pga-multipath ----------------------------------------------------------

ExperimentOutput run_pga_multipath(const Json& c, std::uint64_t seed) {
  const DagConfig dag = dag_from_config(c, "multipath");
  const auto keys = c.at("keys").get<std::vector<std::string>>();
  const auto init_values = c.at("eta_init").get<std::vector<double>>();
  if (keys.size() != 2 || init_values.size() != 2) {
    throw Error(ErrorCode::ConfigParse, "'keys' and 'eta_init' must have two entries");
  }
  ParamStore init = dag.params;
  init.set(keys[0], init_values[0]);
  init.set(keys[1], init_values[1]);
  if (init.size() != 2) throw Error(ErrorCode::ConfigParse, "the DAG must have exactly the two swept parameters");

  PgaConfig cfg;
  cfg.step_size = c.at("step_size");
  cfg.iterations = c.at("iterations");
  cfg.budget = c.at("budget");
  cfg.samples = c.at("samples");
  cfg.chunk = c.at("chunk");
  cfg.initial_dsm_steps = c.at("initial_dsm_steps");
  cfg.refresh_dsm_steps = c.at("refresh_dsm_steps");
  cfg.train_samples = c.at("train_samples");
  cfg.restarts = c.at("restarts");
  cfg.dsm = dsm_from(c);
  cfg.seed = seed;
  const MiEvaluator mi = [&](const ParamStore& p) { return closed_form_mi(dag.spec, p); };

  // Grid-search optimum on the constraint circle.
  const int angles = c.at("grid_angles");
  double best = -1.0;
  for (int k = 0; k < angles; ++k) {
    const double th = 2.0 * std::numbers::pi * k / angles;
    ParamStore p = init;
    p.set(keys[0], std::sqrt(cfg.budget) * std::cos(th));
    p.set(keys[1], std::sqrt(cfg.budget) * std::sin(th));
    best = std::max(best, mi(p));
  }

  Table t;
  t.columns = {"iter", keys[0], keys[1], "mi_analytic_eval", "mi_learned_run_flag", "grad_norm", "c_marginal",
               "c_conditional"};
  auto append = [&](const PgaTrace& trace, double flag) {
    for (const auto& s : trace.steps) {
      t.add({static_cast<double>(s.iteration), s.params(0), s.params(1), s.mi, flag, s.grad_norm, s.scale_marginal,
             s.scale_conditional});
    }
  };
  auto max_norm_dev = [&](const PgaTrace& trace) {
    double dev = 0.0;
    for (const auto& s : trace.steps) dev = std::max(dev, std::abs(s.params.norm() - std::sqrt(cfg.budget)));
    return dev;
  };

  std::ostringstream report;
  cfg.score_mode = ScoreMode::analytic;
  const PgaTrace analytic = pga_run(dag.spec, init, cfg, mi);
  append(analytic, 0.0);
  const bool pass_a = !analytic.aborted && std::abs(analytic.final_mi - best) <= 1e-3;
  report << "grid-search optimum over " << angles << " angles: " << fmt(best, 8) << "\n"
         << "analytic-score PGA final MI: " << fmt(analytic.final_mi, 8) << " (gap "
         << fmt(best - analytic.final_mi, 3) << ")" << (pass_a ? "  [pass]" : "  [FAIL]") << "\n";
  bool pass_l = true;
  if (c.at("learned").get<bool>()) {
    cfg.score_mode = ScoreMode::learned;
    const PgaTrace learned = pga_run(dag.spec, init, cfg, mi);
    append(learned, 1.0);
    const double dev = max_norm_dev(learned);
    pass_l = !learned.aborted && std::abs(learned.final_mi - analytic.final_mi) <= 0.01 && dev <= 1e-9;
    report << "learned-score PGA final MI: " << fmt(learned.final_mi, 8) << " (vs analytic "
           << fmt(learned.final_mi - analytic.final_mi, 3) << "), max | ||eta|| - sqrt(P) | = " << fmt(dev, 3)
           << (pass_l ? "  [pass]" : "  [FAIL]") << "\n";
    if (learned.aborted) report << "learned run aborted: " << learned.abort_reason << "\n";
  }
  ExperimentOutput out;
  out.passed = pass_a && pass_l;
  out.tables["pga_trace.csv"] = std::move(t);
  out.report = report.str();
  return out;
}

// --- tanh-sweep -------------------------------------------------------------

ExperimentOutput run_tanh_sweep(const Json& c, std::uint64_t seed) {
  const double noise_var = c.at("noise_var");
  DagConfig dag = builtin_dag("tanh");
  dag.spec.nodes[dag.spec.node_index("y")].noise_std = std::sqrt(noise_var);
  const ScalarChannel channel{[](double eta, double x) { return std::tanh(eta * x); }, noise_var, 1.0};
  QuadratureConfig q;
  q.order = c.at("order");
  q.grid_points = c.at("y_points");
  q.grid_sd = c.at("grid_sd");
  const double h = c.at("fd_step");
  const bool learned = c.at("learned");
  const DsmConfig dsm = dsm_from(c);
  const auto grid = linspace(c.at("eta_min"), c.at("eta_max"), c.at("grid_points"));

  Table t;
  t.columns = {"eta", "mi_quadrature", "grad_fd", "grad_score_learned", "se", "c_marginal", "c_conditional"};
  double max_asym = 0.0, max_dev = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double eta = grid[i];
    const double mi = quadrature_mi_scalar(channel, eta, q).value;
    max_asym = std::max(max_asym, std::abs(mi - quadrature_mi_scalar(channel, -eta, q).value));
    const double fd = finite_diff_mi_gradient(channel, eta, h, q);
    double gl = kNaN, se = kNaN, cm = kNaN, cc = kNaN;
    if (learned) {
      ParamStore p = dag.params;
      p.set("eta", eta);
      const std::uint64_t point_seed = CounterRng(seed, "tanh").bits(i);
      const LearnedScores ls =
          learn_scores(dag.spec, p, dsm, c.at("conditional_dsm_steps"), c.at("train_samples"), true,
                       c.at("mean_replicates"), point_seed);
      const GradientEstimate g = info_gradient_mc(dag.spec, p, ls.marginal, ls.conditional, c.at("samples"),
                                                  sub_seed(point_seed, "mc"), c.at("chunk"));
      gl = g["eta"](0);
      se = g.se.at("eta")(0);
      cm = ls.c_marginal;
      cc = ls.c_conditional;
      max_dev = std::max(max_dev, std::abs(gl - fd));
    }
    t.add({eta, mi, fd, gl, se, cm, cc});
  }
  ExperimentOutput out;
  const bool pass_even = max_asym <= 1e-6;
  const bool pass_grad = !learned || max_dev <= 0.02;
  out.passed = pass_even && pass_grad;
  std::ostringstream report;
  report << "max |I(eta) - I(-eta)| = " << fmt(max_asym, 3) << (pass_even ? "  [pass]" : "  [FAIL]") << "\n";
  if (learned) {
    report << "max |learned-score gradient - finite difference| = " << fmt(max_dev, 4)
           << (pass_grad ? "  [pass]" : "  [FAIL]") << "\n";
  }
  out.tables["tanh_sweep.csv"] = std::move(t);
  out.report = report.str();
  return out;
}

// --- mac-region -------------------------------------------------------------

ExperimentOutput run_mac_region(const Json& c, std::uint64_t seed) {
  const double noise_var = c.at("noise_var");
  const MacModel mac = gaussian_mac(noise_var);
  RateRegionConfig cfg;
  cfg.total_power = c.at("total_power");
  cfg.weights = c.at("weights");
  cfg.step_size = c.at("step_size");
  cfg.max_iterations = c.at("max_iterations");
  cfg.tolerance = c.at("tolerance");
  cfg.samples = c.at("samples");
  cfg.chunk = c.at("chunk");
  cfg.average_tail = c.at("average_tail");
  cfg.power_floor = c.at("power_floor");
  cfg.score_mode = score_mode_from_string(c.at("score_mode"));
  cfg.dsm = dsm_from(c);
  cfg.initial_dsm_steps = c.at("initial_dsm_steps");
  cfg.refresh_dsm_steps = c.at("refresh_dsm_steps");
  cfg.train_samples = c.at("train_samples");
  cfg.fisher_points = c.at("fisher_points");
  cfg.fisher_samples = c.at("fisher_samples");
  cfg.fisher_dsm_steps = c.at("fisher_dsm_steps");
  cfg.seed = seed;
  const RateRegionResult region = rate_region_explore(mac, cfg);

  // Reference route: KKT solution of the weighted sum rate, clamped to the simplex.
  const double P = cfg.total_power;
  Table t;
  t.columns = {"lambda", "p1", "p2", "r1", "r2", "p1_analytic", "p2_analytic", "r1_analytic", "r2_analytic",
               "iterations"};
  bool pass = true;
  int worst_index = -1;
  double worst = 0.0;
  for (std::size_t i = 0; i < region.points.size(); ++i) {
    const RatePoint& r = region.points[i];
    const double p1a = std::clamp(r.lambda * (P + 2.0 * noise_var) - noise_var, 0.0, P);
    const double p2a = P - p1a;
    const double r1a = 0.5 * std::log1p(p1a / noise_var);
    const double r2a = 0.5 * std::log1p(p2a / noise_var);
    t.add({r.lambda, r.p1, r.p2, r.r1, r.r2, p1a, p2a, r1a, r2a, static_cast<double>(r.iterations)});
    const bool ok = std::abs(r.p1 - p1a) <= 0.05 && std::abs(r.p2 - p2a) <= 0.05 &&
                    std::abs(r.r1 - r1a) <= 0.01 * r1a + 1e-12 && std::abs(r.r2 - r2a) <= 0.01 * r2a + 1e-12;
    const double dev = std::max(std::abs(r.p1 - p1a), std::abs(r.p2 - p2a));
    if (dev > worst) {
      worst = dev;
      worst_index = static_cast<int>(i);
    }
    pass = pass && ok;
  }
  double hull_gap = 0.0;
  for (const auto& r : region.points) {
    hull_gap = std::max(hull_gap, distance_to_hull_boundary(region.hull, Eigen::Vector2d(r.r1, r.r2)));
  }
  const double r_max = 0.5 * std::log1p(P / noise_var);
  const bool corners_exact = std::abs(region.corners[0].x() - r_max) <= 1e-12 &&
                             std::abs(region.corners[0].y()) <= 1e-12 && std::abs(region.corners[1].x()) <= 1e-12 &&
                             std::abs(region.corners[1].y() - r_max) <= 1e-12;
  pass = pass && corners_exact && hull_gap <= 1e-9;

  Table hull;
  hull.columns = {"r1", "r2"};
  for (const auto& v : region.hull) hull.add({v.x(), v.y()});

  ExperimentOutput out;
  out.passed = pass;
  std::ostringstream report;
  report << "weighted-sum-rate optima for " << region.points.size() << " weights, worst power deviation "
         << fmt(worst, 3);
  if (worst_index >= 0) report << " at lambda = " << fmt(region.points[worst_index].lambda, 3);
  report << "\ncorner points exact: " << (corners_exact ? "yes" : "no") << ", max distance to hull boundary "
         << fmt(hull_gap, 3) << "\n"
         << (pass ? "[pass]" : "[FAIL]") << "\n";
  out.tables["mac_region.csv"] = std::move(t);
  out.tables["mac_hull.csv"] = std::move(hull);
  out.report = report.str();
  return out;
}

// --- cascade-check ----------------------------------------------------------

ExperimentOutput run_cascade_check(const Json& c, std::uint64_t seed) {
  const DagConfig dag = dag_from_config(c, "cascade");
  const std::string key = c.at("key");
  const auto grid = c.at("grid").get<std::vector<double>>();
  Table t;
  t.columns = {key, "grad_analytic", "grad_mc", "se", "z"};
  int beyond = 0;
  std::ostringstream report;
  report << std::setw(8) << key << std::setw(16) << "analytic" << std::setw(16) << "monte carlo" << std::setw(12)
         << "se" << std::setw(10) << "z\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ParamStore p = dag.params;
    p.set(key, grid[i]);
    const double exact = closed_form_gradient(dag.spec, p, key);
    const GradientEstimate g = analytic_score_gradient(dag.spec, p, c.at("samples"), c.at("chunk"),
                                                       CounterRng(seed, "cascade").bits(i));
    const double est = g[key](0), se = g.se.at(key)(0);
    const double z = se > 0.0 ? (est - exact) / se : 0.0;
    beyond += std::abs(est - exact) > 3.0 * se + kOracleSlack;
    t.add({grid[i], exact, est, se, z});
    report << std::setw(8) << fmt(grid[i], 4) << std::setw(16) << fmt(exact, 8) << std::setw(16) << fmt(est, 8)
           << std::setw(12) << fmt(se, 3) << std::setw(10) << fmt(z, 3) << "\n";
  }
  ExperimentOutput out;
  out.passed = beyond <= 0.05 * static_cast<double>(grid.size());
  report << beyond << "/" << grid.size() << " points beyond 3 SE" << (out.passed ? "  [pass]" : "  [FAIL]") << "\n";
  out.tables["cascade.csv"] = std::move(t);
  out.report = report.str();
  return out;
}

// --- fisher-mi --------------------------------------------------------------

ExperimentOutput run_fisher_mi(const Json& c, std::uint64_t seed) {
  const DagConfig dag = dag_from_config(c, "scalar");
  const std::string key = c.at("key");
  const auto gains = c.at("gains").get<std::vector<double>>();
  const NoiseLevelGrid grid = NoiseLevelGrid::uniform_u(c.at("points"));
  Table summary, integrand;
  summary.columns = {key, "mi_fisher", "mi_closed_form", "error"};
  integrand.columns = {key, "t", "u", "integrand", "se"};
  bool pass = true;
  std::ostringstream report;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    ParamStore p = dag.params;
    p.set(key, gains[i]);
    const LinearGaussianReduction r = linear_gaussian_reduce(dag.spec, p);
    ScoreFamily family{[&](double t) { return analytic_conditional_score(r, dag.spec.input_ids,
                                                                         ScoreKind::conditional_on_x, t); },
                       [&](double t) { return analytic_marginal_score(r, t); }, dag.spec.input_ids, {}};
    const std::uint64_t s = CounterRng(seed, "fisher-mi").bits(i);
    const SampleBatch batch = sample_dag(dag.spec, p, c.at("samples"), s);
    const FisherIntegral fi = fisher_integral_mi(batch, family, grid, s);
    const double exact = closed_form_mi(dag.spec, p);
    summary.add({gains[i], fi.estimate.value, exact, fi.estimate.error});
    bool decreasing = true;
    for (std::size_t k = 0; k < grid.t.size(); ++k) {
      integrand.add({gains[i], grid.t[k], grid.u[k], fi.integrand[k], fi.integrand_se[k]});
      if (k > 0 && fi.integrand[k] > fi.integrand[k - 1]) decreasing = false;
    }
    const bool ok = std::abs(fi.estimate.value - exact) <= 0.02 * exact + 3.0 * fi.estimate.error;
    pass = pass && ok;
    report << key << " = " << fmt(gains[i]) << ": Fisher integral " << fmt(fi.estimate.value, 8) << " +- "
           << fmt(fi.estimate.error, 2) << ", closed form " << fmt(exact, 8) << ", integrand "
           << (decreasing ? "decreasing" : "not monotone") << (ok ? "  [pass]" : "  [FAIL]") << "\n";
  }
  ExperimentOutput out;
  out.passed = pass;
  out.tables["fisher_mi.csv"] = std::move(summary);
  out.tables["fisher_integrand.csv"] = std::move(integrand);
  out.report = report.str();
  return out;
}

// --- calibrate-demo ---------------------------------------------------------

ExperimentOutput run_calibrate_demo(const Json& c, std::uint64_t seed) {
  DagConfig dag = builtin_dag("scalar");
  const double noise_var = c.at("noise_var");
  dag.spec.nodes[dag.spec.node_index("y")].noise_std = std::sqrt(noise_var);
  const double eta_true = c.at("eta_true");

  // Hidden ground truth: only the outputs leave this block.
  MatrixXd y_real;
  {
    ParamStore truth = dag.params;
    truth.set("eta", eta_true);
    y_real = sample_dag(dag.spec, truth, c.at("real_samples"), sub_seed(seed, "real-system")).y;
  }

  CalibConfig cfg;
  cfg.param_key = "eta";
  cfg.eta_min = c.at("eta_min");
  cfg.eta_max = c.at("eta_max");
  cfg.eta_draws = c.at("eta_draws");
  cfg.samples_per_draw = c.at("samples_per_draw");
  cfg.real_dsm = dsm_from(c);
  cfg.real_dsm.steps = c.at("real_dsm_steps");
  cfg.twin_dsm = dsm_from(c);
  cfg.twin_dsm.steps = c.at("twin_dsm_steps");
  cfg.stein_calibrate_real = c.at("stein_calibrate_real");
  cfg.step_size = c.at("step_size");
  cfg.iterations = c.at("iterations");
  cfg.batch_size = c.at("batch_size");
  cfg.eta0 = VectorXd::Constant(1, c.at("eta0").get<double>());
  cfg.seed = seed;
  const CalibTrace trace = calibrate_run(y_real, dag.spec, dag.params, cfg);

  Table t;
  t.columns = {"iter", "eta", "divergence", "se"};
  bool nonnegative = true;
  for (const auto& s : trace.steps) {
    t.add({static_cast<double>(s.iteration), s.eta(0), s.divergence, s.se});
    nonnegative = nonnegative && s.divergence >= 0.0;
  }
  const double eta_final = std::abs(trace.final_eta(0));
  const bool recovered = std::abs(eta_final - eta_true) <= 0.05 * std::abs(eta_true);
  const bool descended = trace.steps.back().divergence <= trace.steps.front().divergence;
  ExperimentOutput out;
  out.passed = recovered && descended && nonnegative;
  std::ostringstream report;
  report << "recovered |eta| = " << fmt(eta_final, 6) << " (hidden truth " << fmt(eta_true) << ", rel. error "
         << fmt(std::abs(eta_final - eta_true) / std::abs(eta_true), 3) << ")" << (recovered ? "  [pass]" : "  [FAIL]")
         << "\n"
         << "divergence " << fmt(trace.steps.front().divergence, 4) << " -> " << fmt(trace.steps.back().divergence, 4)
         << ((descended && nonnegative) ? "  [pass]" : "  [FAIL]") << "\n"
         << "real-score Stein factor " << fmt(trace.real_scale, 5) << "\n";
  out.tables["calib_trace.csv"] = std::move(t);
  out.report = report.str();
  return out;
}

// --- dispatch ---------------------------------------------------------------

ExperimentOutput run_experiment(const std::string& command, const Json& config, std::uint64_t seed) {
  if (command == "sweep-multipath") return run_sweep_multipath(config, seed);
  if (command == "pga-multipath") return run_pga_multipath(config, seed);
  if (command == "tanh-sweep") return run_tanh_sweep(config, seed);
  if (command == "mac-region") return run_mac_region(config, seed);
  if (command == "cascade-check") return run_cascade_check(config, seed);
  if (command == "fisher-mi") return run_fisher_mi(config, seed);
  if (command == "calibrate-demo") return run_calibrate_demo(config, seed);
  throw Error(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
}

int run_command(const std::string& command, const RunOptions& options, std::ostream& out) {
  const Json config = resolve_config(command, options);
  const ExperimentOutput result = run_experiment(command, config, options.seed);
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + options.out_dir + "': " + ec.message());
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(fs::path(options.out_dir) / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write '" + name + "' in " + options.out_dir);
    f << text;
  };
  Json manifest{{"command", command},
                {"version", version_string()},
                {"seed", options.seed},
                {"config", config},
                {"passed", result.passed},
                {"outputs", Json::array()}};
  for (const auto& [name, table] : result.tables) {
    write(name, table.to_csv());
    manifest["outputs"].push_back(name);
  }
  write("report.txt", result.report);
  write("manifest.json", manifest.dump(2) + "\n");
  out << result.report;
  return result.passed ? 0 : 2;
}

}  // namespace infograd
