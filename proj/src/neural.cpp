// SPDX-License-Identifier: Apache-2.0
#include "infograd/neural.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace infograd {
namespace {

using FloatMatrix = ScoreNet::Matrix;

struct Corrupted {
  FloatMatrix input;   // concat(y + sqrt(t) z, c)
  FloatMatrix target;  // -(sqrt(t) z) / t
};

// Builds a corrupted mini-batch from sample indices and a noise stream.
template <typename IndexFn>
Corrupted corrupt(const Eigen::MatrixXd& samples, const Eigen::MatrixXd* conditions, Eigen::Index batch,
                  IndexFn&& index_of, const CounterRng& noise, std::uint64_t noise_offset, double t) {
  const Eigen::Index d = samples.rows();
  const Eigen::Index c = conditions ? conditions->rows() : 0;
  Corrupted out{FloatMatrix(d + c, batch), FloatMatrix(d, batch)};
  const double sd = std::sqrt(t);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::Index i = index_of(b);
    for (Eigen::Index k = 0; k < d; ++k) {
      const double z = noise.normal(noise_offset + static_cast<std::uint64_t>(b * d + k));
      out.input(k, b) = static_cast<float>(samples(k, i) + sd * z);
      out.target(k, b) = static_cast<float>(-z / sd);
    }
    for (Eigen::Index k = 0; k < c; ++k) out.input(d + k, b) = static_cast<float>((*conditions)(k, i));
  }
  return out;
}

double batch_loss(const FloatMatrix& out, const FloatMatrix& target) {
  return (out - target).template cast<double>().colwise().squaredNorm().mean();
}

void check_data(const Eigen::MatrixXd& samples, const Eigen::MatrixXd* conditions) {
  if (samples.cols() == 0 || samples.rows() == 0) {
    throw Error(ErrorCode::EmptyDataset, "no training samples");
  }
  if (conditions && conditions->cols() != samples.cols()) {
    throw Error(ErrorCode::DimMismatch, "condition batch is not aligned with samples");
  }
}

}  // namespace

void DsmConfig::validate() const {
  if (!(dsm_noise_var > 0.0)) throw Error(ErrorCode::InvalidArgument, "dsm_noise_var must be > 0");
  if (steps < 0) throw Error(ErrorCode::InvalidArgument, "steps must be >= 0");
  if (batch_size <= 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be > 0");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be > 0");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw Error(ErrorCode::InvalidArgument, "ema_decay must lie in [0, 1)");
}

ScoreNet train_dsm(const Eigen::MatrixXd& samples, const Eigen::MatrixXd* conditions, const DsmConfig& config,
                   const ScoreNet* warm_start, DsmReport* report) {
  config.validate();
  check_data(samples, conditions);
  const Eigen::Index d = samples.rows();
  const Eigen::Index c = conditions ? conditions->rows() : 0;
  const auto n = static_cast<std::uint64_t>(samples.cols());

  ScoreNet net;
  if (warm_start) {
    if (warm_start->input_dim() != d + c || warm_start->output_dim() != d) {
      throw Error(ErrorCode::DimMismatch, "warm-start network does not match data dimensions");
    }
    net = *warm_start;
  } else {
    std::vector<Eigen::Index> widths{d + c};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(d);
    net = ScoreNet::glorot(widths, config.seed);
  }

  const CounterRng rng(config.seed, "dsm");
  const CounterRng index_rng = rng.split("index");
  const CounterRng noise_rng = rng.split("noise");

  const Eigen::Index val_batch = std::min<Eigen::Index>(config.validation_size, samples.cols());
  const CounterRng val_rng = rng.split("validation");
  const Corrupted validation = corrupt(
      samples, conditions, val_batch, [&](Eigen::Index b) { return static_cast<Eigen::Index>(val_rng.below(b, n)); },
      val_rng.split("noise"), 0, config.dsm_noise_var);
  const double initial = batch_loss(net.forward(validation.input), validation.target);

  AdamW<float> optimizer(net, AdamWConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  const Eigen::Index batch = config.batch_size;
  ScoreNet::Cache cache;
  ScoreNet::Gradients grads;
  ScoreNet average = net;
  const auto decay = static_cast<float>(config.ema_decay);
  for (int step = 0; step < config.steps; ++step) {
    if (config.cosine_decay) {
      optimizer.set_learning_rate(0.5 * config.learning_rate *
                                  (1.0 + std::cos(std::numbers::pi * step / static_cast<double>(config.steps))));
    }
    const std::uint64_t base = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(batch);
    const Corrupted mb = corrupt(
        samples, conditions, batch,
        [&](Eigen::Index b) { return static_cast<Eigen::Index>(index_rng.below(base + b, n)); }, noise_rng,
        base * static_cast<std::uint64_t>(d), config.dsm_noise_var);
    const FloatMatrix out = net.forward(mb.input, cache);
    const FloatMatrix diff = out - mb.target;
    const double loss = diff.cast<double>().colwise().squaredNorm().mean();
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "DSM loss diverged at step " + std::to_string(step));
    }
    const FloatMatrix cotangent = diff * (2.0f / static_cast<float>(batch));
    net.backward(cache, cotangent, grads, false);
    optimizer.step(net, grads);
    if (decay > 0.0f) {
      for (std::size_t l = 0; l < net.num_layers(); ++l) {
        average.weight(l) = decay * average.weight(l) + (1.0f - decay) * net.weight(l);
        average.bias(l) = decay * average.bias(l) + (1.0f - decay) * net.bias(l);
      }
    }
  }
  if (decay > 0.0f && config.steps > 0) net = std::move(average);

  const double final_loss = batch_loss(net.forward(validation.input), validation.target);
  if (!std::isfinite(final_loss) || !net.all_finite()) {
    throw Error(ErrorCode::NonFiniteLoss, "DSM training produced non-finite weights");
  }
  if (report) *report = DsmReport{initial, final_loss, config.steps};
  return net;
}

double dsm_loss(const ScoreNet& net, const Eigen::MatrixXd& samples, const Eigen::MatrixXd* conditions,
                double dsm_noise_var, std::uint64_t seed) {
  check_data(samples, conditions);
  const Corrupted all = corrupt(
      samples, conditions, samples.cols(), [](Eigen::Index b) { return b; },
      CounterRng(seed, "dsm-loss"), 0, dsm_noise_var);
  return batch_loss(net.forward(all.input), all.target);
}

Eigen::MatrixXd evaluate(const ScoreNet& net, const Eigen::MatrixXd& input) {
  return net.forward(input.cast<float>()).cast<double>();
}

std::string checkpoint_to_string(const ScoreNet& net, double dsm_noise_var) {
  nlohmann::json j;
  j["format"] = "infograd-mlp";
  j["version"] = 1;
  j["scalar"] = "float32";
  j["widths"] = net.widths();
  j["dsm_noise_var"] = dsm_noise_var;
  const auto flat = net.flat();
  std::vector<double> weights(flat.data(), flat.data() + flat.size());
  j["weights"] = weights;
  return j.dump();
}

Checkpoint checkpoint_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "infograd-mlp" || j.value("version", 0) != 1) {
    throw Error(ErrorCode::ConfigParse, "checkpoint: unsupported format or version");
  }
  try {
    Checkpoint ck{ScoreNet(j.at("widths").get<std::vector<Eigen::Index>>()), j.at("dsm_noise_var").get<double>()};
    const auto weights = j.at("weights").get<std::vector<double>>();
    ck.net.set_flat(Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size())));
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const ScoreNet& net, double dsm_noise_var) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << checkpoint_to_string(net, dsm_noise_var) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace infograd
