// SPDX-License-Identifier: Apache-2.0
//
// Minimal multilayer perceptron (SiLU hidden layers, linear output), AdamW,
// and a denoising-score-matching training loop.
//
// Batches are stored one sample per column: an input batch is
// (input_dim x B) and an output batch is (output_dim x B).
#pragma once

#include "infograd/error.hpp"
#include "infograd/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace infograd {

namespace detail {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-x).exp()).inverse();
}

}  // namespace detail

template <typename Scalar_>
class Mlp {
 public:
  using Scalar = Scalar_;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Index = Eigen::Index;

  /// Saved forward state. act[0] is the input, act[l+1] the output of layer l.
  /// pre[l] holds the pre-activation of layer l.
  struct Cache {
    std::vector<Matrix> pre;
    std::vector<Matrix> act;
    std::vector<Matrix> sig;  // sigmoid(pre) for hidden layers
    Matrix delta, next;       // backward work buffers, reused across calls
  };

  struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Matrix input;
  };

  Mlp() = default;

  /// Zero-initialized network with the given layer widths (input, hidden..., output).
  explicit Mlp(std::vector<Index> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) {
      throw Error(ErrorCode::InvalidArgument, "mlp needs at least input and output widths");
    }
    for (Index w : widths_) {
      if (w <= 0) throw Error(ErrorCode::InvalidArgument, "mlp widths must be positive");
    }
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      weights_.push_back(Matrix::Zero(widths_[l + 1], widths_[l]));
      biases_.push_back(Vector::Zero(widths_[l + 1]));
    }
  }

  /// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
  static Mlp glorot(std::vector<Index> widths, std::uint64_t seed) {
    Mlp net(std::move(widths));
    const CounterRng rng(seed, "mlp-init");
    std::uint64_t counter = 0;
    for (auto& w : net.weights_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (Index i = 0; i < w.size(); ++i) {
        w.data()[i] = static_cast<Scalar>(limit * (2.0 * rng.uniform(counter++) - 1.0));
      }
    }
    return net;
  }

  const std::vector<Index>& widths() const noexcept { return widths_; }
  Index input_dim() const { return widths_.front(); }
  Index output_dim() const { return widths_.back(); }
  std::size_t num_layers() const noexcept { return weights_.size(); }

  Matrix& weight(std::size_t l) { return weights_[l]; }
  const Matrix& weight(std::size_t l) const { return weights_[l]; }
  Vector& bias(std::size_t l) { return biases_[l]; }
  const Vector& bias(std::size_t l) const { return biases_[l]; }

  Index param_count() const {
    Index n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  Matrix forward(const Matrix& input) const {
    Cache cache;
    return forward(input, cache);
  }

  Matrix forward(const Matrix& input, Cache& cache) const {
    if (input.rows() != input_dim()) {
      throw Error(ErrorCode::DimMismatch, "mlp input has " + std::to_string(input.rows()) +
                                              " rows, expected " + std::to_string(input_dim()));
    }
    const std::size_t layers = weights_.size();
    cache.pre.resize(layers);
    cache.sig.resize(layers);
    cache.act.resize(layers + 1);
    cache.act[0] = input;
    for (std::size_t l = 0; l < layers; ++l) {
      Matrix& z = cache.pre[l];
      z.noalias() = weights_[l] * cache.act[l];
      z.colwise() += biases_[l];
      if (l + 1 == layers) {
        cache.act[l + 1] = z;
      } else {
        cache.sig[l] = detail::sigmoid(z.array()).matrix();
        cache.act[l + 1] = z.cwiseProduct(cache.sig[l]);
      }
    }
    return cache.act.back();
  }

  /// Gradients of sum_b <cotangent_b, output_b> with respect to weights,
  /// biases and (optionally) the input batch.
  Gradients backward(const Cache& cache, const Matrix& cotangent, bool need_input = true) const {
    Cache work = cache;
    Gradients g;
    backward(work, cotangent, g, need_input);
    return g;
  }

  /// As above, reusing the cache's work buffers and g's storage.
  void backward(Cache& cache, const Matrix& cotangent, Gradients& g, bool need_input = true) const {
    check_cotangent(cache, cotangent);
    g.weights.resize(weights_.size());
    g.biases.resize(weights_.size());
    Matrix& delta = cache.delta;
    delta = cotangent;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      if (l + 1 != weights_.size()) apply_silu_grad(cache.pre[l], cache.sig[l], delta);
      g.weights[l].noalias() = delta * cache.act[l].transpose();
      g.biases[l].noalias() = delta.rowwise().sum();
      if (l > 0 || need_input) {
        cache.next.noalias() = weights_[l].transpose() * delta;
        delta.swap(cache.next);
      }
    }
    if (need_input) g.input = delta;
  }

  /// Per-sample parameter gradients in flat() layout: (param_count x B).
  /// input_grad receives the per-sample input cotangent.
  Matrix per_sample_gradients(const Cache& cache, const Matrix& cotangent, Matrix& input_grad) const {
    check_cotangent(cache, cotangent);
    const Index batch = cotangent.cols();
    Matrix out(param_count(), batch);
    std::vector<Index> offsets;
    Index off = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      offsets.push_back(off);
      off += weights_[l].size() + biases_[l].size();
    }
    Matrix delta = cotangent;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      if (l + 1 != weights_.size()) apply_silu_grad(cache.pre[l], cache.sig[l], delta);
      const Matrix& a = cache.act[l];
      const Index rows = weights_[l].rows();
      const Index cols = weights_[l].cols();
      for (Index b = 0; b < batch; ++b) {
        for (Index j = 0; j < cols; ++j) {
          out.col(b).segment(offsets[l] + j * rows, rows) = delta.col(b) * a(j, b);
        }
        out.col(b).segment(offsets[l] + rows * cols, rows) = delta.col(b);
      }
      Matrix next = weights_[l].transpose() * delta;
      delta = std::move(next);
    }
    input_grad = std::move(delta);
    return out;
  }

  /// Weights then bias for each layer; weights column-major.
  Vector flat() const {
    Vector v(param_count());
    Index off = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      v.segment(off, weights_[l].size()) = weights_[l].reshaped();
      off += weights_[l].size();
      v.segment(off, biases_[l].size()) = biases_[l];
      off += biases_[l].size();
    }
    return v;
  }

  template <typename Derived>
  void set_flat(const Eigen::MatrixBase<Derived>& v) {
    if (v.size() != param_count()) {
      throw Error(ErrorCode::DimMismatch, "flat parameter vector has length " +
                                              std::to_string(v.size()) + ", expected " +
                                              std::to_string(param_count()));
    }
    Index off = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      weights_[l].reshaped() = v.segment(off, weights_[l].size()).template cast<Scalar>();
      off += weights_[l].size();
      biases_[l] = v.segment(off, biases_[l].size()).template cast<Scalar>();
      off += biases_[l].size();
    }
  }

  static Index param_count_for(const std::vector<Index>& widths) {
    Index n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l + 1] * (widths[l] + 1);
    return n;
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out(widths_);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.weight(l) = weights_[l].template cast<Other>();
      out.bias(l) = biases_[l].template cast<Other>();
    }
    return out;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    }
    return true;
  }

 private:
  // silu'(z) = s (1 + z (1 - s)), s = sigmoid(z)
  static void apply_silu_grad(const Matrix& pre, const Matrix& sig, Matrix& delta) {
    delta.array() *= sig.array() * (Scalar(1) + pre.array() * (Scalar(1) - sig.array()));
  }

  void check_cotangent(const Cache& cache, const Matrix& cotangent) const {
    if (cache.act.size() != weights_.size() + 1 || cache.sig.size() != weights_.size()) {
      throw Error(ErrorCode::InvalidArgument, "mlp cache does not belong to this network");
    }
    if (cotangent.rows() != output_dim() || cotangent.cols() != cache.act.front().cols()) {
      throw Error(ErrorCode::DimMismatch, "mlp cotangent shape does not match output");
    }
  }

  std::vector<Index> widths_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

template <typename Scalar>
class AdamW {
 public:
  using Net = Mlp<Scalar>;

  AdamW(const Net& net, AdamWConfig config) : config_(config) {
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      m_w_.push_back(Net::Matrix::Zero(net.weight(l).rows(), net.weight(l).cols()));
      v_w_.push_back(m_w_.back());
      m_b_.push_back(Net::Vector::Zero(net.bias(l).size()));
      v_b_.push_back(m_b_.back());
    }
  }

  const AdamWConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr) noexcept { config_.learning_rate = lr; }
  long step_count() const noexcept { return step_; }

  void step(Net& net, const typename Net::Gradients& g) {
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      update(net.weight(l), g.weights[l], m_w_[l], v_w_[l], bc1, bc2);
      update(net.bias(l), g.biases[l], m_b_[l], v_b_[l], bc1, bc2);
    }
  }

 private:
  template <typename P, typename G, typename M>
  void update(P& param, const G& grad, M& m, M& v, double bc1, double bc2) const {
    const Scalar b1 = static_cast<Scalar>(config_.beta1);
    const Scalar b2 = static_cast<Scalar>(config_.beta2);
    m = b1 * m + (Scalar(1) - b1) * grad;
    v.array() = b2 * v.array() + (Scalar(1) - b2) * grad.array().square();
    const Scalar lr = static_cast<Scalar>(config_.learning_rate);
    const Scalar eps = static_cast<Scalar>(config_.epsilon);
    const Scalar wd = static_cast<Scalar>(config_.weight_decay);
    const Scalar s1 = static_cast<Scalar>(1.0 / bc1);
    const Scalar s2 = static_cast<Scalar>(1.0 / bc2);
    param.array() -= lr * ((m.array() * s1) / ((v.array() * s2).sqrt() + eps) + wd * param.array());
  }

  AdamWConfig config_;
  std::vector<typename Net::Matrix> m_w_, v_w_;
  std::vector<typename Net::Vector> m_b_, v_b_;
  long step_ = 0;
};

/// Score networks are trained and evaluated in single precision.
using ScoreNet = Mlp<float>;

struct DsmConfig {
  double dsm_noise_var = 0.05;
  Eigen::Index batch_size = 4096;
  int steps = 500;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  std::vector<Eigen::Index> hidden = {128, 128, 128};
  Eigen::Index validation_size = 4096;
  /// Cosine decay of the learning rate to zero over `steps`.
  bool cosine_decay = true;
  /// Exponential moving average of the weights; the average is returned.
  /// 0 disables it.
  double ema_decay = 0.99;

  void validate() const;
};

struct DsmReport {
  double initial_loss = 0.0;  // frozen validation batch, before training
  double final_loss = 0.0;    // same batch, after training
  int steps = 0;
};

/// Fits s(y) (or s(y | c) when conditions are given) to the score of the
/// samples convolved with N(0, dsm_noise_var I) by minimizing
/// || s(y + z) + z / t ||^2. The network input is concat(y, c).
/// A warm-start network, when given, is fine-tuned instead of re-initialized.
ScoreNet train_dsm(const Eigen::MatrixXd& samples, const Eigen::MatrixXd* conditions,
                   const DsmConfig& config, const ScoreNet* warm_start = nullptr,
                   DsmReport* report = nullptr);

/// DSM loss of `net` on a fixed set of corrupted samples (for diagnostics).
double dsm_loss(const ScoreNet& net, const Eigen::MatrixXd& samples, const Eigen::MatrixXd* conditions,
                double dsm_noise_var, std::uint64_t seed);

/// Evaluates a float network on double inputs.
Eigen::MatrixXd evaluate(const ScoreNet& net, const Eigen::MatrixXd& input);

struct Checkpoint {
  ScoreNet net;
  double dsm_noise_var = 0.0;
};

/// Structured-text checkpoint (JSON): format tag, version, widths, t_dsm, flat weights.
void save_checkpoint(const std::string& path, const ScoreNet& net, double dsm_noise_var);
Checkpoint load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const ScoreNet& net, double dsm_noise_var);
Checkpoint checkpoint_from_string(const std::string& text);

}  // namespace infograd
