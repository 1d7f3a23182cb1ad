#pragma once

// Dense rectifier network used as the Q-function approximator. Forward pass,
// reverse-mode gradients of the squared TD error and plain SGD are written
// out by hand; Eigen only supplies the matrix products.

#include <Eigen/Dense>

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rohcrl/core.hpp"
#include "rohcrl/random.hpp"

namespace rohcrl::nn {

struct MlpConfig {
  std::vector<int> widths;  // input, hidden..., output

  /// input -> hidden_layers x hidden_width -> kNumActions
  static MlpConfig q_network(int input, int hidden_width, int hidden_layers) {
    MlpConfig cfg;
    cfg.widths.push_back(input);
    for (int i = 0; i < hidden_layers; ++i) cfg.widths.push_back(hidden_width);
    cfg.widths.push_back(kNumActions);
    return cfg;
  }

  void validate() const {
    if (widths.size() < 2) throw std::invalid_argument("MLP needs at least input and output widths");
    for (int w : widths)
      if (w <= 0) throw std::invalid_argument("MLP layer widths must be positive");
    if (widths.back() != kNumActions)
      throw std::invalid_argument("MLP output width must equal the action count (6)");
  }
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  int input_width() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_width() const { return static_cast<int>(layers.back().weight.rows()); }

  MlpConfig config() const {
    MlpConfig cfg;
    cfg.widths.push_back(input_width());
    for (const auto& l : layers) cfg.widths.push_back(static_cast<int>(l.weight.rows()));
    return cfg;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }
};

using Gradients = MlpParams;

inline MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  for (const auto& l : p.layers)
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  return z;
}

/// Glorot-uniform weights, zero biases.
inline MlpParams init(const MlpConfig& cfg, Rng& rng) {
  cfg.validate();
  MlpParams p;
  for (std::size_t i = 0; i + 1 < cfg.widths.size(); ++i) {
    const int in = cfg.widths[i];
    const int out = cfg.widths[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    // Row-major fill so the draw order matches the serialized layout.
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

inline MlpParams copy_params(const MlpParams& p) { return p; }

/// Q-values for a batch; column j of `inputs` is sample j.
inline Eigen::MatrixXd forward_batch(const MlpParams& p, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != p.input_width())
    throw std::invalid_argument("MLP input dimension mismatch: expected " +
                                std::to_string(p.input_width()) + ", got " +
                                std::to_string(inputs.rows()));
  Eigen::MatrixXd a = inputs;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    Eigen::MatrixXd z = p.layers[i].weight * a;
    z.colwise() += p.layers[i].bias;
    a = (i + 1 < p.layers.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
  }
  return a;
}

inline Eigen::VectorXd forward(const MlpParams& p, std::span<const double> x) {
  const Eigen::Map<const Eigen::MatrixXd> column(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  return forward_batch(p, column).col(0);
}

struct LossAndGrad {
  double loss = 0.0;
  Gradients grad;
};

/// Mean over the batch of (Q(x_j)[a_j] - y_j)^2 and its gradient.
inline LossAndGrad batch_loss_grad(const MlpParams& p, const Eigen::MatrixXd& inputs,
                                   std::span<const int> actions, std::span<const double> targets) {
  const auto batch = inputs.cols();
  if (batch == 0) throw std::invalid_argument("empty batch");
  if (static_cast<Eigen::Index>(actions.size()) != batch ||
      static_cast<Eigen::Index>(targets.size()) != batch)
    throw std::invalid_argument("batch size mismatch between inputs, actions and targets");
  if (inputs.rows() != p.input_width()) throw std::invalid_argument("MLP input dimension mismatch");

  const std::size_t n = p.layers.size();
  std::vector<Eigen::MatrixXd> acts;  // acts[i] is the input of layer i
  acts.reserve(n + 1);
  acts.push_back(inputs);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::MatrixXd z = p.layers[i].weight * acts.back();
    z.colwise() += p.layers[i].bias;
    if (i + 1 < n) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }

  const Eigen::MatrixXd& q = acts.back();
  const double scale = 1.0 / static_cast<double>(batch);
  LossAndGrad out;
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const int a = actions[static_cast<std::size_t>(j)];
    if (a < 0 || a >= q.rows()) throw std::invalid_argument("action index out of range");
    const double err = q(a, j) - targets[static_cast<std::size_t>(j)];
    out.loss += err * err;
    delta(a, j) = 2.0 * err * scale;
  }
  out.loss *= scale;

  out.grad.layers.resize(n);
  for (std::size_t k = n; k-- > 0;) {
    out.grad.layers[k].weight = delta * acts[k].transpose();
    out.grad.layers[k].bias = delta.rowwise().sum();
    if (k > 0) {
      // Rectifier derivative: the stored activation is positive exactly where
      // the pre-activation was.
      delta = (p.layers[k].weight.transpose() * delta).cwiseProduct(
          (acts[k].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

/// Squared TD error of the taken action for one sample.
inline LossAndGrad td_loss_grad(const MlpParams& p, std::span<const double> x, int action,
                                double target) {
  const Eigen::Map<const Eigen::MatrixXd> column(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  const int a[1] = {action};
  const double y[1] = {target};
  return batch_loss_grad(p, column, a, y);
}

inline void sgd_step(MlpParams& p, const Gradients& g, double eta) {
  if (g.layers.size() != p.layers.size()) throw std::invalid_argument("gradient shape mismatch");
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    if (g.layers[i].weight.rows() != p.layers[i].weight.rows() ||
        g.layers[i].weight.cols() != p.layers[i].weight.cols() ||
        g.layers[i].bias.size() != p.layers[i].bias.size())
      throw std::invalid_argument("gradient shape mismatch");
    p.layers[i].weight -= eta * g.layers[i].weight;
    p.layers[i].bias -= eta * g.layers[i].bias;
  }
}

// --- Serialization ----------------------------------------------------------
//
// Text format:
//   rohcrl-mlp 1
//   <number of weight layers>
//   <width_0> <width_1> ... <width_n>
//   per layer: weights row-major, then biases, one value per line
// Values use max_digits10 so a round trip is exact.

inline void save(std::ostream& os, const MlpParams& p) {
  const auto precision = os.precision();
  os << "rohcrl-mlp 1\n" << p.layers.size() << '\n';
  const MlpConfig cfg = p.config();
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) os << (i ? " " : "") << cfg.widths[i];
  os << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& l : p.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) os << l.weight(r, c) << '\n';
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) os << l.bias(r) << '\n';
  }
  os.precision(precision);
}

inline MlpParams load(std::istream& is) {
  std::string magic;
  int version = 0;
  std::size_t layers = 0;
  if (!(is >> magic >> version) || magic != "rohcrl-mlp" || version != 1)
    throw std::runtime_error("not an rohcrl-mlp v1 parameter file");
  if (!(is >> layers) || layers == 0 || layers > 64)
    throw std::runtime_error("bad layer count in parameter file");
  MlpConfig cfg;
  cfg.widths.resize(layers + 1);
  for (auto& w : cfg.widths)
    if (!(is >> w) || w <= 0) throw std::runtime_error("bad layer width in parameter file");
  cfg.validate();
  MlpParams p;
  for (std::size_t i = 0; i < layers; ++i) {
    DenseLayer l{Eigen::MatrixXd(cfg.widths[i + 1], cfg.widths[i]),
                 Eigen::VectorXd(cfg.widths[i + 1])};
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        if (!(is >> l.weight(r, c))) throw std::runtime_error("truncated parameter file");
    for (Eigen::Index r = 0; r < l.bias.size(); ++r)
      if (!(is >> l.bias(r))) throw std::runtime_error("truncated parameter file");
    p.layers.push_back(std::move(l));
  }
  return p;
}

}  // namespace rohcrl::nn
