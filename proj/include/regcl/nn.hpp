#pragma once

// Minimal feed-forward regression network with exact backprop, SGD/Adam,
// a central-difference gradient oracle, and empirical Fisher estimation.
// All math in double precision; a single network is single-threaded.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "regcl/errors.hpp"

namespace regcl {

enum class Activation { Relu, Tanh };

using ParameterVector = std::vector<double>;
using GradientVector = std::vector<double>;
using FisherDiagonal = std::vector<double>;

using FeatureBatch = std::vector<std::vector<double>>;

struct NetworkSpec {
  int input_dim = 1;
  std::vector<int> hidden_layers;
  Activation activation = Activation::Relu;
  bool residual = false;
  // output_dim is fixed at 1 (scalar regression head)

  void validate() const {
    if (input_dim < 1) throw ConfigError("NetworkSpec: input_dim must be >= 1");
    for (int w : hidden_layers)
      if (w < 1) throw ConfigError("NetworkSpec: hidden layer width must be >= 1");
  }

  // dims of the affine layers: [input, hidden..., 1]
  std::vector<int> layer_dims() const {
    std::vector<int> dims;
    dims.reserve(hidden_layers.size() + 2);
    dims.push_back(input_dim);
    for (int w : hidden_layers) dims.push_back(w);
    dims.push_back(1);
    return dims;
  }

  std::size_t parameter_count() const {
    const auto dims = layer_dims();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
      n += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
    return n;
  }
};

struct RegressionNet {
  NetworkSpec spec;
  ParameterVector params;
};

namespace detail {

// splitmix64; stable way to derive sub-seeds
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double activate(double z, Activation a) {
  return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

inline double activate_grad(double z, Activation a) {
  if (a == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

}  // namespace detail

inline RegressionNet init_network(const NetworkSpec& spec, std::int64_t seed) {
  spec.validate();
  RegressionNet net{spec, ParameterVector(spec.parameter_count(), 0.0)};
  std::mt19937_64 rng(detail::mix_seed(0x6e657477u, static_cast<std::uint64_t>(seed)));
  const auto dims = spec.layer_dims();
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t n_w = static_cast<std::size_t>(dims[l]) * dims[l + 1];
    for (std::size_t i = 0; i < n_w; ++i) net.params[off + i] = dist(rng);
    off += n_w + dims[l + 1];  // biases stay zero
  }
  return net;
}

// Forward pass for one sample, optionally recording pre-activations and
// layer inputs for backprop.
namespace detail {

struct ForwardTrace {
  std::vector<std::vector<double>> inputs;   // a_l per affine layer
  std::vector<std::vector<double>> preacts;  // z_l per hidden layer
};

inline double forward_one(const RegressionNet& net, const std::vector<double>& x,
                          ForwardTrace* trace) {
  const auto dims = net.spec.layer_dims();
  if (x.size() != static_cast<std::size_t>(dims.front()))
    throw ShapeError("forward: feature vector length " + std::to_string(x.size()) +
                     " != input_dim " + std::to_string(dims.front()));
  std::vector<double> a = x;
  std::size_t off = 0;
  const std::size_t n_layers = dims.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int in = dims[l], out = dims[l + 1];
    if (trace) trace->inputs.push_back(a);
    std::vector<double> z(out);
    for (int r = 0; r < out; ++r) {
      double s = net.params[off + static_cast<std::size_t>(in) * out + r];  // bias
      const double* w = &net.params[off + static_cast<std::size_t>(r) * in];
      for (int c = 0; c < in; ++c) s += w[c] * a[c];
      z[r] = s;
    }
    off += static_cast<std::size_t>(in) * out + out;
    if (l + 1 == n_layers) {  // linear output head
      return z[0];
    }
    const bool skip = net.spec.residual && in == out;
    if (trace) trace->preacts.push_back(z);
    std::vector<double> h(out);
    for (int r = 0; r < out; ++r)
      h[r] = activate(z[r], net.spec.activation) + (skip ? a[r] : 0.0);
    a = std::move(h);
  }
  return 0.0;  // unreachable
}

}  // namespace detail

inline std::vector<double> forward_batch(const RegressionNet& net, const FeatureBatch& features) {
  std::vector<double> preds;
  preds.reserve(features.size());
  for (const auto& x : features) preds.push_back(detail::forward_one(net, x, nullptr));
  return preds;
}

enum class LossKind { Mse };

inline double compute_loss(const std::vector<double>& predictions,
                           const std::vector<double>& targets, LossKind kind = LossKind::Mse) {
  (void)kind;
  if (predictions.empty() || predictions.size() != targets.size())
    throw ArgumentError("compute_loss: batches must be non-empty and equal length");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    s += r * r;
  }
  return s / static_cast<double>(predictions.size());
}

// Gradient of the mean MSE over the batch, flattened in parameter order.
inline std::pair<GradientVector, double> backward_batch(const RegressionNet& net,
                                                        const FeatureBatch& features,
                                                        const std::vector<double>& targets) {
  if (features.empty() || features.size() != targets.size())
    throw ArgumentError("backward_batch: batches must be non-empty and equal length");
  const auto dims = net.spec.layer_dims();
  const std::size_t n_layers = dims.size() - 1;
  GradientVector grad(net.params.size(), 0.0);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(features.size());

  // layer parameter offsets
  std::vector<std::size_t> offsets(n_layers);
  {
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      offsets[l] = off;
      off += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
    }
  }

  for (std::size_t s = 0; s < features.size(); ++s) {
    detail::ForwardTrace trace;
    const double pred = detail::forward_one(net, features[s], &trace);
    const double resid = pred - targets[s];
    if (!std::isfinite(resid))
      throw NumericError("backward_batch: non-finite prediction at output layer " +
                         std::to_string(n_layers - 1));
    loss += resid * resid * inv_n;

    // delta = dL/dz for the current affine layer; start from the scalar head
    std::vector<double> delta{2.0 * resid * inv_n};
    // pending identity-skip contribution to dL/da of the layer below
    std::vector<double> skip_carry;
    for (std::size_t l = n_layers; l-- > 0;) {
      const int in = dims[l], out = dims[l + 1];
      const std::size_t off = offsets[l];
      const auto& a = trace.inputs[l];
      for (int r = 0; r < out; ++r) {
        const double d = delta[r];
        if (!std::isfinite(d))
          throw NumericError("backward_batch: non-finite gradient in layer " + std::to_string(l));
        double* gw = &grad[off + static_cast<std::size_t>(r) * in];
        for (int c = 0; c < in; ++c) gw[c] += d * a[c];
        grad[off + static_cast<std::size_t>(in) * out + r] += d;
      }
      if (l == 0) break;
      // dL/da_l through the weights, plus any skip that terminated here
      std::vector<double> grad_a(in, 0.0);
      for (int r = 0; r < out; ++r) {
        const double d = delta[r];
        const double* w = &net.params[off + static_cast<std::size_t>(r) * in];
        for (int c = 0; c < in; ++c) grad_a[c] += d * w[c];
      }
      if (!skip_carry.empty())
        for (int c = 0; c < in; ++c) grad_a[c] += skip_carry[c];
      // a_l = act(z_{l-1}) + (skip ? a_{l-1}); split grad_a accordingly
      const auto& z = trace.preacts[l - 1];
      std::vector<double> next_delta(in);
      for (int r = 0; r < in; ++r)
        next_delta[r] = grad_a[r] * detail::activate_grad(z[r], net.spec.activation);
      if (net.spec.residual && dims[l - 1] == dims[l])
        skip_carry = std::move(grad_a);
      else
        skip_carry.clear();
      delta = std::move(next_delta);
    }
  }
  return {std::move(grad), loss};
}

inline GradientVector finite_diff_gradient(const RegressionNet& net, const FeatureBatch& features,
                                           const std::vector<double>& targets, double eps) {
  if (eps <= 0.0) throw ArgumentError("finite_diff_gradient: eps must be > 0");
  RegressionNet probe = net;
  GradientVector grad(net.params.size());
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    const double orig = probe.params[i];
    probe.params[i] = orig + eps;
    const double lp = compute_loss(forward_batch(probe, features), targets);
    probe.params[i] = orig - eps;
    const double lm = compute_loss(forward_batch(probe, features), targets);
    probe.params[i] = orig;
    grad[i] = (lp - lm) / (2.0 * eps);
  }
  return grad;
}

enum class OptimizerKind { Sgd, Adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step_count = 0;

  static OptimizerState sgd(double lr) {
    OptimizerState o;
    o.kind = OptimizerKind::Sgd;
    o.learning_rate = lr;
    return o;
  }
  static OptimizerState adam(double lr) {
    OptimizerState o;
    o.kind = OptimizerKind::Adam;
    o.learning_rate = lr;
    return o;
  }
};

inline void optimizer_step(OptimizerState& opt, ParameterVector& params,
                           const GradientVector& grad) {
  if (params.size() != grad.size())
    throw ShapeError("optimizer_step: parameter/gradient length mismatch");
  if (opt.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= opt.learning_rate * grad[i];
    ++opt.step_count;
    return;
  }
  if (opt.first_moment.empty()) {
    opt.first_moment.assign(params.size(), 0.0);
    opt.second_moment.assign(params.size(), 0.0);
  }
  if (opt.first_moment.size() != params.size())
    throw ShapeError("optimizer_step: optimizer state length mismatch");
  ++opt.step_count;
  const double t = static_cast<double>(opt.step_count);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt.first_moment[i] = opt.beta1 * opt.first_moment[i] + (1.0 - opt.beta1) * grad[i];
    opt.second_moment[i] = opt.beta2 * opt.second_moment[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
    const double m_hat = opt.first_moment[i] / bc1;
    const double v_hat = opt.second_moment[i] / bc2;
    params[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  }
}

// Empirical Fisher diagonal: mean over samples of the squared per-sample
// loss gradient.
inline FisherDiagonal fisher_diagonal(const RegressionNet& net, const FeatureBatch& features,
                                      const std::vector<double>& targets) {
  if (features.empty() || features.size() != targets.size())
    throw ArgumentError("fisher_diagonal: dataset must be non-empty");
  FisherDiagonal fisher(net.params.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(features.size());
  for (std::size_t s = 0; s < features.size(); ++s) {
    auto [g, loss] = backward_batch(net, {features[s]}, {targets[s]});
    (void)loss;
    for (std::size_t i = 0; i < g.size(); ++i) fisher[i] += g[i] * g[i] * inv_n;
  }
  return fisher;
}

}  // namespace regcl
