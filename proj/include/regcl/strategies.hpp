#pragma once

// The five training strategies over an experience stream: Naive, Joint
// (cumulative), Experience Replay, EWC, and GEM. One shared stream loop
// with per-strategy hooks for the effective training set, the gradient,
// and end-of-experience consolidation.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "regcl/dataset.hpp"
#include "regcl/errors.hpp"
#include "regcl/metrics.hpp"
#include "regcl/nn.hpp"
#include "regcl/qp.hpp"
#include "regcl/scenario.hpp"

namespace regcl {

enum class Strategy { Naive, Joint, Replay, Ewc, Gem };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Naive: return "naive";
    case Strategy::Joint: return "joint";
    case Strategy::Replay: return "replay";
    case Strategy::Ewc: return "ewc";
    case Strategy::Gem: return "gem";
  }
  return "?";
}

inline Strategy strategy_from_name(const std::string& name) {
  if (name == "naive") return Strategy::Naive;
  if (name == "joint") return Strategy::Joint;
  if (name == "replay") return Strategy::Replay;
  if (name == "ewc") return Strategy::Ewc;
  if (name == "gem") return Strategy::Gem;
  throw ConfigError("unknown strategy: " + name);
}

struct TrainConfig {
  NetworkSpec network;
  int epochs_per_experience = 30;
  int batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  std::int64_t seed = 0;

  void validate() const {
    network.validate();
    if (epochs_per_experience < 1) throw ConfigError("TrainConfig: epochs must be positive");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be positive");
    if (learning_rate <= 0.0) throw ConfigError("TrainConfig: learning_rate must be positive");
  }
};

struct StrategyParams {
  // replay: absolute cap; <0 means the 20% default, floor(0.2 * total train)
  std::int64_t replay_budget = -1;
  // ewc
  double ewc_lambda = 100.0;
  // gem
  int gem_ppe = 64;
  double gem_margin = 0.0;
};

// ---------------------------------------------------------------------------
// Replay buffer

struct ReplayBuffer {
  std::vector<std::vector<Sample>> groups;  // grouped by source experience
  std::size_t budget = 0;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
  }
};

namespace detail {

inline std::vector<Sample> sample_without_replacement(const std::vector<Sample>& pool,
                                                      std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Sample> out;
  out.reserve(std::min(count, pool.size()));
  for (std::size_t i = 0; i < std::min(count, pool.size()); ++i) out.push_back(pool[idx[i]]);
  return out;
}

}  // namespace detail

// Equal per-experience slots (remainder to the earliest experiences).
// Existing groups are down-sampled when their slot shrinks, never refilled.
inline void replay_update_buffer(ReplayBuffer& buffer, const Dataset& finished_train,
                                 std::size_t n_seen_experiences, std::int64_t seed) {
  if (n_seen_experiences == 0) throw ArgumentError("replay_update_buffer: n_seen must be >= 1");
  std::mt19937_64 rng(detail::mix_seed(0x7265706cu, static_cast<std::uint64_t>(seed)));
  const std::size_t base = buffer.budget / n_seen_experiences;
  const std::size_t rem = buffer.budget % n_seen_experiences;
  auto slot = [&](std::size_t i) { return base + (i < rem ? 1 : 0); };

  for (std::size_t i = 0; i < buffer.groups.size(); ++i)
    if (buffer.groups[i].size() > slot(i))
      buffer.groups[i] = detail::sample_without_replacement(buffer.groups[i], slot(i), rng);
  buffer.groups.push_back(detail::sample_without_replacement(
      finished_train.samples, slot(buffer.groups.size()), rng));
}

inline Dataset effective_train_set_naive(const Experience& exp) { return exp.train; }

inline Dataset effective_train_set_joint(const ExperienceStream& stream, std::size_t k) {
  if (k < 1 || k > stream.size()) throw ArgumentError("effective_train_set_joint: k out of range");
  Dataset out{ {}, stream.experiences.front().train.feature_dim, "joint" };
  for (std::size_t i = 0; i < k; ++i)
    for (const auto& s : stream.experiences[i].train.samples) out.samples.push_back(s);
  return out;
}

inline Dataset effective_train_set_replay(const Experience& exp, const ReplayBuffer& buffer) {
  Dataset out = exp.train;
  for (const auto& g : buffer.groups)
    for (const auto& s : g) out.samples.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// EWC

struct EwcAnchor {
  ParameterVector theta_star;
  FisherDiagonal fisher;
};

struct EWCState {
  std::vector<EwcAnchor> anchors;  // one per consolidated experience
  double lambda = 100.0;
};

inline double ewc_penalty(const ParameterVector& params, const EWCState& state) {
  double penalty = 0.0;
  for (const auto& a : state.anchors) {
    if (a.theta_star.size() != params.size() || a.fisher.size() != params.size())
      throw ShapeError("ewc_penalty: anchor length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double d = params[i] - a.theta_star[i];
      s += a.fisher[i] * d * d;
    }
    penalty += 0.5 * state.lambda * s;
  }
  return penalty;
}

// Adds lambda * F_i (theta_i - theta*_i) per anchor into grad.
inline void ewc_penalty_gradient(const ParameterVector& params, const EWCState& state,
                                 GradientVector& grad) {
  if (grad.size() != params.size()) throw ShapeError("ewc_penalty_gradient: length mismatch");
  for (const auto& a : state.anchors) {
    if (a.theta_star.size() != params.size())
      throw ShapeError("ewc_penalty_gradient: anchor length mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
      grad[i] += state.lambda * a.fisher[i] * (params[i] - a.theta_star[i]);
  }
}

inline void ewc_consolidate(const RegressionNet& net, const Dataset& finished_train,
                            EWCState& state) {
  state.anchors.push_back(
      EwcAnchor{net.params, fisher_diagonal(net, finished_train.feature_batch(),
                                            finished_train.target_vector())});
}

// ---------------------------------------------------------------------------
// GEM

struct GEMMemory {
  std::vector<std::vector<Sample>> groups;  // <= ppe samples per past experience
  int ppe = 64;
  double margin = 0.0;
};

inline void gem_memory_update(GEMMemory& memory, const Dataset& finished_train,
                              std::int64_t seed) {
  std::mt19937_64 rng(detail::mix_seed(0x67656d6du, static_cast<std::uint64_t>(seed)));
  auto stored = detail::sample_without_replacement(finished_train.samples,
                                                  static_cast<std::size_t>(memory.ppe), rng);
  if (!stored.empty()) memory.groups.push_back(std::move(stored));
}

inline std::vector<GradientVector> gem_reference_gradients(const RegressionNet& net,
                                                           const GEMMemory& memory) {
  std::vector<GradientVector> refs;
  refs.reserve(memory.groups.size());
  for (const auto& g : memory.groups) {
    FeatureBatch feats;
    std::vector<double> targets;
    for (const auto& s : g) {
      feats.push_back(s.features);
      targets.push_back(s.target);
    }
    refs.push_back(backward_batch(net, feats, targets).first);
  }
  return refs;
}

// Projects g onto the closest gradient whose dot product with every memory
// gradient is non-negative. Unchanged (bitwise) when already feasible.
inline GradientVector gem_project(const GradientVector& g,
                                  const std::vector<GradientVector>& memory_grads,
                                  double margin = 0.0) {
  for (double x : g)
    if (!std::isfinite(x)) throw NumericError("gem_project: non-finite gradient input");
  const std::size_t m = memory_grads.size();
  std::vector<double> dots(m, 0.0);
  bool violated = false;
  for (std::size_t k = 0; k < m; ++k) {
    if (memory_grads[k].size() != g.size())
      throw ShapeError("gem_project: memory gradient length mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) dots[k] += g[i] * memory_grads[k][i];
    if (!std::isfinite(dots[k])) throw NumericError("gem_project: non-finite memory gradient");
    if (dots[k] < -margin) violated = true;
  }
  if (!violated) return g;

  // dual QP: minimize 1/2 v'GG'v + (Gg)'v, v >= 0; g~ = g + G'v
  std::vector<std::vector<double>> H(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) s += memory_grads[a][i] * memory_grads[b][i];
      H[a][b] = H[b][a] = s;
    }
  const auto v = solve_nonneg_qp(H, dots);
  GradientVector projected = g;
  for (std::size_t k = 0; k < m; ++k)
    if (v[k] != 0.0)
      for (std::size_t i = 0; i < g.size(); ++i) projected[i] += v[k] * memory_grads[k][i];
  return projected;
}

// ---------------------------------------------------------------------------
// Stream training

struct RunResult {
  Strategy strategy = Strategy::Naive;
  EvalMatrix eval_matrix;
  double final_test_mae = 0.0;
  double final_test_mpe = 0.0;  // NaN when MPE undefined (zero targets)
  double wall_clock_seconds = 0.0;
  std::int64_t seed = 0;
  TrainConfig config;
  StrategyParams params;
  ParameterVector final_params;
  bool ok = true;
  std::string error;
};

namespace detail {

inline double evaluate_mae(const RegressionNet& net, const Dataset& test) {
  return regcl::mae(forward_batch(net, test.feature_batch()), test.target_vector());
}

}  // namespace detail

inline RunResult train_stream(const ExperienceStream& stream, Strategy strategy,
                              const StrategyParams& params, const TrainConfig& config) {
  config.validate();
  if (stream.size() < 1) throw ArgumentError("train_stream: empty stream");
  for (const auto& e : stream.experiences)
    if (e.train.feature_dim != config.network.input_dim)
      throw ConfigError("train_stream: network input_dim != dataset feature_dim");

  RunResult result;
  result.strategy = strategy;
  result.seed = config.seed;
  result.config = config;
  result.params = params;

  const auto t0 = std::chrono::steady_clock::now();

  RegressionNet net = init_network(config.network, config.seed);
  OptimizerState opt = config.optimizer == OptimizerKind::Adam
                           ? OptimizerState::adam(config.learning_rate)
                           : OptimizerState::sgd(config.learning_rate);

  ReplayBuffer buffer;
  if (strategy == Strategy::Replay) {
    const auto total = stream.total_train_size();
    const auto cap = total / 5;  // floor(0.20 * total)
    buffer.budget = params.replay_budget < 0
                        ? cap
                        : std::min<std::size_t>(static_cast<std::size_t>(params.replay_budget), cap);
  }
  EWCState ewc{{}, params.ewc_lambda};
  GEMMemory gem{{}, params.gem_ppe, params.gem_margin};

  try {
    for (std::size_t k = 1; k <= stream.size(); ++k) {
      const Experience& exp = stream.experiences[k - 1];
      Dataset effective;
      switch (strategy) {
        case Strategy::Naive:
        case Strategy::Ewc:
        case Strategy::Gem: effective = effective_train_set_naive(exp); break;
        case Strategy::Joint: effective = effective_train_set_joint(stream, k); break;
        case Strategy::Replay: effective = effective_train_set_replay(exp, buffer); break;
      }
      const FeatureBatch feats = effective.feature_batch();
      const std::vector<double> targets = effective.target_vector();

      std::mt19937_64 epoch_rng(detail::mix_seed(
          detail::mix_seed(static_cast<std::uint64_t>(config.seed), 0x7472616eu), k));
      std::vector<std::size_t> order(effective.size());
      std::iota(order.begin(), order.end(), std::size_t{0});

      for (int epoch = 0; epoch < config.epochs_per_experience; ++epoch) {
        std::shuffle(order.begin(), order.end(), epoch_rng);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
          const std::size_t stop =
              std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
          FeatureBatch bx;
          std::vector<double> by;
          bx.reserve(stop - start);
          for (std::size_t i = start; i < stop; ++i) {
            bx.push_back(feats[order[i]]);
            by.push_back(targets[order[i]]);
          }
          auto [grad, loss] = backward_batch(net, bx, by);
          if (!std::isfinite(loss))
            throw NumericError("train_stream: non-finite loss at experience " + std::to_string(k));
          if (strategy == Strategy::Ewc && ewc.lambda > 0.0 && !ewc.anchors.empty())
            ewc_penalty_gradient(net.params, ewc, grad);
          if (strategy == Strategy::Gem && !gem.groups.empty())
            grad = gem_project(grad, gem_reference_gradients(net, gem), gem.margin);
          optimizer_step(opt, net.params, grad);
        }
      }

      // evaluate on all experiences seen so far
      std::vector<double> row;
      row.reserve(k);
      for (std::size_t j = 1; j <= k; ++j)
        row.push_back(detail::evaluate_mae(net, stream.experiences[j - 1].test));
      result.eval_matrix.push_row(std::move(row));

      // end-of-experience consolidation
      const auto consolidation_seed = static_cast<std::int64_t>(
          detail::mix_seed(static_cast<std::uint64_t>(config.seed), 0xc0000000u + k));
      if (strategy == Strategy::Replay)
        replay_update_buffer(buffer, exp.train, k, consolidation_seed);
      if (strategy == Strategy::Ewc) ewc_consolidate(net, exp.train, ewc);
      if (strategy == Strategy::Gem) gem_memory_update(gem, exp.train, consolidation_seed);
    }

    // final metrics on the union of all test sets
    FeatureBatch all_feats;
    std::vector<double> all_targets;
    for (const auto& e : stream.experiences)
      for (const auto& s : e.test.samples) {
        all_feats.push_back(s.features);
        all_targets.push_back(s.target);
      }
    const auto preds = forward_batch(net, all_feats);
    result.final_test_mae = regcl::mae(preds, all_targets);
    try {
      result.final_test_mpe = regcl::mpe(preds, all_targets);
    } catch (const MetricError&) {
      result.final_test_mpe = std::nan("");  // undefined; MAE remains usable
    }
  } catch (const NumericError& e) {
    result.ok = false;
    result.error = e.what();
  }

  result.final_params = net.params;
  result.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace regcl
