#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "regcl/strategies.hpp"

using namespace regcl;

namespace {

ExperienceStream small_stream(int n_samples = 200, int n_bins = 3, std::int64_t seed = 1) {
  SyntheticSpec spec;
  spec.n_samples = n_samples;
  spec.feature_dim = 3;
  spec.n_categories = 2;
  spec.noise_std = 0.05;
  spec.seed = seed;
  return build_bin_incremental(generate_synthetic(spec), n_bins, BinMode::Quantile, 0.2, seed);
}

TrainConfig small_config(std::int64_t seed = 0) {
  TrainConfig cfg;
  cfg.network = NetworkSpec{3, {16}, Activation::Relu, false};
  cfg.epochs_per_experience = 5;
  cfg.batch_size = 16;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.learning_rate = 3e-3;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("effective train sets: naive, joint") {
  const auto stream = small_stream();
  const auto& exp2 = stream.experiences[1];
  const auto naive = effective_train_set_naive(exp2);
  REQUIRE(naive.size() == exp2.train.size());
  std::set<std::int64_t> exp_ids;
  for (const auto& s : exp2.train.samples) exp_ids.insert(s.id);
  for (const auto& s : naive.samples) REQUIRE(exp_ids.count(s.id) == 1);

  REQUIRE(effective_train_set_joint(stream, 1).size() == stream.experiences[0].train.size());
  std::size_t total = 0;
  for (const auto& e : stream.experiences) total += e.train.size();
  const auto joint_all = effective_train_set_joint(stream, stream.size());
  REQUIRE(joint_all.size() == total);
  std::set<std::int64_t> ids;
  for (const auto& s : joint_all.samples) ids.insert(s.id);
  REQUIRE(ids.size() == total);  // each train sample exactly once
}

TEST_CASE("replay_update_buffer splits the budget equally") {
  const auto stream = small_stream(300, 3);
  ReplayBuffer buffer;
  buffer.budget = 100;
  replay_update_buffer(buffer, stream.experiences[0].train, 1, 7);
  REQUIRE(buffer.groups.size() == 1);
  REQUIRE(buffer.groups[0].size() == std::min<std::size_t>(100, stream.experiences[0].train.size()));

  replay_update_buffer(buffer, stream.experiences[1].train, 2, 8);
  REQUIRE(buffer.groups.size() == 2);
  REQUIRE(buffer.groups[0].size() == 50);
  REQUIRE(buffer.groups[1].size() == 50);
  REQUIRE(buffer.size() <= buffer.budget);
}

TEST_CASE("replay_update_buffer: remainder goes to the earliest experiences") {
  const auto stream = small_stream(300, 3);
  ReplayBuffer buffer;
  buffer.budget = 101;
  replay_update_buffer(buffer, stream.experiences[0].train, 1, 1);
  replay_update_buffer(buffer, stream.experiences[1].train, 2, 2);
  REQUIRE(buffer.groups[0].size() == 51);
  REQUIRE(buffer.groups[1].size() == 50);
}

TEST_CASE("replay_update_buffer caps groups at availability") {
  Dataset tiny{{}, 1, "tiny"};
  for (int i = 0; i < 3; ++i) tiny.samples.push_back(Sample{i, {0.0}, 1.0, std::nullopt});
  ReplayBuffer buffer;
  buffer.budget = 10;
  replay_update_buffer(buffer, tiny, 1, 5);
  REQUIRE(buffer.groups[0].size() == 3);
  replay_update_buffer(buffer, tiny, 2, 6);
  REQUIRE(buffer.size() <= 10);
  for (const auto& g : buffer.groups) REQUIRE(g.size() <= 3);
}

TEST_CASE("replay_update_buffer is deterministic and samples without replacement") {
  const auto stream = small_stream(300, 3);
  ReplayBuffer a, b;
  a.budget = b.budget = 40;
  replay_update_buffer(a, stream.experiences[0].train, 1, 17);
  replay_update_buffer(b, stream.experiences[0].train, 1, 17);
  REQUIRE(a.groups[0].size() == b.groups[0].size());
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < a.groups[0].size(); ++i) {
    REQUIRE(a.groups[0][i].id == b.groups[0][i].id);
    ids.insert(a.groups[0][i].id);
  }
  REQUIRE(ids.size() == a.groups[0].size());
}

TEST_CASE("effective_train_set_replay concatenates current data and buffer") {
  const auto stream = small_stream(300, 3);
  ReplayBuffer buffer;
  buffer.budget = 20;
  replay_update_buffer(buffer, stream.experiences[0].train, 1, 3);
  const auto eff = effective_train_set_replay(stream.experiences[1], buffer);
  REQUIRE(eff.size() == stream.experiences[1].train.size() + buffer.size());
  std::set<std::int64_t> ids;
  for (const auto& s : eff.samples) ids.insert(s.id);
  REQUIRE(ids.size() == eff.size());  // disjoint by construction

  const ReplayBuffer empty{{}, 0};
  const auto eff0 = effective_train_set_replay(stream.experiences[1], empty);
  REQUIRE(eff0.size() == stream.experiences[1].train.size());
}

TEST_CASE("ewc_penalty: zero at the anchor, hand value, lambda scaling") {
  EWCState state;
  state.lambda = 4.0;
  state.anchors.push_back(EwcAnchor{{1.0}, {2.0}});
  REQUIRE(ewc_penalty({1.0}, state) == 0.0);
  // (lambda/2) * F * d^2 = 2 * 2 * 0.25 = 1
  REQUIRE(ewc_penalty({1.5}, state) == Catch::Approx(1.0));
  state.lambda = 0.0;
  REQUIRE(ewc_penalty({1.5}, state) == 0.0);
}

TEST_CASE("ewc penalty gradient matches finite differences of the penalty") {
  EWCState state;
  state.lambda = 3.0;
  state.anchors.push_back(EwcAnchor{{0.5, -1.0, 2.0}, {1.0, 0.25, 4.0}});
  state.anchors.push_back(EwcAnchor{{0.0, 0.0, 1.0}, {2.0, 0.0, 0.5}});
  const ParameterVector theta{1.0, 0.5, -0.5};
  GradientVector grad(3, 0.0);
  ewc_penalty_gradient(theta, state, grad);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    ParameterVector tp = theta, tm = theta;
    tp[i] += eps;
    tm[i] -= eps;
    const double fd = (ewc_penalty(tp, state) - ewc_penalty(tm, state)) / (2 * eps);
    REQUIRE(grad[i] == Catch::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("ewc_consolidate appends one anchor per experience") {
  const auto stream = small_stream();
  const auto net = init_network(NetworkSpec{3, {4}, Activation::Relu, false}, 2);
  EWCState state;
  ewc_consolidate(net, stream.experiences[0].train, state);
  REQUIRE(state.anchors.size() == 1);
  REQUIRE(state.anchors[0].theta_star == net.params);
  ewc_consolidate(net, stream.experiences[0].train, state);
  REQUIRE(state.anchors.size() == 2);
  REQUIRE(state.anchors[0].fisher == state.anchors[1].fisher);
}

TEST_CASE("ewc anchor on a perfectly fit experience has zero fisher") {
  NetworkSpec spec{1, {}, Activation::Relu, false};
  RegressionNet net{spec, {2.0, 1.0}};  // y = 2x + 1
  Dataset fit{{}, 1, "fit"};
  for (int i = 0; i < 4; ++i)
    fit.samples.push_back(Sample{i, {static_cast<double>(i)}, 2.0 * i + 1.0, std::nullopt});
  EWCState state;
  state.lambda = 10.0;
  ewc_consolidate(net, fit, state);
  for (double f : state.anchors[0].fisher) REQUIRE(f == 0.0);
  REQUIRE(ewc_penalty({5.0, -3.0}, state) == 0.0);  // permanently inert anchor
}

TEST_CASE("gem memory stores min(ppe, size) samples per finished experience") {
  const auto stream = small_stream(300, 3);
  GEMMemory mem;
  mem.ppe = 10;
  gem_memory_update(mem, stream.experiences[0].train, 4);
  REQUIRE(mem.groups.size() == 1);
  REQUIRE(mem.groups[0].size() == 10);

  Dataset tiny{{}, 3, "tiny"};
  for (int i = 0; i < 4; ++i) tiny.samples.push_back(Sample{i, {0, 0, 0}, 1.0, std::nullopt});
  gem_memory_update(mem, tiny, 5);
  REQUIRE(mem.groups.size() == 2);
  REQUIRE(mem.groups[1].size() == 4);

  gem_memory_update(mem, stream.experiences[2].train, 6);
  REQUIRE(mem.groups.size() == 3);
}

TEST_CASE("gem reference gradients are recomputed at the current parameters") {
  const auto stream = small_stream();
  auto net = init_network(NetworkSpec{3, {8}, Activation::Tanh, false}, 5);
  GEMMemory mem;
  mem.ppe = 16;
  gem_memory_update(mem, stream.experiences[0].train, 1);
  const auto refs_before = gem_reference_gradients(net, mem);
  REQUIRE(refs_before.size() == 1);
  auto opt = OptimizerState::sgd(0.05);
  optimizer_step(opt, net.params, refs_before[0]);
  const auto refs_after = gem_reference_gradients(net, mem);
  REQUIRE(refs_before[0] != refs_after[0]);  // non-stale
}

TEST_CASE("train_stream fills a triangular eval matrix") {
  const auto stream = small_stream();
  const auto run = train_stream(stream, Strategy::Naive, {}, small_config());
  REQUIRE(run.ok);
  REQUIRE(run.eval_matrix.stages() == stream.size());
  for (std::size_t k = 1; k <= stream.size(); ++k)
    REQUIRE(run.eval_matrix.rows[k - 1].size() == k);
  REQUIRE(run.final_test_mae >= 0.0);
  REQUIRE(std::isfinite(run.final_test_mpe));
  REQUIRE(run.wall_clock_seconds > 0.0);
}

TEST_CASE("train_stream is deterministic given (seed, data, hyperparameters)") {
  const auto stream = small_stream();
  const auto a = train_stream(stream, Strategy::Replay, {}, small_config(3));
  const auto b = train_stream(stream, Strategy::Replay, {}, small_config(3));
  REQUIRE(a.eval_matrix.rows == b.eval_matrix.rows);
  REQUIRE(a.final_test_mae == b.final_test_mae);
}

TEST_CASE("reduction identities: budget-0 replay, lambda-0 ewc, ppe-0 gem equal naive") {
  const auto stream = small_stream();
  const auto cfg = small_config(11);
  const auto naive = train_stream(stream, Strategy::Naive, {}, cfg);

  StrategyParams replay0;
  replay0.replay_budget = 0;
  REQUIRE(train_stream(stream, Strategy::Replay, replay0, cfg).eval_matrix.rows ==
          naive.eval_matrix.rows);

  StrategyParams ewc0;
  ewc0.ewc_lambda = 0.0;
  REQUIRE(train_stream(stream, Strategy::Ewc, ewc0, cfg).eval_matrix.rows ==
          naive.eval_matrix.rows);

  StrategyParams gem0;
  gem0.gem_ppe = 0;
  REQUIRE(train_stream(stream, Strategy::Gem, gem0, cfg).eval_matrix.rows ==
          naive.eval_matrix.rows);
}

TEST_CASE("strategies coincide on a single-experience stream") {
  // strategies only diverge once there is past data
  SyntheticSpec spec;
  spec.n_samples = 120;
  spec.feature_dim = 3;
  spec.n_categories = 2;
  spec.seed = 2;
  const auto ds = generate_synthetic(spec);
  const auto [train, test] = split_train_test(ds, 0.2, 0);
  ExperienceStream stream;
  stream.experiences.push_back(Experience{0, train, test});
  const auto cfg = small_config(4);
  const auto naive = train_stream(stream, Strategy::Naive, {}, cfg);
  for (Strategy s : {Strategy::Joint, Strategy::Replay, Strategy::Ewc, Strategy::Gem})
    REQUIRE(train_stream(stream, s, {}, cfg).eval_matrix.rows == naive.eval_matrix.rows);
}

TEST_CASE("joint final errors stay in a tighter band than naive") {
  const auto stream = small_stream(400, 4, 9);
  auto cfg = small_config(1);
  cfg.epochs_per_experience = 15;
  const auto naive = train_stream(stream, Strategy::Naive, {}, cfg);
  const auto joint = train_stream(stream, Strategy::Joint, {}, cfg);
  auto spread = [](const std::vector<double>& row) {
    const auto [mn, mx] = std::minmax_element(row.begin(), row.end());
    return *mx / std::max(*mn, 1e-12);
  };
  REQUIRE(spread(joint.eval_matrix.rows.back()) < spread(naive.eval_matrix.rows.back()));
}

TEST_CASE("train_stream rejects mismatched network input") {
  const auto stream = small_stream();
  auto cfg = small_config();
  cfg.network.input_dim = 5;
  REQUIRE_THROWS_AS(train_stream(stream, Strategy::Naive, {}, cfg), ConfigError);
}
