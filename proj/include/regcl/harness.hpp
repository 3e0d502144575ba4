#pragma once

// Benchmark orchestration: config parsing, multi-trial execution with
// paired seeds across strategies, result persistence (JSONL records plus a
// CSV summary table), rank aggregation, and the forgetting demo.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "regcl/dataset.hpp"
#include "regcl/errors.hpp"
#include "regcl/metrics.hpp"
#include "regcl/scenario.hpp"
#include "regcl/strategies.hpp"

namespace regcl {

using json = nlohmann::json;

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::BinIncremental;
  int n_bins = 4;
  BinMode bin_mode = BinMode::Quantile;
  std::vector<std::string> category_order;
  double test_fraction = 0.2;
};

struct CsvSource {
  std::string path;
  CsvSchema schema;
};

struct StrategyConfig {
  Strategy strategy = Strategy::Naive;
  StrategyParams params;
};

struct BenchmarkConfig {
  std::string name = "benchmark";
  std::optional<CsvSource> csv;          // exactly one of csv / synthetic
  std::optional<SyntheticSpec> synthetic;
  ScenarioConfig scenario;
  std::vector<StrategyConfig> strategies;
  TrainConfig train;
  int n_trials = 5;
  std::int64_t base_seed = 0;
  std::string output_dir = "out";
  bool normalize = true;
  int parallel_trials = 1;  // 1 = sequential timing mode

  void validate() const {
    if (strategies.empty()) throw ConfigError("config: at least one strategy required");
    if (n_trials < 1) throw ConfigError("config: n_trials must be >= 1");
    if (csv.has_value() == synthetic.has_value())
      throw ConfigError("config: exactly one of dataset.csv / dataset.synthetic required");
    if (!(scenario.test_fraction > 0.0 && scenario.test_fraction < 1.0))
      throw ConfigError("config: scenario.test_fraction must be in (0, 1)");
    if (parallel_trials < 1) throw ConfigError("config: parallel_trials must be >= 1");
    train.validate();
  }
};

// ---------------------------------------------------------------------------
// Config parsing (strict: unknown keys are errors)

namespace detail {

inline void check_keys(const json& obj, const std::string& where,
                       const std::vector<std::string>& allowed) {
  for (const auto& [key, _] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("config: unknown key \"" + key + "\" in " + where);
}

}  // namespace detail

inline BenchmarkConfig parse_benchmark_config(const json& j) {
  BenchmarkConfig cfg;
  try {
    detail::check_keys(j, "top level",
                       {"name", "dataset", "scenario", "strategies", "train", "n_trials",
                        "base_seed", "output_dir", "normalize_features", "parallel_trials"});
    cfg.name = j.value("name", cfg.name);
    cfg.n_trials = j.value("n_trials", cfg.n_trials);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.normalize = j.value("normalize_features", cfg.normalize);
    cfg.parallel_trials = j.value("parallel_trials", cfg.parallel_trials);

    const json& ds = j.at("dataset");
    detail::check_keys(ds, "dataset", {"csv", "synthetic"});
    if (ds.contains("csv")) {
      const json& c = ds["csv"];
      detail::check_keys(c, "dataset.csv",
                         {"path", "feature_columns", "target_column", "category_column"});
      CsvSource src;
      src.path = c.at("path").get<std::string>();
      src.schema.feature_columns = c.at("feature_columns").get<std::vector<std::string>>();
      src.schema.target_column = c.at("target_column").get<std::string>();
      if (c.contains("category_column"))
        src.schema.category_column = c["category_column"].get<std::string>();
      cfg.csv = std::move(src);
    }
    if (ds.contains("synthetic")) {
      const json& s = ds["synthetic"];
      detail::check_keys(s, "dataset.synthetic",
                         {"n_samples", "feature_dim", "n_categories", "noise_std", "seed"});
      SyntheticSpec spec;
      spec.n_samples = s.value("n_samples", spec.n_samples);
      spec.feature_dim = s.value("feature_dim", spec.feature_dim);
      spec.n_categories = s.value("n_categories", spec.n_categories);
      spec.noise_std = s.value("noise_std", spec.noise_std);
      spec.seed = s.value("seed", spec.seed);
      cfg.synthetic = spec;
    }

    const json& sc = j.at("scenario");
    detail::check_keys(sc, "scenario",
                       {"kind", "n_bins", "mode", "category_order", "test_fraction"});
    const std::string kind = sc.at("kind").get<std::string>();
    if (kind == "bin_incremental") {
      cfg.scenario.kind = ScenarioKind::BinIncremental;
    } else if (kind == "input_incremental") {
      cfg.scenario.kind = ScenarioKind::InputIncremental;
    } else {
      throw ConfigError("config: unknown scenario kind \"" + kind + "\"");
    }
    cfg.scenario.n_bins = sc.value("n_bins", cfg.scenario.n_bins);
    const std::string mode = sc.value("mode", std::string("quantile"));
    if (mode == "quantile") cfg.scenario.bin_mode = BinMode::Quantile;
    else if (mode == "equal_width") cfg.scenario.bin_mode = BinMode::EqualWidth;
    else throw ConfigError("config: unknown bin mode \"" + mode + "\"");
    if (sc.contains("category_order"))
      cfg.scenario.category_order = sc["category_order"].get<std::vector<std::string>>();
    cfg.scenario.test_fraction = sc.value("test_fraction", cfg.scenario.test_fraction);

    for (const json& s : j.at("strategies")) {
      detail::check_keys(s, "strategies[]", {"name", "budget", "lambda", "ppe", "margin"});
      StrategyConfig stc;
      stc.strategy = strategy_from_name(s.at("name").get<std::string>());
      stc.params.replay_budget = s.value("budget", stc.params.replay_budget);
      stc.params.ewc_lambda = s.value("lambda", stc.params.ewc_lambda);
      stc.params.gem_ppe = s.value("ppe", stc.params.gem_ppe);
      stc.params.gem_margin = s.value("margin", stc.params.gem_margin);
      cfg.strategies.push_back(std::move(stc));
    }

    const json& tr = j.at("train");
    detail::check_keys(tr, "train",
                       {"hidden_layers", "activation", "residual", "epochs_per_experience",
                        "batch_size", "optimizer", "learning_rate"});
    if (tr.contains("hidden_layers"))
      cfg.train.network.hidden_layers = tr["hidden_layers"].get<std::vector<int>>();
    else
      cfg.train.network.hidden_layers = {64, 64, 64};
    const std::string act = tr.value("activation", std::string("relu"));
    if (act == "relu") cfg.train.network.activation = Activation::Relu;
    else if (act == "tanh") cfg.train.network.activation = Activation::Tanh;
    else throw ConfigError("config: unknown activation \"" + act + "\"");
    cfg.train.network.residual = tr.value("residual", false);
    cfg.train.epochs_per_experience = tr.value("epochs_per_experience", 30);
    cfg.train.batch_size = tr.value("batch_size", 32);
    const std::string opt = tr.value("optimizer", std::string("adam"));
    if (opt == "adam") cfg.train.optimizer = OptimizerKind::Adam;
    else if (opt == "sgd") cfg.train.optimizer = OptimizerKind::Sgd;
    else throw ConfigError("config: unknown optimizer \"" + opt + "\"");
    cfg.train.learning_rate = tr.value("learning_rate", 1e-3);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline BenchmarkConfig load_benchmark_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: parse failure in " + path + ": " + e.what());
  }
  return parse_benchmark_config(j);
}

// ---------------------------------------------------------------------------
// Benchmark execution

struct StrategySummary {
  Strategy strategy = Strategy::Naive;
  double final_mpe_mean = 0.0, final_mpe_std = 0.0;
  double final_mae_mean = 0.0, final_mae_std = 0.0;
  std::vector<double> per_experience_mae_mean;  // final-stage row
  double avg_fr_mean = 0.0, avg_fr_std = 0.0;
  double best_fr = 0.0;  // lowest avg FR over trials
  double runtime_mean_s = 0.0, runtime_std_s = 0.0;
  bool degraded = false;  // some trial hit a run error
};

struct BenchmarkReport {
  std::string name;
  int n_trials = 0;
  std::vector<StrategySummary> summaries;
  std::vector<RunResult> runs;  // all trials, grouped by strategy
};

namespace detail {

struct MeanStd {
  double mean = 0.0, std_dev = 0.0;
};

// sample (n-1) convention; 0 when n == 1
inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double s = 0.0;
    for (double x : xs) s += (x - out.mean) * (x - out.mean);
    out.std_dev = std::sqrt(s / static_cast<double>(xs.size() - 1));
  }
  return out;
}

inline Dataset build_dataset(const BenchmarkConfig& cfg) {
  Dataset ds = cfg.csv ? load_csv(cfg.csv->path, cfg.csv->schema)
                       : generate_synthetic(*cfg.synthetic);
  if (cfg.normalize) {
    const NormStats stats = compute_norm_stats(ds);
    apply_norm_stats(ds, stats);
  }
  return ds;
}

inline ExperienceStream build_stream(const BenchmarkConfig& cfg, const Dataset& ds,
                                     std::int64_t seed) {
  if (cfg.scenario.kind == ScenarioKind::BinIncremental)
    return build_bin_incremental(ds, cfg.scenario.n_bins, cfg.scenario.bin_mode,
                                 cfg.scenario.test_fraction, seed);
  std::vector<std::string> order = cfg.scenario.category_order;
  if (order.empty()) {
    // default: labels in order of first appearance
    for (const auto& s : ds.samples) {
      if (!s.category) break;
      if (std::find(order.begin(), order.end(), *s.category) == order.end())
        order.push_back(*s.category);
    }
  }
  return build_input_incremental(ds, order, cfg.scenario.test_fraction, seed);
}

inline StrategySummary summarize_strategy(Strategy strategy, const std::vector<RunResult>& runs) {
  StrategySummary sum;
  sum.strategy = strategy;
  std::vector<double> mpes, maes, avg_frs, times;
  for (const auto& r : runs) {
    if (!r.ok) {
      sum.degraded = true;
      continue;
    }
    mpes.push_back(r.final_test_mpe);
    maes.push_back(r.final_test_mae);
    times.push_back(r.wall_clock_seconds);
    if (r.eval_matrix.stages() >= 2)
      avg_frs.push_back(aggregate_forgetting(r.eval_matrix, r.eval_matrix.stages()).avg_fr);
    const auto& last = r.eval_matrix.rows.back();
    if (sum.per_experience_mae_mean.empty())
      sum.per_experience_mae_mean.assign(last.size(), 0.0);
    for (std::size_t j = 0; j < last.size(); ++j) sum.per_experience_mae_mean[j] += last[j];
  }
  const auto n_ok = static_cast<double>(mpes.size());
  if (n_ok > 0)
    for (auto& v : sum.per_experience_mae_mean) v /= n_ok;
  const auto mpe_ms = mean_std(mpes);
  sum.final_mpe_mean = mpe_ms.mean;
  sum.final_mpe_std = mpe_ms.std_dev;
  const auto mae_ms = mean_std(maes);
  sum.final_mae_mean = mae_ms.mean;
  sum.final_mae_std = mae_ms.std_dev;
  const auto fr_ms = mean_std(avg_frs);
  sum.avg_fr_mean = fr_ms.mean;
  sum.avg_fr_std = fr_ms.std_dev;
  sum.best_fr = avg_frs.empty() ? std::nan("") : best_forgetting_over_trials(avg_frs);
  const auto t_ms = mean_std(times);
  sum.runtime_mean_s = t_ms.mean;
  sum.runtime_std_s = t_ms.std_dev;
  return sum;
}

}  // namespace detail

inline BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  const Dataset ds = detail::build_dataset(cfg);

  const std::size_t n_strategies = cfg.strategies.size();
  const auto n_trials = static_cast<std::size_t>(cfg.n_trials);
  std::vector<RunResult> runs(n_strategies * n_trials);

  auto run_trial = [&](std::size_t t) {
    const std::int64_t seed = cfg.base_seed + static_cast<std::int64_t>(t);
    // one stream per trial, shared across strategies
    const ExperienceStream stream = detail::build_stream(cfg, ds, seed);
    for (std::size_t s = 0; s < n_strategies; ++s) {
      TrainConfig tc = cfg.train;
      tc.network.input_dim = static_cast<int>(ds.feature_dim);
      tc.seed = seed;
      runs[s * n_trials + t] =
          train_stream(stream, cfg.strategies[s].strategy, cfg.strategies[s].params, tc);
    }
  };

  if (cfg.parallel_trials <= 1) {
    for (std::size_t t = 0; t < n_trials; ++t) run_trial(t);
  } else {
    std::size_t next = 0;
    while (next < n_trials) {
      std::vector<std::thread> pool;
      for (int p = 0; p < cfg.parallel_trials && next < n_trials; ++p, ++next)
        pool.emplace_back(run_trial, next);
      for (auto& th : pool) th.join();
    }
  }

  BenchmarkReport report;
  report.name = cfg.name;
  report.n_trials = cfg.n_trials;
  report.runs = runs;
  for (std::size_t s = 0; s < n_strategies; ++s) {
    std::vector<RunResult> per(runs.begin() + s * n_trials, runs.begin() + (s + 1) * n_trials);
    report.summaries.push_back(detail::summarize_strategy(cfg.strategies[s].strategy, per));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Persistence: JSONL run records + CSV summary table

inline json run_result_to_json(const RunResult& r) {
  json j;
  j["strategy"] = strategy_name(r.strategy);
  j["seed"] = r.seed;
  j["ok"] = r.ok;
  if (!r.ok) j["error"] = r.error;
  j["final_test_mae"] = r.final_test_mae;
  if (std::isfinite(r.final_test_mpe)) j["final_test_mpe"] = r.final_test_mpe;
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  j["eval_matrix"] = r.eval_matrix.rows;
  return j;
}

inline RunResult run_result_from_json(const json& j) {
  RunResult r;
  r.strategy = strategy_from_name(j.at("strategy").get<std::string>());
  r.seed = j.at("seed").get<std::int64_t>();
  r.ok = j.at("ok").get<bool>();
  if (j.contains("error")) r.error = j["error"].get<std::string>();
  r.final_test_mae = j.at("final_test_mae").get<double>();
  r.final_test_mpe =
      j.contains("final_test_mpe") ? j["final_test_mpe"].get<double>() : std::nan("");
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  for (const auto& row : j.at("eval_matrix"))
    r.eval_matrix.push_row(row.get<std::vector<double>>());
  return r;
}

// Writes <stem>.jsonl (per-trial records) and <stem>.summary.csv with the
// fixed column order: strategy, final_mpe_mean, final_mpe_std, best_fr,
// runtime_mean_s.
inline void export_results(const BenchmarkReport& report, const std::string& stem) {
  {
    std::ofstream out(stem + ".jsonl");
    if (!out) throw IoError("cannot open for writing: " + stem + ".jsonl");
    for (const auto& r : report.runs) out << run_result_to_json(r).dump() << '\n';
    if (!out) throw IoError("write failure: " + stem + ".jsonl");
  }
  {
    std::ofstream out(stem + ".summary.csv");
    if (!out) throw IoError("cannot open for writing: " + stem + ".summary.csv");
    out.precision(17);
    out << "strategy,final_mpe_mean,final_mpe_std,best_fr,runtime_mean_s\n";
    for (const auto& s : report.summaries)
      out << strategy_name(s.strategy) << ',' << s.final_mpe_mean << ',' << s.final_mpe_std << ','
          << s.best_fr << ',' << s.runtime_mean_s << '\n';
    if (!out) throw IoError("write failure: " + stem + ".summary.csv");
  }
}

inline std::vector<RunResult> load_run_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run record file: " + path);
  std::vector<RunResult> runs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      runs.push_back(run_result_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError("malformed record in " + path + ": " + e.what());
    }
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Rank aggregation (mean ranks across benchmarks; ties get average ranks)

struct RankTable {
  std::vector<std::string> strategies;
  // metric -> mean rank per strategy, aligned with `strategies`
  std::map<std::string, std::vector<double>> mean_ranks;
};

namespace detail {

inline std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

inline RankTable summarize_ranks(const std::vector<BenchmarkReport>& reports) {
  if (reports.empty()) throw ArgumentError("summarize_ranks: no reports");
  RankTable table;
  for (const auto& s : reports.front().summaries)
    table.strategies.push_back(strategy_name(s.strategy));
  for (const auto& r : reports) {
    if (r.summaries.size() != table.strategies.size())
      throw ArgumentError("summarize_ranks: reports have mismatched strategy sets");
    for (std::size_t i = 0; i < r.summaries.size(); ++i)
      if (strategy_name(r.summaries[i].strategy) != table.strategies[i])
        throw ArgumentError("summarize_ranks: reports have mismatched strategy sets");
  }
  const std::vector<std::string> metrics = {"final_mae", "best_fr", "run_time"};
  for (const auto& metric : metrics)
    table.mean_ranks[metric].assign(table.strategies.size(), 0.0);
  for (const auto& r : reports) {
    std::map<std::string, std::vector<double>> values;
    for (const auto& s : r.summaries) {
      values["final_mae"].push_back(s.final_mae_mean);
      values["best_fr"].push_back(s.best_fr);
      values["run_time"].push_back(s.runtime_mean_s);
    }
    for (const auto& metric : metrics) {
      const auto ranks = detail::average_ranks(values[metric]);
      for (std::size_t i = 0; i < ranks.size(); ++i)
        table.mean_ranks[metric][i] += ranks[i] / static_cast<double>(reports.size());
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Forgetting demo (Naive on a bin-incremental stream)

struct DemoReport {
  std::vector<double> per_experience_mpe;           // final model, per test set
  std::vector<std::pair<double, double>> bin_ranges;  // target [lo, hi] per experience
  std::vector<double> predictions;                  // final model on union of test sets
  std::vector<double> targets;
  double fraction_in_last_two_bins = 0.0;
};

inline DemoReport demo_forgetting(const BenchmarkConfig& cfg, std::int64_t seed) {
  if (cfg.scenario.kind != ScenarioKind::BinIncremental)
    throw ConfigError("demo_forgetting: requires a bin-incremental scenario");
  const Dataset ds = detail::build_dataset(cfg);
  const ExperienceStream stream = detail::build_stream(cfg, ds, seed);
  TrainConfig tc = cfg.train;
  tc.network.input_dim = static_cast<int>(ds.feature_dim);
  tc.seed = seed;
  const RunResult run = train_stream(stream, Strategy::Naive, StrategyParams{}, tc);
  if (!run.ok) throw NumericError("demo_forgetting: run failed: " + run.error);

  const RegressionNet net{tc.network, run.final_params};
  DemoReport demo;
  for (const auto& e : stream.experiences) {
    const auto preds = forward_batch(net, e.test.feature_batch());
    demo.per_experience_mpe.push_back(mpe(preds, e.test.target_vector()));
    double lo = e.train.samples.front().target, hi = lo;
    for (const auto* part : {&e.train, &e.test})
      for (const auto& s : part->samples) {
        lo = std::min(lo, s.target);
        hi = std::max(hi, s.target);
      }
    demo.bin_ranges.emplace_back(lo, hi);
    for (const auto& s : e.test.samples) {
      demo.targets.push_back(s.target);
      demo.predictions.push_back(preds[&s - e.test.samples.data()]);
    }
  }
  const std::size_t K = stream.size();
  std::size_t hits = 0;
  for (double p : demo.predictions) {
    for (std::size_t b = K >= 2 ? K - 2 : 0; b < K; ++b)
      if (p >= demo.bin_ranges[b].first && p <= demo.bin_ranges[b].second) {
        ++hits;
        break;
      }
  }
  demo.fraction_in_last_two_bins =
      demo.predictions.empty() ? 0.0 : static_cast<double>(hits) / demo.predictions.size();
  return demo;
}

}  // namespace regcl
