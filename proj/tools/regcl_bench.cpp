// Benchmark CLI: synthetic data generation, benchmark runs, the
// catastrophic-forgetting demo, and rank aggregation across runs.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime/numeric error,
// 3 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "regcl/harness.hpp"

namespace {

using regcl::json;

int cmd_gen_data(const regcl::SyntheticSpec& spec, const std::string& out_path) {
  const regcl::Dataset ds = regcl::generate_synthetic(spec);
  regcl::CsvSchema schema;
  for (int j = 0; j < spec.feature_dim; ++j) schema.feature_columns.push_back("x" + std::to_string(j));
  schema.target_column = "y";
  schema.category_column = "category";
  regcl::save_csv(ds, out_path, schema);
  std::cout << "wrote " << ds.size() << " samples to " << out_path << "\n";
  return 0;
}

int cmd_run(const std::string& config_path) {
  const regcl::BenchmarkConfig cfg = regcl::load_benchmark_config(config_path);
  std::filesystem::create_directories(cfg.output_dir);
  const regcl::BenchmarkReport report = regcl::run_benchmark(cfg);
  const std::string stem = cfg.output_dir + "/" + cfg.name;
  regcl::export_results(report, stem);

  std::cout << "benchmark " << report.name << " (" << report.n_trials << " trials)\n";
  std::cout << "strategy      final_mpe_mean  final_mpe_std    best_fr  runtime_mean_s\n";
  for (const auto& s : report.summaries) {
    std::printf("%-12s %15.4f %14.4f %10.4f %15.3f%s\n", regcl::strategy_name(s.strategy),
                s.final_mpe_mean, s.final_mpe_std, s.best_fr, s.runtime_mean_s,
                s.degraded ? "  [degraded]" : "");
  }
  std::cout << "records: " << stem << ".jsonl\nsummary: " << stem << ".summary.csv\n";
  return 0;
}

int cmd_demo(const std::string& config_path, std::int64_t seed, const std::string& out_path) {
  const regcl::BenchmarkConfig cfg = regcl::load_benchmark_config(config_path);
  const regcl::DemoReport demo = regcl::demo_forgetting(cfg, seed);
  std::cout << "final percent error per experience:\n";
  for (std::size_t i = 0; i < demo.per_experience_mpe.size(); ++i)
    std::printf("  experience %zu: %8.2f%%  (target range [%.4f, %.4f])\n", i + 1,
                demo.per_experience_mpe[i], demo.bin_ranges[i].first, demo.bin_ranges[i].second);
  std::printf("fraction of predictions in the last two bins' range: %.3f\n",
              demo.fraction_in_last_two_bins);
  if (!out_path.empty()) {
    json j;
    j["per_experience_mpe"] = demo.per_experience_mpe;
    j["bin_ranges"] = demo.bin_ranges;
    j["predictions"] = demo.predictions;
    j["targets"] = demo.targets;
    j["fraction_in_last_two_bins"] = demo.fraction_in_last_two_bins;
    std::ofstream out(out_path);
    if (!out) throw regcl::IoError("cannot open for writing: " + out_path);
    out << j.dump(2) << '\n';
    std::cout << "demo data written to " << out_path << "\n";
  }
  return 0;
}

int cmd_rank(const std::vector<std::string>& record_files) {
  std::vector<regcl::BenchmarkReport> reports;
  for (const auto& path : record_files) {
    const auto runs = regcl::load_run_records(path);
    // rebuild per-strategy summaries from the persisted records
    regcl::BenchmarkReport report;
    report.name = path;
    std::vector<regcl::Strategy> seen;
    for (const auto& r : runs)
      if (std::find(seen.begin(), seen.end(), r.strategy) == seen.end())
        seen.push_back(r.strategy);
    for (regcl::Strategy s : seen) {
      std::vector<regcl::RunResult> per;
      for (const auto& r : runs)
        if (r.strategy == s) per.push_back(r);
      report.n_trials = static_cast<int>(per.size());
      report.summaries.push_back(regcl::detail::summarize_strategy(s, per));
    }
    reports.push_back(std::move(report));
  }
  const regcl::RankTable table = regcl::summarize_ranks(reports);
  std::cout << "metric,";
  for (std::size_t i = 0; i < table.strategies.size(); ++i)
    std::cout << table.strategies[i] << (i + 1 < table.strategies.size() ? "," : "\n");
  for (const auto& [metric, ranks] : table.mean_ranks) {
    std::cout << metric << ",";
    for (std::size_t i = 0; i < ranks.size(); ++i)
      std::cout << ranks[i] << (i + 1 < ranks.size() ? "," : "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual-learning benchmark for regression surrogate models"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset as CSV");
  regcl::SyntheticSpec spec;
  std::string gen_out = "synthetic.csv";
  gen->add_option("-n,--n-samples", spec.n_samples, "Number of samples");
  gen->add_option("-d,--feature-dim", spec.feature_dim, "Feature dimension");
  gen->add_option("-c,--n-categories", spec.n_categories, "Number of categories");
  gen->add_option("--noise-std", spec.noise_std, "Target noise standard deviation");
  gen->add_option("-s,--seed", spec.seed, "Generator seed");
  gen->add_option("-o,--output", gen_out, "Output CSV path");

  auto* run = app.add_subcommand("run", "Run a benchmark from a config file");
  std::string run_config;
  run->add_option("config", run_config, "Benchmark config (JSON)")->required();

  auto* demo = app.add_subcommand("demo-forgetting",
                                  "Naive-only forgetting demonstration on a bin stream");
  std::string demo_config, demo_out;
  std::int64_t demo_seed = 0;
  demo->add_option("config", demo_config, "Benchmark config (JSON)")->required();
  demo->add_option("-s,--seed", demo_seed, "Trial seed");
  demo->add_option("-o,--output", demo_out, "Optional JSON output with plot-ready data");

  auto* rank = app.add_subcommand("rank", "Mean ranks of strategies across run record files");
  std::vector<std::string> rank_files;
  rank->add_option("records", rank_files, "One or more .jsonl run record files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(spec, gen_out);
    if (run->parsed()) return cmd_run(run_config);
    if (demo->parsed()) return cmd_demo(demo_config, demo_seed, demo_out);
    if (rank->parsed()) return cmd_rank(rank_files);
  } catch (const regcl::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const regcl::ScenarioError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const regcl::ArgumentError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const regcl::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const regcl::IngestionError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
