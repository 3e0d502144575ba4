#pragma once

// Experience-stream construction: bin-incremental (target-range bins) and
// input-incremental (category partition) scenarios.

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "regcl/dataset.hpp"
#include "regcl/errors.hpp"

namespace regcl {

struct Experience {
  int task_id = 0;
  Dataset train;
  Dataset test;
};

enum class ScenarioKind { BinIncremental, InputIncremental };

struct ExperienceStream {
  std::vector<Experience> experiences;
  ScenarioKind scenario = ScenarioKind::BinIncremental;
  std::string provenance;

  std::size_t size() const { return experiences.size(); }

  std::size_t total_train_size() const {
    std::size_t n = 0;
    for (const auto& e : experiences) n += e.train.size();
    return n;
  }
};

enum class BinMode { Quantile, EqualWidth };

namespace detail {

inline Experience make_experience(const Dataset& subset, int task_id, double test_fraction,
                                  std::int64_t seed, const std::string& what) {
  try {
    auto [train, test] = split_train_test(subset, test_fraction, seed);
    return Experience{task_id, std::move(train), std::move(test)};
  } catch (const ArgumentError& e) {
    throw ScenarioError(what + ": cannot split into train/test (" + e.what() + ")");
  }
}

}  // namespace detail

inline ExperienceStream build_bin_incremental(const Dataset& ds, int n_bins, BinMode mode,
                                              double test_fraction, std::int64_t seed) {
  if (n_bins < 2) throw ScenarioError("bin_incremental: n_bins must be >= 2");
  if (ds.samples.size() < static_cast<std::size_t>(n_bins) * 5)
    throw ScenarioError("bin_incremental: dataset needs at least 5 samples per bin");

  // sort by target, ties by ascending id
  std::vector<std::size_t> order(ds.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = ds.samples[a];
    const auto& sb = ds.samples[b];
    return sa.target != sb.target ? sa.target < sb.target : sa.id < sb.id;
  });

  std::vector<std::vector<std::size_t>> bins(static_cast<std::size_t>(n_bins));
  if (mode == BinMode::Quantile) {
    const std::size_t n = order.size();
    const std::size_t base = n / static_cast<std::size_t>(n_bins);
    const std::size_t rem = n % static_cast<std::size_t>(n_bins);
    std::size_t pos = 0;
    for (int b = 0; b < n_bins; ++b) {
      const std::size_t count = base + (static_cast<std::size_t>(b) < rem ? 1 : 0);
      bins[b].assign(order.begin() + pos, order.begin() + pos + count);
      pos += count;
    }
  } else {
    const double lo = ds.samples[order.front()].target;
    const double hi = ds.samples[order.back()].target;
    const double width = (hi - lo) / n_bins;
    for (std::size_t i : order) {
      int b = width > 0.0
                  ? static_cast<int>((ds.samples[i].target - lo) / width)
                  : 0;
      b = std::clamp(b, 0, n_bins - 1);  // last interval right-inclusive
      bins[b].push_back(i);
    }
    for (int b = 0; b < n_bins; ++b)
      if (bins[b].size() < 2)
        throw ScenarioError("bin_incremental: equal-width bin " + std::to_string(b) +
                            " has fewer than 2 samples");
  }

  ExperienceStream stream;
  stream.scenario = ScenarioKind::BinIncremental;
  stream.provenance = std::string("bin_incremental n_bins=") + std::to_string(n_bins) +
                      (mode == BinMode::Quantile ? " mode=quantile" : " mode=equal_width");
  for (int b = 0; b < n_bins; ++b) {
    Dataset subset{ {}, ds.feature_dim, ds.name + "/bin" + std::to_string(b) };
    for (std::size_t i : bins[b]) subset.samples.push_back(ds.samples[i]);
    stream.experiences.push_back(detail::make_experience(
        subset, b, test_fraction,
        static_cast<std::int64_t>(detail::mix_seed(static_cast<std::uint64_t>(seed), b)),
        "bin " + std::to_string(b)));
  }
  return stream;
}

inline ExperienceStream build_input_incremental(const Dataset& ds,
                                                const std::vector<std::string>& category_order,
                                                double test_fraction, std::int64_t seed) {
  if (category_order.size() < 2)
    throw ScenarioError("input_incremental: streams require >= 2 experiences");
  for (const auto& s : ds.samples)
    if (!s.category)
      throw ScenarioError("input_incremental: sample " + std::to_string(s.id) +
                          " has no category label");

  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    by_label[*ds.samples[i].category].push_back(i);

  for (const auto& label : category_order)
    if (!by_label.count(label))
      throw ScenarioError("input_incremental: label \"" + label + "\" not present in dataset");
  for (const auto& [label, idx] : by_label)
    if (std::find(category_order.begin(), category_order.end(), label) == category_order.end())
      throw ScenarioError("input_incremental: dataset label \"" + label +
                          "\" missing from category_order");
  if (by_label.size() != category_order.size())
    throw ScenarioError("input_incremental: category_order has duplicate labels");

  ExperienceStream stream;
  stream.scenario = ScenarioKind::InputIncremental;
  stream.provenance = "input_incremental order=";
  for (const auto& l : category_order) stream.provenance += l + ";";
  int task = 0;
  for (const auto& label : category_order) {
    Dataset subset{ {}, ds.feature_dim, ds.name + "/" + label };
    for (std::size_t i : by_label[label]) subset.samples.push_back(ds.samples[i]);
    stream.experiences.push_back(detail::make_experience(
        subset, task, test_fraction,
        static_cast<std::int64_t>(detail::mix_seed(static_cast<std::uint64_t>(seed),
                                                   static_cast<std::uint64_t>(task))),
        "category \"" + label + "\""));
    ++task;
  }
  return stream;
}

}  // namespace regcl
