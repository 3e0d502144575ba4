#pragma once

// Regression-adapted continual-learning metrics over the lower-triangular
// evaluation matrix (test MAE per experience after each training stage).
//
// Forgetting is signed: f_{k,j} = MAE_{k,j} - min over earlier stages of
// MAE on experience j. Negative values indicate backward transfer.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "regcl/errors.hpp"

namespace regcl {

// Lower-triangular K x K matrix; logical indices are 1-based to match the
// usual stage/experience numbering: entry (k, j), j <= k, is the test MAE
// on experience j after training through experience k.
struct EvalMatrix {
  std::vector<std::vector<double>> rows;  // rows[k-1] has k entries

  std::size_t stages() const { return rows.size(); }

  double at(std::size_t k, std::size_t j) const {
    if (k < 1 || k > rows.size() || j < 1 || j > k)
      throw ArgumentError("EvalMatrix: index (" + std::to_string(k) + "," + std::to_string(j) +
                          ") out of the lower triangle");
    return rows[k - 1][j - 1];
  }

  void push_row(std::vector<double> row) {
    if (row.size() != rows.size() + 1)
      throw ShapeError("EvalMatrix: row " + std::to_string(rows.size() + 1) + " must have " +
                       std::to_string(rows.size() + 1) + " entries");
    rows.push_back(std::move(row));
  }
};

inline double mae(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.empty() || predictions.size() != targets.size())
    throw ArgumentError("mae: batches must be non-empty and equal length");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += std::abs(targets[i] - predictions[i]);
  return s / static_cast<double>(predictions.size());
}

// Mean percent error; undefined when any target is (near) zero.
inline double mpe(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.empty() || predictions.size() != targets.size())
    throw ArgumentError("mpe: batches must be non-empty and equal length");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (std::abs(targets[i]) < 1e-12)
      throw MetricError("mpe: target at sample " + std::to_string(i) +
                        " is below 1e-12; percent error undefined");
    s += std::abs(targets[i] - predictions[i]) / std::abs(targets[i]);
  }
  return 100.0 * s / static_cast<double>(predictions.size());
}

inline double forgetting(const EvalMatrix& m, std::size_t k, std::size_t j) {
  if (!(j >= 1 && j < k && k <= m.stages()))
    throw ArgumentError("forgetting: requires 1 <= j < k <= K");
  double best = m.at(j, j);
  for (std::size_t l = j; l < k; ++l) best = std::min(best, m.at(l, j));
  return m.at(k, j) - best;
}

inline double forgetting_ratio(const EvalMatrix& m, std::size_t k, std::size_t j) {
  const double f = forgetting(m, k, j);
  const double first = m.at(j, j);
  if (first == 0.0)
    throw MetricError("forgetting_ratio: MAE_{j,j} is zero at j=" + std::to_string(j));
  return f / first;
}

struct AggregateForgetting {
  double avg_fr = 0.0;  // mean FR_{k,j} over j < k
  double avg_f = 0.0;   // mean f_{k,j} over j < k
};

inline AggregateForgetting aggregate_forgetting(const EvalMatrix& m, std::size_t k) {
  if (k < 2) throw ArgumentError("aggregate_forgetting: k must be >= 2");
  AggregateForgetting out;
  for (std::size_t j = 1; j < k; ++j) {
    out.avg_fr += forgetting_ratio(m, k, j);
    out.avg_f += forgetting(m, k, j);
  }
  out.avg_fr /= static_cast<double>(k - 1);
  out.avg_f /= static_cast<double>(k - 1);
  return out;
}

inline double incremental_mae(const EvalMatrix& m, std::size_t j) {
  if (j < 1 || j > m.stages()) throw ArgumentError("incremental_mae: stage out of range");
  double s = 0.0;
  for (std::size_t k = 1; k <= j; ++k) s += m.at(j, k);
  return s / static_cast<double>(j);
}

inline double best_forgetting_over_trials(const std::vector<double>& avg_frs) {
  if (avg_frs.empty()) throw ArgumentError("best_forgetting_over_trials: empty trial list");
  return *std::min_element(avg_frs.begin(), avg_frs.end());
}

}  // namespace regcl
