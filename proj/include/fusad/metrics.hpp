#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fusad/task.hpp"

namespace fusad {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

struct ErrorPair {
  double mse = 0.0;
  double mae = 0.0;
};
ErrorPair mse_mae(const std::vector<double>& prediction, const std::vector<double>& truth);

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// With `point_adjust`, a true segment containing any predicted positive counts as fully detected.
/// Precision is 0 when nothing is predicted positive; F1 is 0 when P + R = 0.
Prf1 prf1(const std::vector<int>& predicted, const std::vector<int>& truth, bool point_adjust);

/// Predictions after point adjustment (used by prf1).
std::vector<int> point_adjusted(const std::vector<int>& predicted, const std::vector<int>& truth);

/// argmax over the last axis of row-major [rows, k] logits.
std::vector<int> argmax_rows(const std::vector<double>& logits, std::size_t k);

struct MetricReport {
  Task task = Task::classification;
  std::map<std::string, double> metrics;
  std::vector<double> per_sample;
  nlohmann::json config;

  /// Throws NumericalError when any scalar is not finite.
  nlohmann::json to_json() const;
};

}  // namespace fusad
