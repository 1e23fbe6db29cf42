#include "fusad/metrics.hpp"

#include <cmath>

#include "fusad/error.hpp"

namespace fusad {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw InputError("accuracy: prediction and label counts differ");
  if (labels.empty()) throw InputError("accuracy: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

ErrorPair mse_mae(const std::vector<double>& prediction, const std::vector<double>& truth) {
  if (prediction.size() != truth.size()) throw InputError("mse_mae: prediction and truth sizes differ");
  if (truth.empty()) throw InputError("mse_mae: no values");
  ErrorPair e;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = prediction[i] - truth[i];
    e.mse += d * d;
    e.mae += std::abs(d);
  }
  e.mse /= static_cast<double>(truth.size());
  e.mae /= static_cast<double>(truth.size());
  return e;
}

std::vector<int> point_adjusted(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw InputError("point adjustment: label sequences differ in length");
  std::vector<int> out = predicted;
  std::size_t t = 0;
  while (t < truth.size()) {
    if (!truth[t]) {
      ++t;
      continue;
    }
    std::size_t end = t;
    bool hit = false;
    for (; end < truth.size() && truth[end]; ++end) hit = hit || predicted[end] != 0;
    if (hit) {
      for (std::size_t i = t; i < end; ++i) out[i] = 1;
    }
    t = end;
  }
  return out;
}

Prf1 prf1(const std::vector<int>& predicted, const std::vector<int>& truth, bool point_adjust) {
  if (predicted.size() != truth.size()) {
    throw InputError("prf1: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(truth.size()) + " labels");
  }
  const std::vector<int> pred = point_adjust ? point_adjusted(predicted, truth) : predicted;
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i] && truth[i]) ++tp;
    else if (pred[i]) ++fp;
    else if (truth[i]) ++fn;
  }
  Prf1 r;
  r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

std::vector<int> argmax_rows(const std::vector<double>& logits, std::size_t k) {
  if (k == 0 || logits.size() % k != 0) throw ShapeError("argmax_rows: logits are not a multiple of k");
  std::vector<int> out(logits.size() / k);
  for (std::size_t r = 0; r < out.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (logits[r * k + j] > logits[r * k + best]) best = j;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

nlohmann::json MetricReport::to_json() const {
  for (const auto& [name, value] : metrics) {
    if (!std::isfinite(value)) throw NumericalError("metric '" + name + "' is not finite");
  }
  return nlohmann::json{{"task", to_string(task)}, {"metrics", metrics}, {"per_sample", per_sample}, {"config", config}};
}

}  // namespace fusad
