#include "fusad/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "fusad/error.hpp"
#include "fusad/metrics.hpp"
#include "fusad/optim.hpp"

namespace fusad {

Tensor masked_mse(const Tensor& x, const Tensor& x_hat, const std::vector<double>& lambda) {
  if (x.shape() != x_hat.shape()) {
    throw ShapeError("masked_mse: " + shape_str(x.shape()) + " vs " + shape_str(x_hat.shape()));
  }
  if (lambda.size() != x.numel()) throw ShapeError("masked_mse: mask size differs from the input");
  double selected = 0;
  for (double l : lambda) selected += l;
  if (!(selected > 0)) throw ContractError("masked_mse: the mask selects no element (sum of lambda is 0)");
  const Tensor weights(x.shape(), lambda);
  return scale(sum(mul(square(sub(x, x_hat)), weights)), 1.0 / selected);
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("mse_loss: " + shape_str(prediction.shape()) + " vs " + shape_str(target.shape()));
  }
  return mean(square(sub(prediction, target)));
}

std::vector<double> smooth_labels(std::size_t label, std::size_t k, double eps) {
  if (k < 2) throw ContractError("label smoothing needs at least 2 classes");
  if (label >= k) throw ContractError("label " + std::to_string(label) + " is out of range for " + std::to_string(k) + " classes");
  std::vector<double> y(k, eps / static_cast<double>(k));
  y[label] += 1.0 - eps;
  return y;
}

Tensor label_smooth_ce(const Tensor& logits, const std::vector<int>& labels, double eps) {
  if (logits.rank() != 2) throw ShapeError("label_smooth_ce expects logits [B, k], got " + shape_str(logits.shape()));
  const std::size_t batch = logits.size(0);
  const std::size_t k = logits.size(1);
  if (labels.size() != batch) throw ShapeError("label_smooth_ce: label count differs from the batch");
  std::vector<double> targets;
  targets.reserve(batch * k);
  for (int y : labels) {
    if (y < 0) throw ContractError("negative class label");
    const auto row = smooth_labels(static_cast<std::size_t>(y), k, eps);
    targets.insert(targets.end(), row.begin(), row.end());
  }
  const Tensor t({batch, k}, std::move(targets));
  return scale(sum(mul(log_softmax(logits), t)), -1.0 / static_cast<double>(batch));
}

// ---------------------------------------------------------------------------

std::size_t masked_patch_count(double ratio, std::size_t tokens) {
  if (tokens < 2) throw ConfigError("masking needs at least 2 patches per sample (one hidden, one visible)");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("mask ratio must lie in (0, 1)");
  const auto n = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(tokens)));
  return std::clamp<std::size_t>(n, 1, tokens - 1);
}

std::vector<std::uint8_t> sample_patch_mask(std::size_t rows, std::size_t tokens, double ratio, Rng& rng) {
  const std::size_t hidden = masked_patch_count(ratio, tokens);
  std::vector<std::uint8_t> mask(rows * tokens, 0);
  std::vector<std::size_t> order(tokens);
  for (std::size_t r = 0; r < rows; ++r) {
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first `hidden` slots become a uniform random subset.
    for (std::size_t i = 0; i < hidden; ++i) {
      const std::size_t j = i + rng.index(tokens - i);
      std::swap(order[i], order[j]);
      mask[r * tokens + order[i]] = 1;
    }
  }
  return mask;
}

std::vector<double> timestep_mask(const std::vector<std::uint8_t>& token_mask, std::size_t rows, std::size_t tokens,
                                  std::size_t patch_len, std::size_t length) {
  if (token_mask.size() != rows * tokens) throw ShapeError("token mask size differs from rows * tokens");
  std::vector<double> lambda(rows * length, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < length; ++t) {
      lambda[r * length + t] = token_mask[r * tokens + t / patch_len] ? 1.0 : 0.0;
    }
  }
  return lambda;
}

void validate(const TrainConfig& c) {
  if (!(c.lr_pretrain > 0) || !(c.lr_finetune > 0)) throw ConfigError("learning rates must be positive");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(c.label_smoothing >= 0.0 && c.label_smoothing < 1.0)) throw ConfigError("label_smoothing must lie in [0, 1)");
  if (!(c.val_fraction >= 0.0 && c.val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
  if (!(c.outlier_augmentation >= 0.0 && c.outlier_augmentation <= 1.0)) {
    throw ConfigError("outlier_augmentation must lie in [0, 1]");
  }
}

double effective_weight_decay(const TrainConfig& c, Task task) {
  if (c.weight_decay >= 0) return c.weight_decay;
  return task == Task::classification ? 1e-4 : 1e-6;
}

// ---------------------------------------------------------------------------

namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const std::vector<Parameter>& params) {
  Snapshot s;
  s.reserve(params.size());
  for (const auto& p : params) s.emplace_back(p.value.data().begin(), p.value.data().end());
  return s;
}

void restore(std::vector<Parameter>& params, const Snapshot& s) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].value.mutable_data();
    std::copy(s[i].begin(), s[i].end(), dst.begin());
  }
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch)));
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void check_dataset(const FusADModel& model, const SeriesDataset& data, const char* what) {
  if (data.size() == 0) throw InputError(std::string(what) + ": dataset is empty");
  const auto& c = model.config();
  if (data.n_channels != c.n_channels || data.length != c.seq_len) {
    throw ConfigError(std::string(what) + ": data samples are [" + std::to_string(data.n_channels) + ", " +
                      std::to_string(data.length) + "] but the model expects [" + std::to_string(c.n_channels) +
                      ", " + std::to_string(c.seq_len) + "]");
  }
}

// Adds one outlier to a random subset of rows; returns the corrupted copy.
Tensor with_outliers(const Tensor& x, double rate, Rng& rng) {
  std::vector<double> v(x.data().begin(), x.data().end());
  const std::size_t length = x.size(-1);
  for (std::size_t row = 0; row < v.size() / length; ++row) {
    if (rng.uniform(0.0, 1.0) >= rate) continue;
    const double sign = rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    v[row * length + rng.index(length)] += sign * rng.uniform(3.0, 10.0);
  }
  return Tensor(x.shape(), std::move(v));
}

Tensor task_loss(FusADModel& model, const SeriesDataset& data, const std::vector<std::size_t>& idx, Task task,
                 const TrainConfig& config, Rng& rng) {
  const Tensor x = data.batch_inputs(idx);
  const bool corrupt = task == Task::anomaly && config.outlier_augmentation > 0;
  const Tensor out = model.forward(corrupt ? with_outliers(x, config.outlier_augmentation, rng) : x, task);
  const double eps = config.label_smoothing;
  switch (task) {
    case Task::classification:
      return label_smooth_ce(out, data.batch_labels(idx), eps);
    case Task::forecasting:
      return mse_loss(out, data.batch_targets(idx));
    case Task::anomaly:
      return mse_loss(out, x);
  }
  throw ConfigError("unknown task");
}

}  // namespace

TrainResult pretrain(FusADModel& model, const SeriesDataset& data, const MaskSpec& mask, const TrainConfig& config) {
  validate(config);
  check_dataset(model, data, "pretrain");
  const auto& mc = model.config();
  if (mask.policy != mc.mask_token) throw ConfigError("mask token policy differs between the mask spec and the model");
  const std::size_t z = mc.tokens();
  masked_patch_count(mask.ratio, z);  // validates ratio and Z >= 2

  auto params = model.parameters();
  AdamW opt(params, {config.lr_pretrain, effective_weight_decay(config, mc.task)});
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  model.set_training(true);
  Snapshot good = snapshot(params);
  TrainResult result;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= config.epochs_pretrain; ++epoch) {
    double total = 0;
    std::size_t seen = 0;
    for (const auto& idx : shuffled_batches(data.size(), config.batch_size, rng)) {
      const Tensor x = data.batch_inputs(idx);
      const std::size_t rows = idx.size() * mc.n_channels;
      const auto token_mask = sample_patch_mask(rows, z, mask.ratio, rng);
      const auto lambda = timestep_mask(token_mask, rows, z, mc.patch.patch_len, mc.seq_len);
      try {
        const Tensor recon = model.reconstruct(x, &token_mask);
        const Tensor loss = masked_mse(x, recon, lambda);
        if (!std::isfinite(loss.item())) throw NumericalError("pretraining loss is not finite");
        opt.zero_grad();
        loss.backward();
        opt.step();
        total += loss.item() * static_cast<double>(idx.size());
        seen += idx.size();
      } catch (const NumericalError& e) {
        restore(params, good);
        model.set_training(false);
        result.aborted = true;
        result.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what() + "; restored the last good parameters";
        return result;
      }
    }
    const double loss = total / static_cast<double>(seen);
    good = snapshot(params);
    result.trace.push_back({epoch, loss, loss, seconds_since(start)});
    if (result.trace.size() == 1 || loss < result.best_metric) {
      result.best_metric = loss;
      result.best_epoch = epoch;
    }
  }
  model.set_training(false);
  return result;
}

std::vector<double> predict(FusADModel& model, const SeriesDataset& data, Task task, std::size_t batch_size) {
  NoGradGuard no_grad;
  const bool was_training = model.training();
  model.set_training(false);
  std::vector<double> out;
  for (std::size_t i = 0; i < data.size(); i += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, data.size() - i));
    std::iota(idx.begin(), idx.end(), i);
    const Tensor y = model.forward(data.batch_inputs(idx), task);
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  model.set_training(was_training);
  return out;
}

double validation_metric(FusADModel& model, const SeriesDataset& data, Task task) {
  const auto out = predict(model, data, task);
  switch (task) {
    case Task::classification:
      return accuracy(argmax_rows(out, model.config().num_classes), data.labels);
    case Task::forecasting:
      return mse_mae(out, data.targets).mse;
    case Task::anomaly:
      return mse_mae(out, data.inputs).mse;
  }
  return 0.0;
}

bool metric_improves(Task task, double candidate, double incumbent) {
  return task == Task::classification ? candidate > incumbent : candidate < incumbent;
}

TrainResult finetune(FusADModel& model, const SeriesDataset& train, const SeriesDataset& val, Task task,
                     const TrainConfig& config) {
  validate(config);
  check_dataset(model, train, "finetune");
  if (train.task != task) {
    throw ConfigError("finetune: task " + to_string(task) + " does not match the dataset's task " +
                      to_string(train.task));
  }
  if (task == Task::classification && train.labels.size() != train.size()) {
    throw InputError("classification data lacks labels");
  }
  if (task == Task::forecasting && train.horizon != model.config().horizon) {
    throw ConfigError("finetune: data horizon " + std::to_string(train.horizon) + " differs from the model's " +
                      std::to_string(model.config().horizon));
  }
  const SeriesDataset& selector = val.size() > 0 ? val : train;

  auto params = model.parameters();
  AdamW opt(params, {config.lr_finetune, effective_weight_decay(config, task)});
  Rng rng(config.seed ^ 0x5851f42d4c957f2dULL);
  Snapshot good = snapshot(params);
  Snapshot best = good;
  TrainResult result;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= config.epochs_finetune; ++epoch) {
    model.set_training(true);
    double total = 0;
    std::size_t seen = 0;
    for (const auto& idx : shuffled_batches(train.size(), config.batch_size, rng)) {
      try {
        const Tensor loss = task_loss(model, train, idx, task, config, rng);
        if (!std::isfinite(loss.item())) throw NumericalError(to_string(task) + " loss is not finite");
        opt.zero_grad();
        loss.backward();
        opt.step();
        total += loss.item() * static_cast<double>(idx.size());
        seen += idx.size();
      } catch (const NumericalError& e) {
        restore(params, result.trace.empty() ? good : best);
        model.set_training(false);
        result.aborted = true;
        result.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what() + "; restored the best parameters so far";
        return result;
      }
    }
    const double metric = validation_metric(model, selector, task);
    result.trace.push_back({epoch, total / static_cast<double>(seen), metric, seconds_since(start)});
    if (result.trace.size() == 1 || metric_improves(task, metric, result.best_metric)) {
      result.best_metric = metric;
      result.best_epoch = epoch;
      best = snapshot(params);
    }
  }
  restore(params, best);
  model.set_training(false);
  return result;
}

std::vector<double> score_series(FusADModel& model, const Series& series) {
  const std::size_t window = model.config().seq_len;
  const std::size_t length = series.length();
  const std::size_t channels = series.channels();
  if (channels != model.config().n_channels) {
    throw ConfigError("series has " + std::to_string(channels) + " channels, the model expects " +
                      std::to_string(model.config().n_channels));
  }
  if (length < window) {
    throw InputError("series of length " + std::to_string(length) + " is shorter than the model window " +
                     std::to_string(window));
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window <= length; s += window) starts.push_back(s);
  if (starts.back() + window < length) starts.push_back(length - window);

  std::vector<double> total(length, 0.0);
  std::vector<double> count(length, 0.0);
  for (std::size_t s : starts) {
    std::vector<double> x;
    x.reserve(channels * window);
    for (const auto& v : series.values) {
      x.insert(x.end(), v.begin() + static_cast<std::ptrdiff_t>(s), v.begin() + static_cast<std::ptrdiff_t>(s + window));
    }
    const Tensor scores = anomaly_scores(model, Tensor({1, channels, window}, std::move(x)));
    for (std::size_t t = 0; t < window; ++t) {
      total[s + t] += scores.data()[t];
      count[s + t] += 1.0;
    }
  }
  for (std::size_t t = 0; t < length; ++t) total[t] /= count[t];
  return total;
}

void write_trace_jsonl(const std::vector<EpochRecord>& trace, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& r : trace) {
    out << nlohmann::json{{"epoch", r.epoch}, {"loss", r.loss}, {"metric", r.metric}, {"wall_time", r.wall_time}}.dump()
        << '\n';
  }
}

void write_trace_csv(const std::vector<EpochRecord>& trace, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(17);
  out << "epoch,loss,metric,wall_time\n";
  for (const auto& r : trace) out << r.epoch << ',' << r.loss << ',' << r.metric << ',' << r.wall_time << '\n';
}

}  // namespace fusad
