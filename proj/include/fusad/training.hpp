#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fusad/data.hpp"
#include "fusad/model.hpp"
#include "fusad/random.hpp"
#include "fusad/tensor.hpp"

namespace fusad {

/// (sum lambda (x - xhat)^2) / (sum lambda); x, xhat any equal shape, lambda 0/1 per element.
/// Throws ContractError when no element is selected.
Tensor masked_mse(const Tensor& x, const Tensor& x_hat, const std::vector<double>& lambda);
Tensor mse_loss(const Tensor& prediction, const Tensor& target);

/// Smoothed targets (1 - eps) * onehot + eps / k.
std::vector<double> smooth_labels(std::size_t label, std::size_t k, double eps);
/// Mean over the batch of -sum_i y_smooth_i log softmax(logits)_i; logits [B, k].
Tensor label_smooth_ce(const Tensor& logits, const std::vector<int>& labels, double eps);

struct MaskSpec {
  double ratio = 0.25;
  MaskTokenPolicy policy = MaskTokenPolicy::zero;
};

/// clamp(round(ratio * Z), 1, Z - 1); needs Z >= 2.
std::size_t masked_patch_count(double ratio, std::size_t tokens);
/// Per row, exactly masked_patch_count distinct tokens hidden (1) uniformly at random. Size rows * Z.
std::vector<std::uint8_t> sample_patch_mask(std::size_t rows, std::size_t tokens, double ratio, Rng& rng);
/// Expands a token mask to timesteps: lambda [rows * T] is 1 inside hidden patches.
std::vector<double> timestep_mask(const std::vector<std::uint8_t>& token_mask, std::size_t rows, std::size_t tokens,
                                  std::size_t patch_len, std::size_t length);

struct TrainConfig {
  double lr_pretrain = 1e-3;
  double lr_finetune = 1e-4;
  double weight_decay = -1.0;  // negative: 1e-4 for classification, 1e-6 otherwise
  std::size_t batch_size = 128;
  std::size_t epochs_pretrain = 10;
  std::size_t epochs_finetune = 10;
  double label_smoothing = 0.1;
  double val_fraction = 0.2;
  /// Anomaly fine-tuning only: probability that a training row gets one synthetic
  /// outlier of amplitude U(3, 10) (random sign) added to its input while the target
  /// stays clean. 0 trains plain reconstruction.
  double outlier_augmentation = 0.0;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);
double effective_weight_decay(const TrainConfig& config, Task task);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double metric = 0.0;
  double wall_time = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> trace;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  /// Set when a non-finite loss stopped training; parameters hold the last good values.
  bool aborted = false;
  std::string diagnostic;
};

/// Masked-patch reconstruction pretraining. Per epoch: shuffle, batch, mask, reconstruct,
/// masked MSE over hidden timesteps, AdamW step. Reports the mean batch loss (metric = loss).
TrainResult pretrain(FusADModel& model, const SeriesDataset& data, const MaskSpec& mask, const TrainConfig& config);

/// Validation metric used for best-epoch selection: accuracy (higher is better) for
/// classification, MSE (lower is better) otherwise.
double validation_metric(FusADModel& model, const SeriesDataset& data, Task task);
bool metric_improves(Task task, double candidate, double incumbent);

/// Supervised training of one head (plus trunk). Returns with the best validation epoch's
/// parameters loaded. An empty `val` selects on training loss.
TrainResult finetune(FusADModel& model, const SeriesDataset& train, const SeriesDataset& val, Task task,
                     const TrainConfig& config);

/// Model outputs for every sample, batched, without recording gradients.
std::vector<double> predict(FusADModel& model, const SeriesDataset& data, Task task, std::size_t batch_size = 256);

/// Per-timestep anomaly scores for a whole series: non-overlapping windows of the
/// model's length, the last one aligned to the series end, overlaps averaged.
std::vector<double> score_series(FusADModel& model, const Series& series);

/// One JSON object per line: epoch, loss, metric, wall_time.
void write_trace_jsonl(const std::vector<EpochRecord>& trace, const std::filesystem::path& path);
void write_trace_csv(const std::vector<EpochRecord>& trace, const std::filesystem::path& path);

}  // namespace fusad
