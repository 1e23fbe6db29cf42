#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fusad/task.hpp"
#include "fusad/tensor.hpp"

namespace fusad {

/// A multivariate series [N][T] with optional per-timestep anomaly labels.
struct Series {
  std::vector<std::string> names;          // one per channel
  std::vector<std::vector<double>> values;  // [N][T]
  std::vector<int> labels;                  // [T] or empty
  std::vector<std::string> timestamps;      // [T] or empty

  std::size_t channels() const { return values.size(); }
  std::size_t length() const { return values.empty() ? 0 : values.front().size(); }
};

struct CsvSchema {
  bool has_header = true;
  /// Column holding per-timestep anomaly labels; ignored when absent from the header.
  std::string label_column = "label";
};

/**
 * Reads a timestep-per-row CSV. A column named timestamp/time/date (case-insensitive)
 * is kept as text; `label` becomes integer anomaly labels; every other column is a channel.
 * Ragged rows, non-numeric cells and NaN/Inf values raise ParseError naming row and column.
 */
Series load_series_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
/// Writes values with 17 significant digits so load_series_csv recovers them exactly.
void save_series_csv(const Series& series, const std::filesystem::path& path);

/// Key-value manifest (`key = value` or `key: value`, `#` comments).
struct Manifest {
  Task task = Task::forecasting;
  std::size_t n_channels = 0;
  std::size_t split_train_end = 0;  // first index (timestep or sample) of the test split
  std::size_t horizon = 0;
  std::map<std::string, std::string> extra;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/**
 * Fixed-length samples ready for the model.
 *   inputs   [S, N, T]
 *   labels   [S] class indices (classification)
 *   targets  [S, N, h] (forecasting)
 *   point_labels [S, T] (anomaly windows)
 */
struct SeriesDataset {
  Task task = Task::classification;
  std::size_t n_channels = 0;
  std::size_t length = 0;
  std::size_t horizon = 0;
  std::size_t num_classes = 0;
  std::vector<double> inputs;
  std::vector<int> labels;
  std::vector<double> targets;
  std::vector<int> point_labels;

  std::size_t size() const;
  /// Gathers the listed samples into [k, N, T].
  Tensor batch_inputs(const std::vector<std::size_t>& indices) const;
  /// [k, N, h].
  Tensor batch_targets(const std::vector<std::size_t>& indices) const;
  std::vector<int> batch_labels(const std::vector<std::size_t>& indices) const;
  SeriesDataset subset(const std::vector<std::size_t>& indices) const;
};

/// Classification CSV: one sample per row, `label` first, then N*T values channel-major.
SeriesDataset load_classification_csv(const std::filesystem::path& path, std::size_t n_channels);
void save_classification_csv(const SeriesDataset& ds, const std::filesystem::path& path);

/// Per-channel z-score statistics. A channel with zero spread keeps std = 1.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> constant;

  void apply(Series& series) const;
  void invert(Series& series) const;
  void apply(SeriesDataset& ds) const;
  void invert(SeriesDataset& ds) const;
};

/// Statistics from timesteps [0, train_end) only.
Normalizer fit_zscore(const Series& series, std::size_t train_end);
/// Statistics from the inputs of `train` only.
Normalizer fit_zscore(const SeriesDataset& train);

struct WindowSpec {
  std::size_t lookback = 96;
  std::size_t horizon = 0;
  std::size_t stride = 1;
};

struct Window {
  std::size_t start = 0;
  std::vector<double> lookback;  // [N * lookback], channel-major
  std::vector<double> target;    // [N * horizon]
  std::vector<int> labels;       // [lookback] when the series is labelled
};

/// floor((T - lookback - h) / stride) + 1 windows in order. InputError when the spec does not fit.
std::vector<Window> sliding_windows(const Series& series, const WindowSpec& spec);
std::size_t window_count(std::size_t length, const WindowSpec& spec);

SeriesDataset forecasting_dataset(const Series& series, const WindowSpec& spec);
/// Lookback windows with their point labels; the horizon is ignored.
SeriesDataset anomaly_dataset(const Series& series, const WindowSpec& spec);

/// Timesteps [begin, end) of every channel and of the labels.
Series slice_series(const Series& series, std::size_t begin, std::size_t end);

/// Chronological split point: floor(length * train_fraction).
std::size_t chronological_split(std::size_t length, double train_fraction);
/// Per-class shuffle with `val_fraction` of each class held out (at least one when the class has two or more).
void stratified_split(const std::vector<int>& labels, double val_fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& val);

// ---------------------------------------------------------------------------
// Synthetic corpora.

struct SynthClassificationSpec {
  std::size_t n_per_class = 50;
  std::size_t n_channels = 1;
  std::size_t length = 96;
  std::vector<double> freqs = {3.0, 9.0};  // cycles per series, one per class
  double noise = 0.5;
  std::uint64_t seed = 0;
};

/// Class c: sin(2 pi f_c t / T + phi) + N(0, noise^2), phi ~ U[0, 2 pi) per sample and channel.
/// Samples are interleaved by class (0, 1, ..., k-1, 0, 1, ...).
SeriesDataset synth_classification(const SynthClassificationSpec& spec);

struct SynthSineSpec {
  std::size_t n_channels = 1;
  std::size_t length = 1000;
  std::vector<double> periods = {24.0};  // per channel, cycled
  double noise = 0.0;
  std::uint64_t seed = 0;
};

/// sin(2 pi t / p_n + phi_n) + N(0, noise^2).
Series synth_sine(const SynthSineSpec& spec);

struct SynthAnomalySpec {
  std::size_t length = 2000;
  std::size_t n_channels = 1;
  double period = 25.0;
  double noise = 0.1;
  std::size_t spikes = 5;
  double spike_amplitude = 10.0;  // in units of the base signal's standard deviation
  std::size_t level_shifts = 0;
  std::size_t shift_length = 20;
  double shift_amplitude = 3.0;
  /// Injections are placed at or after this index so a clean prefix can calibrate thresholds.
  std::size_t clean_prefix = 0;
  std::uint64_t seed = 0;
};

struct Injection {
  std::size_t start = 0;
  std::size_t length = 1;
  double amplitude = 0.0;  // added to every channel over [start, start + length)
  bool spike = true;
};

struct SynthAnomalyResult {
  Series series;  // labels set to 1 inside injections
  Series base;    // clean base signal
  std::vector<Injection> injections;
};

SynthAnomalyResult synth_anomaly(const SynthAnomalySpec& spec);

}  // namespace fusad
