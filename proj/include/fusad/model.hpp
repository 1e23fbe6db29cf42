#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fusad/embedding.hpp"
#include "fusad/fusion.hpp"
#include "fusad/spectral.hpp"
#include "fusad/task.hpp"
#include "fusad/tensor.hpp"

namespace fusad {

/// Component removals studied in the ablation table.
struct Ablation {
  bool no_asm = false;
  bool no_asm_fourier = false;
  bool no_asm_threshold = false;
  bool no_asm_wavelet = false;
  bool no_ifm = false;
  bool no_pretrain = false;  // training-side: skip loading pretrained weights
};

enum class MaskTokenPolicy { zero, learnable_token };

std::string to_string(MaskTokenPolicy policy);
MaskTokenPolicy mask_token_policy_from_string(const std::string& name);

struct FusADConfig {
  std::size_t n_channels = 1;
  std::size_t seq_len = 96;
  PatchConfig patch;
  std::size_t layers = 2;
  SpectralConfig spectral;
  IfmConfig ifm;
  Task task = Task::classification;
  std::size_t num_classes = 0;  // 0: no classification head
  std::size_t horizon = 0;      // 0: no forecasting head
  Ablation ablation;
  MaskTokenPolicy mask_token = MaskTokenPolicy::zero;
  std::uint64_t seed = 0;

  std::size_t tokens() const { return num_patches(seq_len, patch.patch_len); }
};

/// Throws ConfigError when the configuration cannot build a model.
void validate(const FusADConfig& config);

/// Per-component parameter counts derived from the configuration alone.
struct ParameterAccounting {
  std::map<std::string, std::size_t> components;
  std::size_t total() const;
};
ParameterAccounting parameter_accounting(const FusADConfig& config);

/**
 * Patch embedding, L x (LN -> ASM -> LN -> IFM) along the token axis, and task heads.
 *
 * The trunk is channel independent: a batch [B, N, T] is processed as B*N series
 * sharing parameters, carried as a [B*N, D, Z] state. Heads:
 *   recon  per-token D -> b, cropped to T (masked pretraining)
 *   ano    same form as recon, trained on plain reconstruction
 *   cls    mean over tokens, variates flattened, N*D -> k      (when num_classes >= 2)
 *   fore   per variate D*Z -> h                                (when horizon >= 1)
 */
class FusADModel {
 public:
  explicit FusADModel(FusADConfig config);
  FusADModel(const FusADModel&) = delete;
  FusADModel& operator=(const FusADModel&) = delete;
  FusADModel(FusADModel&&) noexcept;
  FusADModel& operator=(FusADModel&&) noexcept;
  ~FusADModel();

  const FusADConfig& config() const { return config_; }

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

  /// Task output: logits [B, k] | forecast [B, N, h] | reconstruction [B, N, T].
  Tensor forward(const Tensor& x, Task task);
  /// Trunk state [B*N, D, Z]. `token_mask` (size B*N*Z, nonzero = hidden) replaces
  /// hidden tokens after embedding per the mask-token policy.
  Tensor encode(const Tensor& x, const std::vector<std::uint8_t>* token_mask = nullptr);
  /// Masked-pretraining reconstruction [B, N, T].
  Tensor reconstruct(const Tensor& x, const std::vector<std::uint8_t>* token_mask = nullptr);

  std::vector<Parameter> parameters() const;
  std::vector<Parameter> trunk_parameters() const;
  std::size_t parameter_count() const;
  std::optional<Parameter> find(const std::string& name) const;

  std::size_t layer_count() const;
  AdaptiveSpectralModule* spectral_module(std::size_t layer);
  InformationFusionModule* fusion_module(std::size_t layer);

  /// Sets every layer's thresholds from the 5th/95th log-power percentiles of the data it sees.
  void init_thresholds(const Tensor& x);
  /// Marks thresholds as set (after loading weights) so training does not re-initialize them.
  void mark_thresholds_initialized();

 private:
  struct Impl;
  FusADConfig config_;
  bool training_ = false;
  std::unique_ptr<Impl> impl_;
};

/// True for names that belong to the shared trunk (embedding and layers).
bool is_trunk_parameter(const std::string& name);

// ---------------------------------------------------------------------------
// Anomaly scoring.

/// Per-timestep mean (over variates) squared reconstruction error of the anomaly head: [B, T].
Tensor anomaly_scores(FusADModel& model, const Tensor& x);

/// Score threshold: the given percentile of calibration scores. Empty input -> ConfigError.
double anomaly_threshold(const std::vector<double>& calibration_scores, double percentile_q = 99.0);

std::vector<int> label_scores(const std::vector<double>& scores, double threshold);

// ---------------------------------------------------------------------------
// Checkpoints.

inline constexpr int kCheckpointVersion = 1;

void save_model(const FusADModel& model, const std::filesystem::path& path);
/// Rebuilds the model from the configuration stored in the checkpoint.
FusADModel load_model(const std::filesystem::path& path);
/// Copies trunk parameters from a checkpoint into `model`; heads keep their fresh values.
/// Throws LoadError when a trunk parameter is missing or differs in shape.
void load_trunk(FusADModel& model, const std::filesystem::path& path);

/// FNV-1a over the checkpoint bytes; used to show evaluation leaves files untouched.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace fusad
