#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusad/random.hpp"
#include "fusad/tensor.hpp"

namespace fusad {

/// Floor added to the power spectrum before taking logs.
inline constexpr double kLogPowerFloor = 1e-12;

enum class MaskMode { soft_train_hard_eval, hard_always, soft_always };

std::string to_string(MaskMode mode);
MaskMode mask_mode_from_string(const std::string& name);

struct SpectralConfig {
  bool use_hanning = true;
  double gate_temperature = 0.1;
  /// Empty means "default grid for the token length" (see default_scales).
  std::vector<double> scales;
  std::size_t num_scales = 16;
  double morlet_center = 6.0;
  MaskMode mode = MaskMode::soft_train_hard_eval;
};

/// w[h] = 0.5 (1 - cos(2 pi h / (H - 1))). Throws InputError for H < 2.
std::vector<double> hanning(std::size_t length);

// ---------------------------------------------------------------------------
// Differentiable transforms over the last axis.

/// [..., H] -> complex [..., H/2 + 1].
ComplexTensor rfft(const Tensor& x);
/// complex [..., H/2 + 1] -> [..., H]; exact inverse of rfft.
Tensor irfft(const ComplexTensor& spectrum, std::size_t length);
/// Re^2 + Im^2.
Tensor power_spectrum(const ComplexTensor& spectrum);

/// sigmoid((logP - theta1)/tau) * sigmoid((theta2 - logP)/tau), thresholds are scalar tensors.
Tensor soft_band_gate(const Tensor& log_power, const Tensor& theta1, const Tensor& theta2, double temperature);
/// 1 where theta1 <= logP <= theta2, else 0. Carries no gradient.
Tensor hard_band_gate(const Tensor& log_power, const Tensor& theta1, const Tensor& theta2);

/**
 * Keeps the frequency bins whose log power lies in [theta1, theta2].
 *
 * Hard gating is the exact Boolean bracket. Soft gating multiplies by the
 * sigmoid band gate so theta1/theta2 receive gradients. hard_always runs the
 * hard mask forward with the soft gate's gradient (straight-through), and
 * soft_train_hard_eval switches on `training`.
 */
ComplexTensor adaptive_mask(const ComplexTensor& spectrum, const Tensor& theta1, const Tensor& theta2, MaskMode mode,
                            double temperature, bool training);

// ---------------------------------------------------------------------------
// Morlet continuous wavelet transform.

/// `count` log-spaced scales whose Morlet peak periods span 2 samples to `length` samples.
std::vector<double> default_scales(std::size_t length, std::size_t count = 16, double morlet_center = 6.0);

/// Complex coefficients [..., S, Z] plus the scale grid that produced them.
struct Scalogram {
  ComplexTensor coefficients;
  std::vector<double> scales;
};

/**
 * Morlet filter bank for one (scale grid, signal length) pair.
 *
 * Scale s is sampled as psi_s(u) = s^-1/2 pi^-1/4 exp(-u^2 / (2 s^2)) exp(-i w0 u / s)
 * on min(Z, ceil(8 s)) taps centered like conv1d, and W[s, t] = sum_u x[t + u] psi_s(u)
 * with zero fill outside the signal. The inverse sums Re(W) / sqrt(s) * dlog(s) over
 * scales, scaled by a constant fitted by least squares on 64 white-noise draws.
 */
class MorletBank {
 public:
  MorletBank(std::vector<double> scales, double morlet_center, std::size_t length);

  const std::vector<double>& scales() const { return scales_; }
  double morlet_center() const { return center_; }
  std::size_t length() const { return length_; }
  std::size_t support(std::size_t scale_index) const { return taps_re_[scale_index].size(); }
  double calibration() const { return calibration_; }

  /// [..., Z] -> [..., S, Z].
  Scalogram cwt(const Tensor& x) const;
  /// Real part only; the inverse never reads the imaginary part.
  Tensor cwt_real(const Tensor& x) const;
  /// [..., S, Z] -> [..., Z]. Throws ContractError when the grid differs from this bank's.
  Tensor icwt(const Scalogram& w) const;
  Tensor icwt_real(const Tensor& w_real) const;

 private:
  Tensor apply_bank(const Tensor& x, const std::vector<std::vector<double>>& taps) const;
  double fit_calibration() const;

  std::vector<double> scales_;
  double center_;
  std::size_t length_;
  std::vector<std::vector<double>> taps_re_;
  std::vector<std::vector<double>> taps_im_;
  std::vector<double> recon_weight_;  // dlog(s) / sqrt(s), before calibration
  double calibration_ = 1.0;
};

// ---------------------------------------------------------------------------
// Adaptive spectral module.

struct AsmBranches {
  bool fourier = true;
  bool wavelet = true;
  bool threshold = true;
};

/**
 * One ASM block over a [M, D, Z] state (M = series, D = embedding, Z = tokens).
 * Both branches act along the token axis, independently per (series, embedding)
 * channel. The branch outputs are concatenated on the embedding axis, mapped back
 * to D with a pointwise projection, and added to the block input.
 *
 * Parameters: `<prefix>.theta1`, `<prefix>.theta_gap` (theta2 = theta1 + softplus(gap)),
 * `<prefix>.proj.weight` [D, branches*D, 1], `<prefix>.proj.bias` [D].
 */
class AdaptiveSpectralModule {
 public:
  AdaptiveSpectralModule(const SpectralConfig& config, std::size_t embed_dim, std::size_t tokens,
                         AsmBranches branches, Rng& rng, const std::string& prefix);

  Tensor forward(const Tensor& x, bool training);
  /// Fourier branch alone (windowed FFT -> mask -> inverse); [M, D, Z] -> [M, D, Z].
  Tensor fourier_branch(const Tensor& x, bool training) const;
  Tensor wavelet_branch(const Tensor& x) const;

  std::vector<Parameter> parameters() const;
  const AsmBranches& branches() const { return branches_; }
  std::size_t embed_dim() const { return embed_dim_; }
  const MorletBank& bank() const { return bank_; }

  Tensor theta1() const;
  Tensor theta2() const;
  /// Sets theta1/theta2 directly (theta2 > theta1 required).
  void set_thresholds(double lo, double hi);
  /// Sets the thresholds to the 5th/95th percentiles of log power of `x` under the Fourier branch.
  void init_thresholds_from(const Tensor& x);
  bool thresholds_initialized() const { return thresholds_initialized_; }
  void mark_thresholds_initialized() { thresholds_initialized_ = true; }

  Tensor& proj_weight() { return proj_weight_; }
  Tensor& proj_bias() { return proj_bias_; }

 private:
  SpectralConfig config_;
  std::size_t embed_dim_;
  std::size_t tokens_;
  AsmBranches branches_;
  std::string prefix_;
  std::vector<double> window_;
  MorletBank bank_;
  Tensor theta1_;
  Tensor theta_gap_;
  Tensor proj_weight_;
  Tensor proj_bias_;
  bool thresholds_initialized_ = false;
};

// ---------------------------------------------------------------------------
// Raw-signal denoising used by the `denoise` command.

struct DenoiseResult {
  std::vector<double> signal;
  std::vector<double> power;     // per rfft bin
  std::vector<bool> kept;        // per rfft bin
};

/// FFT, hard band mask on log power, inverse FFT. No window unless `use_hanning`.
DenoiseResult denoise_signal(std::span<const double> x, double theta1, double theta2, bool use_hanning = false);

/// Thresholds for a single dominant band: theta1 = log(median power) + log(20), theta2 = max log power + 1.
std::pair<double, double> fit_band_thresholds(std::span<const double> x, bool use_hanning = false);

/// Linear-interpolated percentile (q in [0, 100]) of `values`.
double percentile(std::vector<double> values, double q);

}  // namespace fusad
