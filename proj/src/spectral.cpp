#include "fusad/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fusad/error.hpp"
#include "fusad/fft.hpp"

namespace fusad {

namespace {

constexpr std::uint64_t kCalibrationSeed = 0x5eedcafe;
constexpr std::size_t kCalibrationDraws = 64;

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

std::size_t last_extent(const Tensor& x, const char* what) {
  if (x.rank() < 1) throw ShapeError(std::string(what) + " needs at least one axis");
  return x.size(-1);
}

// Gate on log power; forward is the hard bracket when `hard_forward`, backward is always the soft gate's.
Tensor band_gate(const Tensor& log_power, const Tensor& theta1, const Tensor& theta2, double tau, bool hard_forward) {
  if (theta1.numel() != 1 || theta2.numel() != 1) throw ShapeError("band thresholds must be scalars");
  if (!(tau > 0)) throw ConfigError("gate temperature must be positive");
  const double t1 = theta1.data()[0];
  const double t2 = theta2.data()[0];
  const auto lp = log_power.data();
  std::vector<double> out(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) {
    out[i] = hard_forward ? ((t1 <= lp[i] && lp[i] <= t2) ? 1.0 : 0.0)
                          : logistic((lp[i] - t1) / tau) * logistic((t2 - lp[i]) / tau);
  }
  return detail::make_op(log_power.shape(), std::move(out), {log_power, theta1, theta2},
                         [tau](const detail::OpContext& ctx) {
                           const auto g = ctx.out_grad();
                           const auto lp = ctx.input(0);
                           const double t1 = ctx.input(1)[0];
                           const double t2 = ctx.input(2)[0];
                           double* gl = ctx.input_grad(0);
                           double* g1 = ctx.input_grad(1);
                           double* g2 = ctx.input_grad(2);
                           double acc1 = 0.0;
                           double acc2 = 0.0;
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             const double a = logistic((lp[i] - t1) / tau);
                             const double b = logistic((t2 - lp[i]) / tau);
                             const double da = a * (1.0 - a) * b / tau;
                             const double db = a * b * (1.0 - b) / tau;
                             if (gl) gl[i] += g[i] * (da - db);
                             acc1 -= g[i] * da;
                             acc2 += g[i] * db;
                           }
                           if (g1) g1[0] += acc1;
                           if (g2) g2[0] += acc2;
                         });
}

}  // namespace

std::string to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::soft_train_hard_eval:
      return "soft_train_hard_eval";
    case MaskMode::hard_always:
      return "hard_always";
    case MaskMode::soft_always:
      return "soft_always";
  }
  return "?";
}

MaskMode mask_mode_from_string(const std::string& name) {
  if (name == "soft_train_hard_eval") return MaskMode::soft_train_hard_eval;
  if (name == "hard_always") return MaskMode::hard_always;
  if (name == "soft_always") return MaskMode::soft_always;
  throw ConfigError("unknown mask mode '" + name + "'");
}

std::vector<double> hanning(std::size_t length) {
  if (length < 2) throw InputError("Hanning window needs length >= 2, got " + std::to_string(length));
  std::vector<double> w(length);
  const double denom = static_cast<double>(length - 1);
  for (std::size_t h = 0; h < length; ++h) {
    w[h] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(h) / denom));
  }
  return w;
}

// ---------------------------------------------------------------------------

ComplexTensor rfft(const Tensor& x) {
  const std::size_t n = last_extent(x, "rfft");
  const std::size_t bins = n / 2 + 1;
  const std::size_t rows = x.numel() / n;
  const auto xv = x.data();
  std::vector<double> re(rows * bins);
  std::vector<double> im(rows * bins);
  const FftPlan& plan = fft_plan(n);
  std::vector<cplx> buf(n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t h = 0; h < n; ++h) buf[h] = xv[r * n + h];
    plan.forward(buf);
    for (std::size_t k = 0; k < bins; ++k) {
      re[r * bins + k] = buf[k].real();
      im[r * bins + k] = buf[k].imag();
    }
  }
  Shape shape = x.shape();
  shape.back() = bins;

  // Adjoint of bin k's real part is cos(2 pi k h / n), of its imaginary part -sin(...);
  // both are the real part of an unnormalized inverse FFT of the zero-padded bin gradients.
  auto adjoint = [n, bins, rows](bool imaginary) {
    return [n, bins, rows, imaginary](const detail::OpContext& ctx) {
      double* gx = ctx.input_grad(0);
      if (!gx) return;
      const auto g = ctx.out_grad();
      const FftPlan& plan = fft_plan(n);
      std::vector<cplx> buf(n);
      for (std::size_t r = 0; r < rows; ++r) {
        std::fill(buf.begin(), buf.end(), cplx{});
        for (std::size_t k = 0; k < bins; ++k) {
          const double v = g[r * bins + k];
          buf[k] = imaginary ? cplx{0.0, v} : cplx{v, 0.0};
        }
        plan.backward(buf);
        for (std::size_t h = 0; h < n; ++h) gx[r * n + h] += buf[h].real();
      }
    };
  };
  return {detail::make_op(shape, std::move(re), {x}, adjoint(false)),
          detail::make_op(shape, std::move(im), {x}, adjoint(true))};
}

Tensor irfft(const ComplexTensor& spectrum, std::size_t length) {
  const std::size_t bins = last_extent(spectrum.real, "irfft");
  if (spectrum.imag.shape() != spectrum.real.shape()) throw ShapeError("complex parts differ in shape");
  if (bins != length / 2 + 1) {
    throw ShapeError("irfft to length " + std::to_string(length) + " needs " + std::to_string(length / 2 + 1) +
                     " bins, got " + std::to_string(bins));
  }
  const std::size_t rows = spectrum.real.numel() / bins;
  const auto re = spectrum.real.data();
  const auto im = spectrum.imag.data();
  std::vector<double> out(rows * length);
  std::vector<cplx> half(bins);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < bins; ++k) half[k] = {re[r * bins + k], im[r * bins + k]};
    const auto x = fusad::irfft(half, length);
    std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(r * length));
  }
  Shape shape = spectrum.real.shape();
  shape.back() = length;
  return detail::make_op(
      std::move(shape), std::move(out), {spectrum.real, spectrum.imag},
      [length, bins, rows](const detail::OpContext& ctx) {
        double* gre = ctx.input_grad(0);
        double* gim = ctx.input_grad(1);
        if (!gre && !gim) return;
        const auto g = ctx.out_grad();
        const double inv = 1.0 / static_cast<double>(length);
        for (std::size_t r = 0; r < rows; ++r) {
          const auto G = fusad::rfft(g.subspan(r * length, length));
          for (std::size_t k = 0; k < bins; ++k) {
            const double weight = (k == 0 || 2 * k == length) ? inv : 2.0 * inv;
            if (gre) gre[r * bins + k] += weight * G[k].real();
            if (gim) gim[r * bins + k] += weight * G[k].imag();
          }
        }
      });
}

Tensor power_spectrum(const ComplexTensor& spectrum) { return add(square(spectrum.real), square(spectrum.imag)); }

Tensor soft_band_gate(const Tensor& log_power, const Tensor& theta1, const Tensor& theta2, double temperature) {
  return band_gate(log_power, theta1, theta2, temperature, false);
}

Tensor hard_band_gate(const Tensor& log_power, const Tensor& theta1, const Tensor& theta2) {
  const double t1 = theta1.item();
  const double t2 = theta2.item();
  const auto lp = log_power.data();
  std::vector<double> out(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) out[i] = (t1 <= lp[i] && lp[i] <= t2) ? 1.0 : 0.0;
  return Tensor(log_power.shape(), std::move(out));
}

ComplexTensor adaptive_mask(const ComplexTensor& spectrum, const Tensor& theta1, const Tensor& theta2, MaskMode mode,
                            double temperature, bool training) {
  const Tensor log_power = log(add_scalar(power_spectrum(spectrum), kLogPowerFloor));
  Tensor gate;
  switch (mode) {
    case MaskMode::soft_always:
      gate = soft_band_gate(log_power, theta1, theta2, temperature);
      break;
    case MaskMode::hard_always:
      gate = band_gate(log_power, theta1, theta2, temperature, true);
      break;
    case MaskMode::soft_train_hard_eval:
      gate = training ? soft_band_gate(log_power, theta1, theta2, temperature)
                      : hard_band_gate(log_power, theta1, theta2);
      break;
  }
  return {mul(spectrum.real, gate), mul(spectrum.imag, gate)};
}

// ---------------------------------------------------------------------------

std::vector<double> default_scales(std::size_t length, std::size_t count, double morlet_center) {
  if (count == 0) throw ConfigError("scale grid needs at least one scale");
  if (!(morlet_center > 0)) throw ConfigError("Morlet center frequency must be positive");
  const double to_scale = morlet_center / (2.0 * std::numbers::pi);
  const double p_min = 2.0;
  double p_max = static_cast<double>(length);
  if (p_max <= p_min) p_max = 2.0 * p_min;
  std::vector<double> scales(count);
  if (count == 1) {
    scales[0] = to_scale * std::sqrt(p_min * p_max);
    return scales;
  }
  const double step = std::log(p_max / p_min) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) scales[i] = to_scale * p_min * std::exp(step * static_cast<double>(i));
  return scales;
}

MorletBank::MorletBank(std::vector<double> scales, double morlet_center, std::size_t length)
    : scales_(std::move(scales)), center_(morlet_center), length_(length) {
  if (length_ == 0) throw ConfigError("CWT signal length must be positive");
  if (scales_.empty()) throw ConfigError("scale grid is empty");
  if (!(center_ > 0)) throw ConfigError("Morlet center frequency must be positive");
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    if (!(scales_[s] > 0)) throw ConfigError("scales must be positive");
    if (s > 0 && !(scales_[s] > scales_[s - 1])) throw ConfigError("scales must be strictly increasing");
    if (scales_[s] > 4.0 * static_cast<double>(length_)) {
      throw ConfigError("scale " + std::to_string(scales_[s]) + " exceeds 4x the signal length " +
                        std::to_string(length_) + "; wavelet support would exceed the signal");
    }
  }

  const double norm = std::pow(std::numbers::pi, -0.25);
  taps_re_.resize(scales_.size());
  taps_im_.resize(scales_.size());
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    const double sigma = scales_[s];
    const std::size_t taps =
        std::min<std::size_t>(length_, static_cast<std::size_t>(std::ceil(8.0 * sigma)));
    const std::ptrdiff_t centre = static_cast<std::ptrdiff_t>(taps / 2);
    taps_re_[s].resize(taps);
    taps_im_[s].resize(taps);
    for (std::size_t j = 0; j < taps; ++j) {
      const double u = static_cast<double>(static_cast<std::ptrdiff_t>(j) - centre);
      const double env = norm / std::sqrt(sigma) * std::exp(-u * u / (2.0 * sigma * sigma));
      const double phase = center_ * u / sigma;
      taps_re_[s][j] = env * std::cos(phase);
      taps_im_[s][j] = -env * std::sin(phase);
    }
  }

  recon_weight_.resize(scales_.size());
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    double dlog = 1.0;
    if (scales_.size() > 1) {
      const std::size_t lo = s == 0 ? 0 : s - 1;
      const std::size_t hi = s + 1 == scales_.size() ? s : s + 1;
      dlog = std::log(scales_[hi] / scales_[lo]) / static_cast<double>(hi - lo);
    }
    recon_weight_[s] = dlog / std::sqrt(scales_[s]);
  }
  calibration_ = fit_calibration();
}

Tensor MorletBank::apply_bank(const Tensor& x, const std::vector<std::vector<double>>& taps) const {
  const std::size_t n = last_extent(x, "cwt");
  if (n != length_) {
    throw ShapeError("CWT bank built for length " + std::to_string(length_) + ", got " + std::to_string(n));
  }
  const std::size_t rows = x.numel() / n;
  const std::size_t scales = taps.size();
  const auto xv = x.data();
  std::vector<double> out(rows * scales * n, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = xv.data() + r * n;
    for (std::size_t s = 0; s < scales; ++s) {
      double* dst = out.data() + (r * scales + s) * n;
      const auto& tp = taps[s];
      const std::ptrdiff_t centre = static_cast<std::ptrdiff_t>(tp.size() / 2);
      for (std::size_t j = 0; j < tp.size(); ++j) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - centre;
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -off);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), static_cast<std::ptrdiff_t>(n) - off);
        const double w = tp[j];
        for (std::ptrdiff_t t = t0; t < t1; ++t) dst[t] += w * src[t + off];
      }
    }
  }
  Shape shape = x.shape();
  shape.back() = scales;
  shape.push_back(n);
  return detail::make_op(std::move(shape), std::move(out), {x}, [taps, rows, n](const detail::OpContext& ctx) {
    double* gx = ctx.input_grad(0);
    if (!gx) return;
    const auto g = ctx.out_grad();
    const std::size_t scales = taps.size();
    for (std::size_t r = 0; r < rows; ++r) {
      double* dst = gx + r * n;
      for (std::size_t s = 0; s < scales; ++s) {
        const double* gr = g.data() + (r * scales + s) * n;
        const auto& tp = taps[s];
        const std::ptrdiff_t centre = static_cast<std::ptrdiff_t>(tp.size() / 2);
        for (std::size_t j = 0; j < tp.size(); ++j) {
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - centre;
          const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -off);
          const std::ptrdiff_t t1 =
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), static_cast<std::ptrdiff_t>(n) - off);
          const double w = tp[j];
          for (std::ptrdiff_t t = t0; t < t1; ++t) dst[t + off] += w * gr[t];
        }
      }
    }
  });
}

Scalogram MorletBank::cwt(const Tensor& x) const {
  return {{apply_bank(x, taps_re_), apply_bank(x, taps_im_)}, scales_};
}

Tensor MorletBank::cwt_real(const Tensor& x) const { return apply_bank(x, taps_re_); }

Tensor MorletBank::icwt(const Scalogram& w) const {
  if (w.scales != scales_) throw ContractError("icwt scale grid does not match the grid used by cwt");
  return icwt_real(w.coefficients.real);
}

Tensor MorletBank::icwt_real(const Tensor& w_real) const {
  if (w_real.rank() < 2 || w_real.size(-1) != length_ || w_real.size(-2) != scales_.size()) {
    throw ContractError("icwt expects [..., " + std::to_string(scales_.size()) + ", " + std::to_string(length_) +
                        "], got " + shape_str(w_real.shape()));
  }
  const std::size_t n = length_;
  const std::size_t scales = scales_.size();
  const std::size_t rows = w_real.numel() / (n * scales);
  std::vector<double> weight(recon_weight_);
  for (double& v : weight) v *= calibration_;
  const auto wv = w_real.data();
  std::vector<double> out(rows * n, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t s = 0; s < scales; ++s) {
      const double* src = wv.data() + (r * scales + s) * n;
      for (std::size_t t = 0; t < n; ++t) out[r * n + t] += weight[s] * src[t];
    }
  }
  Shape shape(w_real.shape().begin(), w_real.shape().end() - 1);
  shape.back() = n;
  return detail::make_op(std::move(shape), std::move(out), {w_real},
                         [weight, rows, scales, n](const detail::OpContext& ctx) {
                           double* gw = ctx.input_grad(0);
                           if (!gw) return;
                           const auto g = ctx.out_grad();
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t s = 0; s < scales; ++s) {
                               double* dst = gw + (r * scales + s) * n;
                               for (std::size_t t = 0; t < n; ++t) dst[t] += weight[s] * g[r * n + t];
                             }
                           }
                         });
}

double MorletBank::fit_calibration() const {
  NoGradGuard no_grad;
  Rng rng(kCalibrationSeed);
  std::vector<double> noise(kCalibrationDraws * length_);
  for (double& v : noise) v = rng.normal();
  const Tensor x({kCalibrationDraws, length_}, noise);
  const Tensor wr = apply_bank(x, taps_re_);
  // uncalibrated reconstruction
  const auto wv = wr.data();
  double xy = 0.0;
  double yy = 0.0;
  const std::size_t scales = scales_.size();
  for (std::size_t r = 0; r < kCalibrationDraws; ++r) {
    for (std::size_t t = 0; t < length_; ++t) {
      double y = 0.0;
      for (std::size_t s = 0; s < scales; ++s) y += recon_weight_[s] * wv[(r * scales + s) * length_ + t];
      xy += y * noise[r * length_ + t];
      yy += y * y;
    }
  }
  if (!(yy > 0)) throw ConfigError("degenerate scale grid: reconstruction is identically zero");
  return xy / yy;
}

// ---------------------------------------------------------------------------

AdaptiveSpectralModule::AdaptiveSpectralModule(const SpectralConfig& config, std::size_t embed_dim, std::size_t tokens,
                                               AsmBranches branches, Rng& rng, const std::string& prefix)
    : config_(config),
      embed_dim_(embed_dim),
      tokens_(tokens),
      branches_(branches),
      prefix_(prefix),
      window_(config.use_hanning && tokens >= 2 ? hanning(tokens) : std::vector<double>(tokens, 1.0)),
      bank_(config.scales.empty() ? default_scales(tokens, config.num_scales, config.morlet_center) : config.scales,
            config.morlet_center, tokens) {
  if (!branches_.fourier && !branches_.wavelet) throw ConfigError("ASM needs at least one branch");
  if (!branches_.fourier) branches_.threshold = false;
  if (!(config_.gate_temperature > 0)) throw ConfigError("gate temperature must be positive");
  if (branches_.threshold) {
    // all-pass until initialized from data
    theta1_ = Tensor::scalar(-30.0, true);
    theta_gap_ = Tensor::scalar(softplus_inverse(60.0), true);
  }
  const std::size_t width = (branches_.fourier ? 1 : 0) + (branches_.wavelet ? 1 : 0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(width * embed_dim_));
  std::vector<double> w(embed_dim_ * width * embed_dim_);
  for (double& v : w) v = rng.uniform(-bound, bound);
  std::vector<double> b(embed_dim_);
  for (double& v : b) v = rng.uniform(-bound, bound);
  proj_weight_ = Tensor({embed_dim_, width * embed_dim_, 1}, std::move(w), true);
  proj_bias_ = Tensor({embed_dim_}, std::move(b), true);
}

Tensor AdaptiveSpectralModule::theta1() const { return theta1_; }

Tensor AdaptiveSpectralModule::theta2() const { return add(theta1_, softplus(theta_gap_)); }

void AdaptiveSpectralModule::set_thresholds(double lo, double hi) {
  if (!branches_.threshold) throw ContractError("ASM has no thresholds (threshold ablation active)");
  if (!(hi > lo)) throw ContractError("theta2 must exceed theta1");
  theta1_.mutable_data()[0] = lo;
  theta_gap_.mutable_data()[0] = softplus_inverse(hi - lo);
  thresholds_initialized_ = true;
}

void AdaptiveSpectralModule::init_thresholds_from(const Tensor& x) {
  if (!branches_.threshold) return;
  NoGradGuard no_grad;
  const Tensor windowed = mul(x, Tensor({tokens_}, window_));
  const Tensor power = power_spectrum(rfft(windowed));
  std::vector<double> log_power(power.numel());
  const auto pv = power.data();
  for (std::size_t i = 0; i < pv.size(); ++i) log_power[i] = std::log(pv[i] + kLogPowerFloor);
  const double lo = percentile(log_power, 5.0);
  double hi = percentile(log_power, 95.0);
  if (hi - lo < 1e-6) hi = lo + 1e-6;
  set_thresholds(lo, hi);
}

Tensor AdaptiveSpectralModule::fourier_branch(const Tensor& x, bool training) const {
  const Tensor windowed = config_.use_hanning ? mul(x, Tensor({tokens_}, window_)) : x;
  ComplexTensor spectrum = rfft(windowed);
  if (branches_.threshold) {
    spectrum = adaptive_mask(spectrum, theta1_, theta2(), config_.mode, config_.gate_temperature, training);
  }
  return irfft(spectrum, tokens_);
}

Tensor AdaptiveSpectralModule::wavelet_branch(const Tensor& x) const { return bank_.icwt_real(bank_.cwt_real(x)); }

Tensor AdaptiveSpectralModule::forward(const Tensor& x, bool training) {
  if (x.rank() != 3 || x.size(1) != embed_dim_ || x.size(2) != tokens_) {
    throw ShapeError("ASM expects [M, " + std::to_string(embed_dim_) + ", " + std::to_string(tokens_) + "], got " +
                     shape_str(x.shape()));
  }
  if (training && branches_.threshold && !thresholds_initialized_) init_thresholds_from(x);
  std::vector<Tensor> parts;
  if (branches_.fourier) parts.push_back(fourier_branch(x, training));
  if (branches_.wavelet) parts.push_back(wavelet_branch(x));
  const Tensor merged = parts.size() == 1 ? parts.front() : concat(parts, 1);
  return add(conv1d(merged, proj_weight_, proj_bias_), x);
}

std::vector<Parameter> AdaptiveSpectralModule::parameters() const {
  std::vector<Parameter> out;
  if (branches_.threshold) {
    out.push_back({prefix_ + ".theta1", theta1_});
    out.push_back({prefix_ + ".theta_gap", theta_gap_});
  }
  out.push_back({prefix_ + ".proj.weight", proj_weight_});
  out.push_back({prefix_ + ".proj.bias", proj_bias_});
  return out;
}

// ---------------------------------------------------------------------------

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

DenoiseResult denoise_signal(std::span<const double> x, double theta1, double theta2, bool use_hanning) {
  if (x.empty()) throw InputError("cannot denoise an empty signal");
  std::vector<double> input(x.begin(), x.end());
  if (use_hanning && input.size() >= 2) {
    const auto w = hanning(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) input[i] *= w[i];
  }
  auto bins = fusad::rfft(input);
  DenoiseResult result;
  result.power.resize(bins.size());
  result.kept.resize(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double p = std::norm(bins[k]);
    const double lp = std::log(p + kLogPowerFloor);
    result.power[k] = p;
    result.kept[k] = theta1 <= lp && lp <= theta2;
    if (!result.kept[k]) bins[k] = {};
  }
  result.signal = fusad::irfft(bins, input.size());
  return result;
}

std::pair<double, double> fit_band_thresholds(std::span<const double> x, bool use_hanning) {
  if (x.empty()) throw InputError("cannot fit thresholds on an empty signal");
  std::vector<double> input(x.begin(), x.end());
  if (use_hanning && input.size() >= 2) {
    const auto w = hanning(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) input[i] *= w[i];
  }
  const auto bins = fusad::rfft(input);
  std::vector<double> log_power(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) log_power[k] = std::log(std::norm(bins[k]) + kLogPowerFloor);
  const double floor = percentile(log_power, 50.0);
  const double top = *std::max_element(log_power.begin(), log_power.end());
  return {floor + std::log(20.0), top + 1.0};
}

}  // namespace fusad
