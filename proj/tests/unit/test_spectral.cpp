#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fusad/error.hpp"
#include "fusad/fft.hpp"
#include "fusad/spectral.hpp"
#include "oracles.hpp"

using namespace fusad;
using doctest::Approx;
constexpr double kPi = std::numbers::pi;

namespace {

oracle::Vec tone(std::size_t n, double cycles_per_sample, double phase = 0.0, double amp = 1.0) {
  oracle::Vec x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = amp * std::sin(2 * kPi * cycles_per_sample * t + phase);
  return x;
}

oracle::Vec values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("hanning closed form") {
  const auto w4 = hanning(4);
  CHECK(w4[0] == Approx(0.0));
  CHECK(w4[1] == Approx(0.75).epsilon(1e-15));
  CHECK(w4[2] == Approx(0.75).epsilon(1e-15));
  CHECK(std::abs(w4[3]) < 1e-15);
  const auto w9 = hanning(9);
  CHECK(w9[4] == 1.0);
  CHECK(std::abs(w9[8]) < 1e-15);
  CHECK_THROWS_AS(hanning(1), InputError);
}

TEST_CASE("rfft closed-form spectra") {
  const auto imp = fusad::rfft(std::vector<double>{1, 0, 0, 0});
  REQUIRE(imp.size() == 3);
  for (auto c : imp) CHECK(std::abs(c - cplx(1, 0)) < 1e-15);

  std::vector<double> x(8);
  for (std::size_t h = 0; h < 8; ++h) x[h] = std::cos(2 * kPi * 2 * h / 8);
  const auto bins = fusad::rfft(x);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    if (k == 2)
      CHECK(std::abs(bins[k]) == Approx(4.0).epsilon(1e-12));
    else
      CHECK(std::abs(bins[k]) < 1e-9);
  }
}

TEST_CASE("FFT matches the direct DFT for many lengths") {
  Rng rng(2);
  for (std::size_t n = 1; n <= 70; ++n) {
    oracle::Vec x(n);
    for (double& v : x) v = rng.normal();
    const auto ref = oracle::dft(x);
    std::vector<cplx> full(x.begin(), x.end());
    fft_plan(n).forward(full);
    double err = 0, scale = 0;
    for (std::size_t k = 0; k < n; ++k) {
      err = std::max(err, std::abs(full[k] - ref[k]));
      scale = std::max(scale, std::abs(ref[k]));
    }
    CHECK_MESSAGE(err < 1e-9 * std::max(1.0, scale), "n = " << n);
    const auto half = fusad::rfft(x);
    REQUIRE(half.size() == n / 2 + 1);
    for (std::size_t k = 0; k < half.size(); ++k) CHECK(std::abs(half[k] - ref[k]) < 1e-9 * std::max(1.0, scale));
    const auto back = fusad::irfft(half, n);
    for (std::size_t h = 0; h < n; ++h) CHECK(std::abs(back[h] - x[h]) < 1e-9);
  }
}

TEST_CASE("tensor rfft/irfft round trip and gradients") {
  Rng rng(4);
  Tensor x = oracle::random_tensor({2, 3, 12}, rng, 1.0, true);
  const Tensor back = irfft(fusad::rfft(x), 12);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(back.data()[i] - x.data()[i]) < 1e-12);
  const Tensor probe = oracle::random_tensor({2, 3, 7}, rng);
  CHECK(oracle::gradient_error({x}, [&] { return sum(mul(power_spectrum(fusad::rfft(x)), probe)); }) < 1e-6);
  Tensor odd = oracle::random_tensor({9}, rng, 1.0, true);
  const Tensor probe9 = oracle::random_tensor({9}, rng);
  CHECK(oracle::gradient_error({odd}, [&] {
          auto s = fusad::rfft(odd);
          s.real = mul(s.real, Tensor({5}, {1, 0.5, 2, 1, 0.1}));
          return sum(mul(irfft(s, 9), probe9));
        }) < 1e-6);
}

TEST_CASE("adaptive mask extremes") {
  const auto x = tone(32, 3.0 / 32);
  const ComplexTensor spec = fusad::rfft(Tensor({32}, x));
  SUBCASE("all-pass") {
    const auto out = adaptive_mask(spec, Tensor::scalar(-1e6), Tensor::scalar(1e6), MaskMode::hard_always, 0.1, false);
    for (std::size_t i = 0; i < spec.real.numel(); ++i) {
      CHECK(out.real.data()[i] == spec.real.data()[i]);
      CHECK(out.imag.data()[i] == spec.imag.data()[i]);
    }
  }
  SUBCASE("all-stop") {
    const auto out = adaptive_mask(spec, Tensor::scalar(1e6), Tensor::scalar(2e6), MaskMode::hard_always, 0.1, false);
    for (double v : out.real.data()) CHECK(v == 0.0);
    for (double v : out.imag.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("band mask keeps only the bracketed tone") {
  const std::size_t n = 128;
  const auto lo = tone(n, 5.0 / n, 0.3, 0.4), hi = tone(n, 17.0 / n, 1.1, 2.0);
  oracle::Vec x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = lo[t] + hi[t];
  const double p_lo = std::log(std::norm(oracle::dft(lo)[5])), p_hi = std::log(std::norm(oracle::dft(hi)[17]));
  REQUIRE(p_lo < p_hi);
  const double mid = 0.5 * (p_lo + p_hi);
  const Tensor out = irfft(adaptive_mask(fusad::rfft(Tensor({n}, x)), Tensor::scalar(mid), Tensor::scalar(p_hi + 1),
                                         MaskMode::soft_train_hard_eval, 0.1, false),
                           n);
  CHECK(oracle::correlation(values(out), hi) > 0.99);
}

TEST_CASE("widening the band never drops a kept bin") {
  Rng rng(8);
  const Tensor lp = oracle::random_tensor({40}, rng, 5.0);
  const Tensor narrow = hard_band_gate(lp, Tensor::scalar(-1.0), Tensor::scalar(2.0));
  const Tensor wide = hard_band_gate(lp, Tensor::scalar(-2.0), Tensor::scalar(3.0));
  for (std::size_t i = 0; i < 40; ++i) CHECK(wide.data()[i] >= narrow.data()[i]);
}

TEST_CASE("soft gate approaches the hard mask as temperature falls") {
  const Tensor lp({5}, {-3.0, -0.9, 0.0, 0.9, 3.0});
  const Tensor t1 = Tensor::scalar(-1.0), t2 = Tensor::scalar(1.0);
  const Tensor hard = hard_band_gate(lp, t1, t2);
  double prev = 1e9;
  for (double tau : {0.5, 0.1, 0.02, 0.004}) {
    const Tensor soft = soft_band_gate(lp, t1, t2, tau);
    double err = 0;
    for (std::size_t i = 0; i < 5; ++i) err = std::max(err, std::abs(soft.data()[i] - hard.data()[i]));
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-9);
}

TEST_CASE("adaptive soft gate gradients") {
  Rng rng(12);
  Tensor x = oracle::random_tensor({3, 16}, rng, 1.0, true);
  Tensor t1 = Tensor::scalar(-0.5, true), t2 = Tensor::scalar(1.5, true);
  const Tensor probe = oracle::random_tensor({3, 16}, rng);
  for (MaskMode mode : {MaskMode::soft_always, MaskMode::soft_train_hard_eval}) {
    const double err = oracle::gradient_error({x, t1, t2}, [&] {
      return sum(mul(irfft(adaptive_mask(fusad::rfft(x), t1, t2, mode, 0.5, true), 16), probe));
    });
    CHECK(err < 1e-4);
  }
  // straight-through mode: theta receives the soft gate's gradient
  t1.zero_grad();
  sum(mul(irfft(adaptive_mask(fusad::rfft(x), t1, t2, MaskMode::hard_always, 0.5, true), 16), probe)).backward();
  CHECK(t1.has_grad());
}

TEST_CASE("denoising improves SNR by at least 10 dB") {
  const std::size_t n = 1024;
  const auto clean = tone(n, 37.0 / n, 0.4, std::numbers::sqrt2);  // unit power
  Rng rng(21);
  oracle::Vec noisy(n);
  for (std::size_t t = 0; t < n; ++t) noisy[t] = clean[t] + rng.normal();
  const double in_snr = oracle::snr_db(clean, noisy);
  CHECK(std::abs(in_snr) < 0.5);
  const auto [t1, t2] = fit_band_thresholds(noisy);
  const auto r = denoise_signal(noisy, t1, t2);
  CHECK(r.kept[37]);
  CHECK(oracle::snr_db(clean, r.signal) >= in_snr + 10.0);
  const auto pass = denoise_signal(noisy, -1e9, 1e9);
  for (std::size_t t = 0; t < n; ++t) CHECK(std::abs(pass.signal[t] - noisy[t]) < 1e-9);
  for (std::size_t k = 0; k < r.power.size(); ++k) CHECK(r.power[k] >= 0.0);
}

TEST_CASE("default scale grid") {
  const auto s = default_scales(64, 16, 6.0);
  REQUIRE(s.size() == 16);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
  // Morlet peak period 2 pi s / w0 spans 2 .. length samples
  CHECK(2 * kPi * s.front() / 6.0 == Approx(2.0).epsilon(1e-12));
  CHECK(2 * kPi * s.back() / 6.0 == Approx(64.0).epsilon(1e-12));
}

TEST_CASE("CWT linearity and zero input") {
  const std::size_t n = 48;
  const MorletBank bank(default_scales(n), 6.0, n);
  const Scalogram zero = bank.cwt(Tensor::zeros({n}));
  for (double v : zero.coefficients.real.data()) CHECK(v == 0.0);
  for (double v : zero.coefficients.imag.data()) CHECK(v == 0.0);
  const Tensor back = bank.icwt(zero);
  for (double v : back.data()) CHECK(v == 0.0);

  Rng rng(6);
  const Tensor x = oracle::random_tensor({n}, rng), y = oracle::random_tensor({n}, rng);
  const double a = 1.7, b = -0.4;
  const Scalogram wx = bank.cwt(x), wy = bank.cwt(y), wxy = bank.cwt(add(scale(x, a), scale(y, b)));
  for (std::size_t i = 0; i < wxy.coefficients.real.numel(); ++i) {
    CHECK(std::abs(wxy.coefficients.real.data()[i] - (a * wx.coefficients.real.data()[i] + b * wy.coefficients.real.data()[i])) < 1e-10);
    CHECK(std::abs(wxy.coefficients.imag.data()[i] - (a * wx.coefficients.imag.data()[i] + b * wy.coefficients.imag.data()[i])) < 1e-10);
  }
  Scalogram doubled = wx;
  doubled.coefficients.real = scale(wx.coefficients.real, 2.0);
  doubled.coefficients.imag = scale(wx.coefficients.imag, 2.0);
  const Tensor r1 = bank.icwt(wx), r2 = bank.icwt(doubled);
  for (std::size_t i = 0; i < n; ++i) CHECK(r2.data()[i] == Approx(2.0 * r1.data()[i]).epsilon(1e-12));
}

TEST_CASE("CWT direct definition on a short signal") {
  const std::size_t n = 20;
  const std::vector<double> scales = {0.8, 1.5, 3.0};
  const MorletBank bank(scales, 6.0, n);
  Rng rng(10);
  const Tensor x = oracle::random_tensor({n}, rng);
  const Scalogram w = bank.cwt(x);
  REQUIRE(w.coefficients.real.shape() == Shape{3, n});
  for (std::size_t si = 0; si < scales.size(); ++si) {
    const double s = scales[si];
    const std::size_t taps = std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(8 * s)));
    for (std::size_t t = 0; t < n; ++t) {
      cplx acc = 0;
      for (std::size_t j = 0; j < taps; ++j) {
        const double u = static_cast<double>(j) - static_cast<double>(taps / 2);
        const long src = static_cast<long>(t) + static_cast<long>(j) - static_cast<long>(taps / 2);
        if (src < 0 || src >= static_cast<long>(n)) continue;
        const double env = std::pow(s, -0.5) * std::pow(kPi, -0.25) * std::exp(-u * u / (2 * s * s));
        acc += x.data()[src] * env * std::exp(cplx(0, -6.0 * u / s));
      }
      CHECK(w.coefficients.real.at({si, t}) == Approx(acc.real()).epsilon(1e-10));
      CHECK(w.coefficients.imag.at({si, t}) == Approx(acc.imag()).epsilon(1e-10));
    }
  }
}

TEST_CASE("icwt rejects a foreign scale grid") {
  const MorletBank a(default_scales(32, 8), 6.0, 32), b(default_scales(32, 10), 6.0, 32);
  CHECK_THROWS_AS(a.icwt(b.cwt(Tensor::zeros({32}))), ContractError);
}

TEST_CASE("ASM shape law and gradients") {
  Rng rng(13);
  for (auto [m, d, z] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 2, 4}, {3, 4, 7}, {2, 5, 12}}) {
    AdaptiveSpectralModule asm_block(SpectralConfig{}, d, z, {}, rng, "asm");
    const Tensor x = oracle::random_tensor({m, d, z}, rng);
    CHECK(asm_block.forward(x, true).shape() == x.shape());
    CHECK(asm_block.forward(x, false).shape() == x.shape());
  }
  SpectralConfig cfg;
  cfg.gate_temperature = 1.0;
  AdaptiveSpectralModule asm_block(cfg, 3, 8, {}, rng, "asm");
  Tensor x = oracle::random_tensor({2, 3, 8}, rng, 1.0, true);
  asm_block.forward(x, true);
  REQUIRE(asm_block.thresholds_initialized());
  const Tensor probe = oracle::random_tensor({2, 3, 8}, rng);
  std::vector<Tensor> leaves{x};
  for (const auto& p : asm_block.parameters()) leaves.push_back(p.value);
  CHECK(oracle::gradient_error(leaves, [&] { return sum(mul(asm_block.forward(x, true), probe)); }) < 1e-4);
}

TEST_CASE("ASM thresholds initialize to log-power percentiles") {
  Rng rng(14);
  AdaptiveSpectralModule asm_block(SpectralConfig{}, 4, 16, {}, rng, "asm");
  const Tensor x = oracle::random_tensor({3, 4, 16}, rng);
  asm_block.init_thresholds_from(x);
  const auto w = hanning(16);
  std::vector<double> logp;
  for (std::size_t r = 0; r < 12; ++r) {
    oracle::Vec row(16);
    for (std::size_t t = 0; t < 16; ++t) row[t] = x.data()[r * 16 + t] * w[t];
    const auto f = oracle::dft(row);
    for (std::size_t k = 0; k <= 8; ++k) logp.push_back(std::log(std::norm(f[k]) + kLogPowerFloor));
  }
  CHECK(asm_block.theta1().item() == Approx(percentile(logp, 5)).epsilon(1e-9));
  CHECK(asm_block.theta2().item() == Approx(percentile(logp, 95)).epsilon(1e-9));
}

TEST_CASE("ASM with all-pass thresholds and averaging projection is near identity") {
  const std::size_t d = 3, z = 32;
  Rng rng(15);
  AdaptiveSpectralModule asm_block(SpectralConfig{}, d, z, {}, rng, "asm");
  asm_block.set_thresholds(-1e3, 1e3);
  auto w = asm_block.proj_weight().mutable_data();  // [D, 2D, 1]
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t o = 0; o < d; ++o) {
    w[o * 2 * d + o] = 0.5;
    w[o * 2 * d + d + o] = 0.5;
  }
  auto b = asm_block.proj_bias().mutable_data();
  std::fill(b.begin(), b.end(), 0.0);
  std::vector<double> xs;
  for (std::size_t c = 0; c < d; ++c) {
    const auto t = tone(z, (2.0 + 2.0 * c) / z, 0.7 * c);
    xs.insert(xs.end(), t.begin(), t.end());
  }
  const Tensor x({1, d, z}, xs);
  const Tensor y = asm_block.forward(x, false);
  oracle::Vec doubled(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) doubled[i] = 2 * xs[i];
  CHECK(oracle::correlation(values(y), doubled) > 0.9);
}

TEST_CASE("branch ablations") {
  Rng rng(16);
  AdaptiveSpectralModule fourier_only(SpectralConfig{}, 2, 8, {.fourier = true, .wavelet = false}, rng, "a");
  CHECK(fourier_only.proj_weight().shape() == Shape{2, 2, 1});
  AdaptiveSpectralModule no_threshold(SpectralConfig{}, 2, 8, {.threshold = false}, rng, "b");
  CHECK(no_threshold.parameters().size() == 2);
  CHECK_THROWS_AS(no_threshold.set_thresholds(0, 1), ContractError);
  CHECK_THROWS_AS(AdaptiveSpectralModule(SpectralConfig{}, 2, 8, {.fourier = false, .wavelet = false}, rng, "c"),
                  ConfigError);
}
