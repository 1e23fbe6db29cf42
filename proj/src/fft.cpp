#include "fusad/fft.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "fusad/error.hpp"

namespace fusad {

namespace {

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw InputError("FFT length must be positive");
  m_ = is_pow2(n) ? n : next_pow2(2 * n - 1);

  twiddle_.resize(m_ / 2);
  for (std::size_t k = 0; k < m_ / 2; ++k) {
    twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(m_));
  }
  bitrev_.resize(m_);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < m_) ++bits;
  for (std::size_t i = 0; i < m_; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
    bitrev_[i] = r;
  }

  if (m_ != n_) {
    chirp_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      // k^2 mod 2n keeps the phase argument small
      const std::size_t q = (k * k) % (2 * n_);
      chirp_[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(q) / static_cast<double>(n_));
    }
    chirp_fft_.assign(m_, cplx{});
    chirp_fft_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n_; ++k) {
      chirp_fft_[k] = std::conj(chirp_[k]);
      chirp_fft_[m_ - k] = std::conj(chirp_[k]);
    }
    radix2(chirp_fft_);
  }
}

void FftPlan::radix2(std::span<cplx> a) const {
  for (std::size_t i = 0; i < m_; ++i) {
    if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= m_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = m_ / len;
    for (std::size_t i = 0; i < m_; i += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const cplx u = a[i + j];
        const cplx v = a[i + j + half] * twiddle_[j * step];
        a[i + j] = u + v;
        a[i + j + half] = u - v;
      }
    }
  }
}

void FftPlan::bluestein(std::span<cplx> data) const {
  std::vector<cplx> buf(m_, cplx{});
  for (std::size_t k = 0; k < n_; ++k) buf[k] = data[k] * chirp_[k];
  radix2(buf);
  for (std::size_t k = 0; k < m_; ++k) buf[k] *= chirp_fft_[k];
  // inverse radix-2 through conjugation
  for (auto& v : buf) v = std::conj(v);
  radix2(buf);
  const double inv_m = 1.0 / static_cast<double>(m_);
  for (std::size_t k = 0; k < n_; ++k) data[k] = std::conj(buf[k]) * inv_m * chirp_[k];
}

void FftPlan::forward(std::span<cplx> data) const {
  if (data.size() != n_) throw ContractError("FFT plan/data length mismatch");
  if (m_ == n_) {
    radix2(data);
  } else {
    bluestein(data);
  }
}

void FftPlan::backward(std::span<cplx> data) const {
  for (auto& v : data) v = std::conj(v);
  forward(data);
  for (auto& v : data) v = std::conj(v);
}

const FftPlan& fft_plan(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

std::vector<cplx> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<cplx> buf(x.begin(), x.end());
  fft_plan(n).forward(buf);
  buf.resize(n / 2 + 1);
  return buf;
}

std::vector<double> irfft(std::span<const cplx> bins, std::size_t n) {
  if (bins.size() != n / 2 + 1) {
    throw ShapeError("irfft of length " + std::to_string(n) + " needs " + std::to_string(n / 2 + 1) + " bins");
  }
  std::vector<cplx> full(n);
  full[0] = {bins[0].real(), 0.0};
  for (std::size_t k = 1; k < bins.size(); ++k) {
    if (2 * k == n) {
      full[k] = {bins[k].real(), 0.0};
    } else {
      full[k] = bins[k];
      full[n - k] = std::conj(bins[k]);
    }
  }
  fft_plan(n).backward(full);
  std::vector<double> out(n);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t h = 0; h < n; ++h) out[h] = full[h].real() * inv;
  return out;
}

}  // namespace fusad
