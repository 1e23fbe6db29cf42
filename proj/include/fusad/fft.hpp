#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fusad {

using cplx = std::complex<double>;

/// Immutable FFT plan for one length: iterative radix-2 for powers of two,
/// Bluestein's chirp-z over a radix-2 core otherwise. Safe to share across threads.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }
  /// In place, X[k] = sum_h x[h] exp(-2 pi i k h / n).
  void forward(std::span<cplx> data) const;
  /// In place, unnormalized: x[h] = sum_k X[k] exp(+2 pi i k h / n).
  void backward(std::span<cplx> data) const;

 private:
  void radix2(std::span<cplx> data) const;
  void bluestein(std::span<cplx> data) const;

  std::size_t n_;
  std::size_t m_;  // radix-2 core length (== n_ when n_ is a power of two)
  std::vector<cplx> twiddle_;
  std::vector<std::size_t> bitrev_;
  std::vector<cplx> chirp_;      // exp(-i pi k^2 / n), k < n
  std::vector<cplx> chirp_fft_;  // FFT of the conjugate chirp filter, length m_
};

/// Cached plan for length n.
const FftPlan& fft_plan(std::size_t n);

/// Nonnegative-frequency half spectrum of a real signal: n/2 + 1 bins.
std::vector<cplx> rfft(std::span<const double> x);
/// Inverse of rfft for a length-n signal. Imaginary parts of the DC and
/// (even n) Nyquist bins are ignored.
std::vector<double> irfft(std::span<const cplx> bins, std::size_t n);

}  // namespace fusad
