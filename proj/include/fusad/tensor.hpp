#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fusad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {
struct Node;
class OpContext;
using BackwardFn = std::function<void(const OpContext&)>;
Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> inputs, BackwardFn backward);
}  // namespace detail

/**
 * Dense row-major array of doubles with optional reverse-mode gradient tracking.
 *
 * A Tensor is a handle: copies share the same storage and graph node, the way
 * parameters are shared between a model and its optimizer. Use clone() for an
 * independent copy. Every op records a backward closure on the result when at
 * least one input requires a gradient and recording is enabled (see NoGradGuard).
 */
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size(std::ptrdiff_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable view of the storage. Intended for leaves (parameters, inputs);
  /// writing into an intermediate does not update anything downstream.
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  /// True once backward() has written into this tensor's gradient since the last zero_grad().
  bool has_grad() const;
  /// Gradient buffer; all zeros when nothing has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad();

  /// Reverse pass from a scalar. Gradients accumulate into every reachable tensor
  /// that requires them.
  void backward() const;

  Tensor detach() const;
  Tensor clone() const;
  bool all_finite() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor detail::make_op(Shape, std::vector<double>, std::vector<Tensor>, detail::BackwardFn);
  friend class detail::OpContext;
};

/// Complex-valued tensor stored as two real tensors of identical shape.
struct ComplexTensor {
  Tensor real;
  Tensor imag;
};

/// A named learnable tensor. Names are dotted paths, unique within a model.
struct Parameter {
  std::string name;
  Tensor value;
};

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_recording_enabled();

namespace detail {

/// View handed to a backward closure: the incoming gradient, the forward
/// values, and writable gradient buffers for inputs that track gradients.
class OpContext {
 public:
  explicit OpContext(Node& node) : node_(node) {}
  std::span<const double> out_grad() const;
  std::span<const double> output() const;
  std::size_t num_inputs() const;
  std::span<const double> input(std::size_t i) const;
  const Shape& input_shape(std::size_t i) const;
  /// Nullptr when input i does not require a gradient.
  double* input_grad(std::size_t i) const;

 private:
  Node& node_;
};

/// Builds an op result. `backward` is dropped when no input requires a gradient.
Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> inputs, BackwardFn backward);

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and reduction ops. Binary ops broadcast numpy-style.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
/// x * Phi(x) with the exact erf form of the normal CDF.
Tensor gelu(const Tensor& a);
/// Gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, std::ptrdiff_t axis, bool keepdim = false);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, std::ptrdiff_t axis, bool keepdim = false);

/// a[..., K] x b[K, N] -> [..., N]. `a` may have any rank >= 1.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor concat(const std::vector<Tensor>& parts, std::ptrdiff_t axis);
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice(const Tensor& a, std::ptrdiff_t axis, std::size_t start, std::size_t length);
Tensor transpose(const Tensor& a, std::ptrdiff_t axis0, std::ptrdiff_t axis1);
/// Log-softmax over the last axis, max-shifted.
Tensor log_softmax(const Tensor& a);

enum class Padding { same, valid };

/**
 * 1-D cross-correlation over the last axis.
 *
 * input [C_in, T] or [B, C_in, T]; kernel [C_out, C_in, k]; bias [C_out] or undefined.
 * With Padding::same, out[c, t] = bias[c] + sum_{i,j} kernel[c, i, j] * input[i, t + j - k/2]
 * (integer division, out-of-range reads are zero) and the length is preserved.
 * Padding::valid yields T - k + 1 outputs starting at offset 0.
 */
Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Padding padding = Padding::same);

inline constexpr double kLayerNormEps = 1e-5;

/// Normalizes `x` along `axis` (biased variance + 1e-5), then applies gamma/beta of extent shape[axis].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::ptrdiff_t axis);

}  // namespace fusad
