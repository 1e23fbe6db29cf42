#include "fusad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "fusad/error.hpp"

namespace fusad {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool grad_touched = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  double* grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    grad_touched = true;
    return grad.data();
  }
};

}  // namespace detail

namespace {

thread_local bool g_recording = true;

std::size_t normalize_axis(std::ptrdiff_t axis, std::size_t rank) {
  const auto r = static_cast<std::ptrdiff_t>(rank);
  if (axis < -r || axis >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(axis < 0 ? axis + r : axis);
}

// outer * extent * inner decomposition around one axis.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Flat source offsets of a broadcast operand for every output element.
std::vector<std::size_t> broadcast_index(const Shape& out, const Shape& src) {
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> idx(n);
  const std::size_t src_n = shape_numel(src);
  if (src == out) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  if (src_n == 1) return idx;  // all zero
  // trailing-suffix fast path
  bool suffix = src.size() <= out.size();
  for (std::size_t i = 0; suffix && i < src.size(); ++i) {
    suffix = src[i] == out[out.size() - src.size() + i];
  }
  if (suffix) {
    for (std::size_t i = 0; i < n; ++i) idx[i] = i % src_n;
    return idx;
  }
  const std::size_t rank = out.size();
  const std::size_t pad = rank - src.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = rank; i-- > pad;) {
    const std::size_t d = src[i - pad];
    stride[i] = d == 1 ? 0 : s;
    s *= d;
  }
  std::vector<std::size_t> counter(rank, 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    idx[i] = offset;
    for (std::size_t ax = rank; ax-- > 0;) {
      ++counter[ax];
      offset += stride[ax];
      if (counter[ax] < out[ax]) break;
      offset -= stride[ax] * counter[ax];
      counter[ax] = 0;
    }
  }
  return idx;
}

template <class Fwd, class DA, class DB>
Tensor binary_op(const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  Shape out = broadcast_shape(a.shape(), b.shape());
  auto ia = std::make_shared<std::vector<std::size_t>>(broadcast_index(out, a.shape()));
  auto ib = std::make_shared<std::vector<std::size_t>>(broadcast_index(out, b.shape()));
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> data(ia->size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = fwd(x[(*ia)[i]], y[(*ib)[i]]);
  return detail::make_op(std::move(out), std::move(data), {a, b}, [ia, ib, da, db](const detail::OpContext& ctx) {
    const auto g = ctx.out_grad();
    const auto x = ctx.input(0);
    const auto y = ctx.input(1);
    if (double* ga = ctx.input_grad(0)) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[(*ia)[i]] += g[i] * da(x[(*ia)[i]], y[(*ib)[i]]);
    }
    if (double* gb = ctx.input_grad(1)) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[(*ib)[i]] += g[i] * db(x[(*ia)[i]], y[(*ib)[i]]);
    }
  });
}

// Elementwise unary op whose derivative is a function of (input, output).
template <class Fwd, class Deriv>
Tensor unary_op(const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto x = a.data();
  std::vector<double> data(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) data[i] = fwd(x[i]);
  return detail::make_op(a.shape(), std::move(data), {a}, [deriv](const detail::OpContext& ctx) {
    double* ga = ctx.input_grad(0);
    if (!ga) return;
    const auto g = ctx.out_grad();
    const auto x = ctx.input(0);
    const auto y = ctx.output();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                     " values, got " + std::to_string(data.size()));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size(std::ptrdiff_t axis) const { return shape()[normalize_axis(axis, rank())]; }

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw ShapeError("index rank mismatch for " + shape_str(s));
  std::size_t flat = 0;
  std::size_t i = 0;
  for (std::size_t v : index) {
    if (v >= s[i]) throw ShapeError("index out of range for " + shape_str(s));
    flat = flat * s[i] + v;
    ++i;
  }
  return node_->data[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && node_->grad_touched; }

std::span<const double> Tensor::grad() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  if (node_->grad.size() != node_->data.size()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_) return;
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  node_->grad_touched = false;
}

void Tensor::backward() const {
  if (!node_) throw ContractError("backward on an undefined tensor");
  if (shape_numel(node_->shape) != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(node_->shape));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS yields a topological order (inputs before consumers).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && node->grad_touched) node->backward(detail::OpContext(*node));
  }
}

Tensor Tensor::detach() const {
  if (!node_) return {};
  return Tensor(node_->shape, node_->data, false);
}

Tensor Tensor::clone() const {
  if (!node_) return {};
  return Tensor(node_->shape, node_->data, node_->requires_grad);
}

bool Tensor::all_finite() const {
  if (!node_) return true;
  return std::all_of(node_->data.begin(), node_->data.end(), [](double v) { return std::isfinite(v); });
}

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }

bool grad_recording_enabled() { return g_recording; }

namespace detail {

std::span<const double> OpContext::out_grad() const { return node_.grad; }
std::span<const double> OpContext::output() const { return node_.data; }
std::size_t OpContext::num_inputs() const { return node_.inputs.size(); }
std::span<const double> OpContext::input(std::size_t i) const { return node_.inputs.at(i)->data; }
const Shape& OpContext::input_shape(std::size_t i) const { return node_.inputs.at(i)->shape; }

double* OpContext::input_grad(std::size_t i) const {
  Node& in = *node_.inputs.at(i);
  return in.requires_grad ? in.grad_buffer() : nullptr;
}

Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> inputs, BackwardFn backward) {
  Tensor out(std::move(shape), std::move(data), false);
  if (!g_recording) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->inputs.reserve(inputs.size());
  for (auto& t : inputs) out.node_->inputs.push_back(t.node_);
  out.node_->backward = std::move(backward);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary_op(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor gelu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x * normal_cdf(x); },
      [](double x, double) { return normal_cdf(x) + x * normal_pdf(x); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp bounds out of order");
  return unary_op(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  const auto x = a.data();
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  return detail::make_op({}, {total}, {a}, [](const detail::OpContext& ctx) {
    double* ga = ctx.input_grad(0);
    if (!ga) return;
    const double g = ctx.out_grad()[0];
    const std::size_t n = ctx.input(0).size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum(const Tensor& a, std::ptrdiff_t axis, bool keepdim) {
  const std::size_t ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_at(a.shape(), ax);
  Shape out_shape = a.shape();
  if (keepdim) {
    out_shape[ax] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
  }
  const auto x = a.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = x.data() + (o * s.extent + e) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  return detail::make_op(std::move(out_shape), std::move(out), {a}, [s](const detail::OpContext& ctx) {
    double* ga = ctx.input_grad(0);
    if (!ga) return;
    const auto g = ctx.out_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t e = 0; e < s.extent; ++e) {
        double* dst = ga + (o * s.extent + e) * s.inner;
        const double* src = g.data() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor mean(const Tensor& a, std::ptrdiff_t axis, bool keepdim) {
  const double n = static_cast<double>(a.size(axis));
  return scale(sum(a, axis, keepdim), 1.0 / n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || b.rank() != 2) {
    throw ShapeError("matmul expects a[...,K] and b[K,N], got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t k = a.size(-1);
  if (b.size(0) != k) {
    throw ShapeError("matmul inner extent mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t n = b.size(1);
  const std::size_t rows = a.numel() / k;
  Shape out_shape = a.shape();
  out_shape.back() = n;
  const auto x = a.data();
  const auto w = b.data();
  std::vector<double> out(rows * n, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.data() + r * n;
    for (std::size_t i = 0; i < k; ++i) {
      const double xv = x[r * k + i];
      if (xv == 0.0) continue;
      const double* wr = w.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += xv * wr[j];
    }
  }
  return detail::make_op(std::move(out_shape), std::move(out), {a, b}, [rows, k, n](const detail::OpContext& ctx) {
    const auto g = ctx.out_grad();
    const auto x = ctx.input(0);
    const auto w = ctx.input(1);
    if (double* ga = ctx.input_grad(0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.data() + r * n;
        for (std::size_t i = 0; i < k; ++i) {
          const double* wr = w.data() + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += gr[j] * wr[j];
          ga[r * k + i] += acc;
        }
      }
    }
    if (double* gb = ctx.input_grad(1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.data() + r * n;
        for (std::size_t i = 0; i < k; ++i) {
          const double xv = x[r * k + i];
          if (xv == 0.0) continue;
          double* dst = gb + i * n;
          for (std::size_t j = 0; j < n; ++j) dst[j] += xv * gr[j];
        }
      }
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::ptrdiff_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const std::size_t ax = normalize_axis(axis, parts.front().rank());
  Shape out_shape = parts.front().shape();
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == out_shape.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == ax || s[i] == out_shape[i];
    if (!ok) {
      throw ShapeError("concat extent mismatch: " + shape_str(parts.front().shape()) + " vs " + shape_str(s));
    }
    out_shape[ax] += s[ax];
  }
  const AxisSplit os = split_at(out_shape, ax);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> widths;
  std::size_t col = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.size(static_cast<std::ptrdiff_t>(ax)) * os.inner;
    const auto x = p.data();
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(x.data() + o * w, w, out.data() + o * os.extent * os.inner + col);
    }
    widths.push_back(w);
    col += w;
  }
  return detail::make_op(std::move(out_shape), std::move(out), parts, [os, widths](const detail::OpContext& ctx) {
    const auto g = ctx.out_grad();
    std::size_t col = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      const std::size_t w = widths[p];
      if (double* gp = ctx.input_grad(p)) {
        for (std::size_t o = 0; o < os.outer; ++o) {
          const double* src = g.data() + o * os.extent * os.inner + col;
          double* dst = gp + o * w;
          for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
        }
      }
      col += w;
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("cannot reshape " + shape_str(a.shape()) + " into " + shape_str(shape));
  }
  std::vector<double> data(a.data().begin(), a.data().end());
  return detail::make_op(std::move(shape), std::move(data), {a}, [](const detail::OpContext& ctx) {
    double* ga = ctx.input_grad(0);
    if (!ga) return;
    const auto g = ctx.out_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Tensor slice(const Tensor& a, std::ptrdiff_t axis, std::size_t start, std::size_t length) {
  const std::size_t ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_at(a.shape(), ax);
  if (length == 0 || start + length > s.extent) {
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of range for extent " + std::to_string(s.extent));
  }
  Shape out_shape = a.shape();
  out_shape[ax] = length;
  const auto x = a.data();
  std::vector<double> out(s.outer * length * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.data() + (o * s.extent + start) * s.inner, length * s.inner, out.data() + o * length * s.inner);
  }
  return detail::make_op(std::move(out_shape), std::move(out), {a}, [s, start, length](const detail::OpContext& ctx) {
    double* ga = ctx.input_grad(0);
    if (!ga) return;
    const auto g = ctx.out_grad();
    const std::size_t w = length * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = ga + (o * s.extent + start) * s.inner;
      const double* src = g.data() + o * w;
      for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
    }
  });
}

Tensor transpose(const Tensor& a, std::ptrdiff_t axis0, std::ptrdiff_t axis1) {
  const std::size_t ax0 = normalize_axis(axis0, a.rank());
  const std::size_t ax1 = normalize_axis(axis1, a.rank());
  Shape out_shape = a.shape();
  std::swap(out_shape[ax0], out_shape[ax1]);
  // perm[i] = flat source offset of output element i
  Shape swapped_src = a.shape();
  std::vector<std::size_t> src_stride(a.rank());
  std::size_t st = 1;
  for (std::size_t i = a.rank(); i-- > 0;) {
    src_stride[i] = st;
    st *= swapped_src[i];
  }
  std::swap(src_stride[ax0], src_stride[ax1]);
  const std::size_t n = a.numel();
  auto perm = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> counter(a.rank(), 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (*perm)[i] = offset;
    for (std::size_t ax = a.rank(); ax-- > 0;) {
      ++counter[ax];
      offset += src_stride[ax];
      if (counter[ax] < out_shape[ax]) break;
      offset -= src_stride[ax] * counter[ax];
      counter[ax] = 0;
    }
  }
  const auto x = a.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[(*perm)[i]];
  return detail::make_op(std::move(out_shape), std::move(out), {a}, [perm](const detail::OpContext& ctx) {
    double* ga = ctx.input_grad(0);
    if (!ga) return;
    const auto g = ctx.out_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[(*perm)[i]] += g[i];
  });
}

Tensor log_softmax(const Tensor& a) {
  const std::size_t k = a.size(-1);
  const std::size_t rows = a.numel() / k;
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * k;
    const double m = *std::max_element(xr, xr + k);
    double z = 0.0;
    for (std::size_t i = 0; i < k; ++i) z += std::exp(xr[i] - m);
    const double lse = m + std::log(z);
    for (std::size_t i = 0; i < k; ++i) out[r * k + i] = xr[i] - lse;
  }
  return detail::make_op(a.shape(), std::move(out), {a}, [rows, k](const detail::OpContext& ctx) {
    double* ga = ctx.input_grad(0);
    if (!ga) return;
    const auto g = ctx.out_grad();
    const auto y = ctx.output();
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t i = 0; i < k; ++i) gsum += g[r * k + i];
      for (std::size_t i = 0; i < k; ++i) ga[r * k + i] += g[r * k + i] - std::exp(y[r * k + i]) * gsum;
    }
  });
}

Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Padding padding) {
  if (input.rank() != 2 && input.rank() != 3) {
    throw ShapeError("conv1d input must be [C_in,T] or [B,C_in,T], got " + shape_str(input.shape()));
  }
  if (kernel.rank() != 3) throw ShapeError("conv1d kernel must be [C_out,C_in,k], got " + shape_str(kernel.shape()));
  const bool batched = input.rank() == 3;
  const std::size_t batch = batched ? input.size(0) : 1;
  const std::size_t cin = input.size(-2);
  const std::size_t len = input.size(-1);
  const std::size_t cout = kernel.size(0);
  const std::size_t k = kernel.size(2);
  if (kernel.size(1) != cin) {
    throw ShapeError("conv1d channel mismatch: input has " + std::to_string(cin) + " channels, kernel expects " +
                     std::to_string(kernel.size(1)));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.size(0) != cout)) {
    throw ShapeError("conv1d bias must be [" + std::to_string(cout) + "], got " + shape_str(bias.shape()));
  }
  if (padding == Padding::valid && k > len) throw ShapeError("conv1d valid padding with kernel wider than input");
  const std::size_t out_len = padding == Padding::same ? len : len - k + 1;
  const std::ptrdiff_t shift = padding == Padding::same ? -static_cast<std::ptrdiff_t>(k / 2) : 0;

  const auto x = input.data();
  const auto w = kernel.data();
  std::vector<double> out(batch * cout * out_len, 0.0);
  // For tap j the valid output range is t in [t0, t1) with t + j + shift in [0, len).
  auto tap_range = [len, out_len, shift](std::size_t j) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) + shift;
    const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -off);
    const std::ptrdiff_t t1 =
        std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_len), static_cast<std::ptrdiff_t>(len) - off);
    return std::tuple{off, t0, t1};
  };
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* dst = out.data() + (b * cout + co) * out_len;
      if (has_bias) std::fill_n(dst, out_len, bias.data()[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* src = x.data() + (b * cin + ci) * len;
        const double* wr = w.data() + (co * cin + ci) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const double wv = wr[j];
          const auto [off, t0, t1] = tap_range(j);
          for (std::ptrdiff_t t = t0; t < t1; ++t) dst[t] += wv * src[t + off];
        }
      }
    }
  }
  Shape out_shape = batched ? Shape{batch, cout, out_len} : Shape{cout, out_len};
  std::vector<Tensor> inputs{input, kernel};
  if (has_bias) inputs.push_back(bias);
  return detail::make_op(
      std::move(out_shape), std::move(out), std::move(inputs),
      [=](const detail::OpContext& ctx) {
        const auto g = ctx.out_grad();
        const auto x = ctx.input(0);
        const auto w = ctx.input(1);
        double* gx = ctx.input_grad(0);
        double* gw = ctx.input_grad(1);
        double* gbias = has_bias ? ctx.input_grad(2) : nullptr;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gr = g.data() + (b * cout + co) * out_len;
            if (gbias) {
              double acc = 0.0;
              for (std::size_t t = 0; t < out_len; ++t) acc += gr[t];
              gbias[co] += acc;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* src = x.data() + (b * cin + ci) * len;
              const double* wr = w.data() + (co * cin + ci) * k;
              for (std::size_t j = 0; j < k; ++j) {
                const auto [off, t0, t1] = tap_range(j);
                if (gw) {
                  double acc = 0.0;
                  for (std::ptrdiff_t t = t0; t < t1; ++t) acc += gr[t] * src[t + off];
                  gw[(co * cin + ci) * k + j] += acc;
                }
                if (gx) {
                  double* gsrc = gx + (b * cin + ci) * len;
                  const double wv = wr[j];
                  for (std::ptrdiff_t t = t0; t < t1; ++t) gsrc[t + off] += wv * gr[t];
                }
              }
            }
          }
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::ptrdiff_t axis) {
  const std::size_t ax = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), ax);
  if (gamma.numel() != s.extent || beta.numel() != s.extent) {
    throw ShapeError("layer_norm affine extent must be " + std::to_string(s.extent));
  }
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto rstd = std::make_shared<std::vector<double>>(s.outer * s.inner);
  std::vector<double> out(xv.size());
  const double n = static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mu = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) mu += xv[base + e * s.inner];
      mu /= n;
      double var = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double d = xv[base + e * s.inner] - mu;
        var += d * d;
      }
      var /= n;
      const double r = 1.0 / std::sqrt(var + kLayerNormEps);
      (*rstd)[o * s.inner + i] = r;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const std::size_t idx = base + e * s.inner;
        const double h = (xv[idx] - mu) * r;
        (*xhat)[idx] = h;
        out[idx] = gv[e] * h + bv[e];
      }
    }
  }
  return detail::make_op(x.shape(), std::move(out), {x, gamma, beta}, [s, xhat, rstd](const detail::OpContext& ctx) {
    const auto g = ctx.out_grad();
    const auto gv = ctx.input(1);
    double* gx = ctx.input_grad(0);
    double* gg = ctx.input_grad(1);
    double* gb = ctx.input_grad(2);
    const double n = static_cast<double>(s.extent);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double mean_dy = 0.0;
        double mean_dy_xhat = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t idx = base + e * s.inner;
          const double dy = g[idx] * gv[e];
          mean_dy += dy;
          mean_dy_xhat += dy * (*xhat)[idx];
          if (gg) gg[e] += g[idx] * (*xhat)[idx];
          if (gb) gb[e] += g[idx];
        }
        if (!gx) continue;
        mean_dy /= n;
        mean_dy_xhat /= n;
        const double r = (*rstd)[o * s.inner + i];
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t idx = base + e * s.inner;
          gx[idx] += r * (g[idx] * gv[e] - mean_dy - (*xhat)[idx] * mean_dy_xhat);
        }
      }
    }
  });
}

}  // namespace fusad
