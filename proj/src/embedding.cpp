#include "fusad/embedding.hpp"

#include <cmath>

#include "fusad/error.hpp"

namespace fusad {

std::string to_string(PadPolicy policy) { return policy == PadPolicy::zero ? "zero" : "replicate_last"; }

PadPolicy pad_policy_from_string(const std::string& name) {
  if (name == "replicate_last") return PadPolicy::replicate_last;
  if (name == "zero") return PadPolicy::zero;
  throw ConfigError("unknown pad policy '" + name + "'");
}

std::size_t num_patches(std::size_t length, std::size_t patch_len) {
  if (patch_len == 0) throw ConfigError("patch length must be positive");
  return (length + patch_len - 1) / patch_len;
}

Tensor patchify(const Tensor& x, std::size_t patch_len, PadPolicy pad) {
  if (!x.defined() || x.rank() < 1) throw InputError("patchify needs a series with a time axis");
  const std::size_t len = x.size(-1);
  const std::size_t z = num_patches(len, patch_len);
  const std::size_t rows = x.numel() / len;
  const std::size_t width = z * patch_len;
  // source index per output slot within a row; -1 marks zero fill
  auto source = std::make_shared<std::vector<std::ptrdiff_t>>(width);
  for (std::size_t i = 0; i < width; ++i) {
    if (i < len) {
      (*source)[i] = static_cast<std::ptrdiff_t>(i);
    } else {
      (*source)[i] = pad == PadPolicy::replicate_last ? static_cast<std::ptrdiff_t>(len - 1) : -1;
    }
  }
  const auto xv = x.data();
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < width; ++i) {
      const std::ptrdiff_t s = (*source)[i];
      out[r * width + i] = s < 0 ? 0.0 : xv[r * len + static_cast<std::size_t>(s)];
    }
  }
  Shape shape = x.shape();
  shape.back() = z;
  shape.push_back(patch_len);
  return detail::make_op(std::move(shape), std::move(out), {x}, [source, rows, len, width](const detail::OpContext& ctx) {
    double* gx = ctx.input_grad(0);
    if (!gx) return;
    const auto g = ctx.out_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < width; ++i) {
        const std::ptrdiff_t s = (*source)[i];
        if (s >= 0) gx[r * len + static_cast<std::size_t>(s)] += g[r * width + i];
      }
    }
  });
}

PatchEmbedding::PatchEmbedding(const PatchConfig& config, std::size_t max_patches, Rng& rng, const std::string& prefix)
    : config_(config), max_patches_(max_patches), prefix_(prefix) {
  if (config.patch_len == 0 || config.embed_dim == 0) throw ConfigError("patch_len and embed_dim must be positive");
  if (max_patches == 0) throw ConfigError("positional table needs at least one row");
  const std::size_t b = config.patch_len;
  const std::size_t d = config.embed_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(b));
  std::vector<double> w(b * d);
  for (double& v : w) v = rng.uniform(-bound, bound);
  std::vector<double> bias(d);
  for (double& v : bias) v = rng.uniform(-bound, bound);
  std::vector<double> pos(max_patches * d);
  for (double& v : pos) v = rng.normal(0.0, 0.02);
  weight_ = Tensor({b, d}, std::move(w), true);
  bias_ = Tensor({d}, std::move(bias), true);
  positions_ = Tensor({max_patches, d}, std::move(pos), true);
}

Tensor PatchEmbedding::forward(const Tensor& patches) const {
  if (patches.rank() != 3 || patches.size(2) != config_.patch_len) {
    throw ShapeError("embedding expects [M, Z, " + std::to_string(config_.patch_len) + "], got " +
                     shape_str(patches.shape()));
  }
  const std::size_t z = patches.size(1);
  if (z > max_patches_) {
    throw CapacityError("series yields " + std::to_string(z) + " patches but the positional table holds Z_max = " +
                        std::to_string(max_patches_));
  }
  const Tensor projected = add(matmul(patches, weight_), bias_);
  return add(projected, slice(positions_, 0, 0, z));
}

std::vector<Parameter> PatchEmbedding::parameters() const {
  return {{prefix_ + ".proj.weight", weight_}, {prefix_ + ".proj.bias", bias_}, {prefix_ + ".pos", positions_}};
}

}  // namespace fusad
