#include "fusad/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "fusad/error.hpp"

namespace fusad {

namespace {

Tensor checked(Tensor t, const char* stage) {
  if (!t.all_finite()) throw NumericalError(std::string("IFM produced a non-finite value at stage ") + stage);
  return t;
}

}  // namespace

void validate(const IfmConfig& config) {
  if (config.kernel_mid == 0 || config.kernel_small == 0 || config.kernel_large == 0 || config.kernel_out == 0) {
    throw ConfigError("IFM kernel sizes must be positive");
  }
  if (config.kernel_small >= config.kernel_large) throw ConfigError("IFM requires kernel_small < kernel_large");
  if (!(config.exp_clip > 0)) throw ConfigError("IFM exp_clip must be positive");
}

std::size_t ifm_locality_radius(const IfmConfig& config) {
  return (config.kernel_mid / 2) * 2 + std::max(config.kernel_small, config.kernel_large) / 2 + config.kernel_out / 2;
}

InformationFusionModule::InformationFusionModule(const IfmConfig& config, std::size_t embed_dim, Rng& rng,
                                                 const std::string& prefix)
    : config_(config), embed_dim_(embed_dim), prefix_(prefix) {
  validate(config_);
  const std::size_t kernels[7] = {config.kernel_mid,   config.kernel_mid,   config.kernel_mid, config.kernel_mid,
                                  config.kernel_small, config.kernel_large, config.kernel_out};
  for (std::size_t k : kernels) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim * k));
    std::vector<double> w(embed_dim * embed_dim * k);
    for (double& v : w) v = rng.uniform(-bound, bound);
    std::vector<double> b(embed_dim);
    for (double& v : b) v = rng.uniform(-bound, bound);
    weights_.emplace_back(Shape{embed_dim, embed_dim, k}, std::move(w), true);
    biases_.emplace_back(Shape{embed_dim}, std::move(b), true);
  }
}

std::size_t InformationFusionModule::index_of(const std::string& conv) const {
  for (std::size_t i = 0; i < 7; ++i) {
    if (conv == kConvNames[i]) return i;
  }
  throw ContractError("unknown IFM convolution '" + conv + "'");
}

Tensor& InformationFusionModule::weight(const std::string& conv) { return weights_[index_of(conv)]; }
Tensor& InformationFusionModule::bias(const std::string& conv) { return biases_[index_of(conv)]; }
const Tensor& InformationFusionModule::weight(const std::string& conv) const { return weights_[index_of(conv)]; }
const Tensor& InformationFusionModule::bias(const std::string& conv) const { return biases_[index_of(conv)]; }

Tensor InformationFusionModule::forward(const Tensor& h) const {
  if (h.rank() != 3 || h.size(1) != embed_dim_) {
    throw ShapeError("IFM expects [M, " + std::to_string(embed_dim_) + ", Z], got " + shape_str(h.shape()));
  }
  if (!h.all_finite()) throw NumericalError("IFM input contains non-finite values");
  auto conv = [&](std::size_t i, const Tensor& x) { return conv1d(x, weights_[i], biases_[i], Padding::same); };
  const double c = config_.exp_clip;

  const Tensor h1_orig = checked(mul(h, exp(clamp(conv(1, h), -c, c))), "H1_orig");
  const Tensor h1_copy = checked(mul(h, exp(clamp(conv(0, h), -c, c))), "H1_copy");
  const Tensor h2_orig = checked(add(h1_orig, conv(3, h1_copy)), "H2_orig");
  const Tensor h2_copy = checked(sub(h1_copy, conv(2, h1_orig)), "H2_copy");
  const Tensor local = conv(4, h2_orig);
  const Tensor wide = conv(5, h2_copy);
  const Tensor h3_orig = checked(mul(local, gelu(wide)), "H3_orig");
  const Tensor h3_copy = checked(mul(wide, gelu(local)), "H3_copy");
  Tensor out = checked(conv(6, add(h3_orig, h3_copy)), "output");
  return config_.residual ? add(out, h) : out;
}

std::vector<Parameter> InformationFusionModule::parameters() const {
  std::vector<Parameter> out;
  for (std::size_t i = 0; i < 7; ++i) {
    out.push_back({prefix_ + "." + kConvNames[i] + ".weight", weights_[i]});
    out.push_back({prefix_ + "." + kConvNames[i] + ".bias", biases_[i]});
  }
  return out;
}

double ifm_gradient_check(InformationFusionModule& module, const Tensor& h, double step) {
  const Tensor input = h.detach();
  Tensor probe;
  {
    Rng rng(20240917);
    const Tensor shape_ref = [&] {
      NoGradGuard guard;
      return module.forward(input);
    }();
    std::vector<double> p(shape_ref.numel());
    for (double& v : p) v = rng.uniform(-1.0, 1.0);
    probe = Tensor(shape_ref.shape(), std::move(p));
  }
  auto loss_value = [&] {
    NoGradGuard guard;
    return sum(mul(module.forward(input), probe)).item();
  };

  auto params = module.parameters();
  for (auto& p : params) p.value.zero_grad();
  sum(mul(module.forward(input), probe)).backward();

  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> analytic(p.value.grad().begin(), p.value.grad().end());
    auto values = p.value.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss_value();
      values[i] = saved - step;
      const double down = loss_value();
      values[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      worst = std::max(worst, std::abs(analytic[i] - fd) / (std::abs(fd) + 1e-8));
    }
    p.value.zero_grad();
  }
  return worst;
}

}  // namespace fusad
