#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fusad/random.hpp"
#include "fusad/tensor.hpp"

namespace fusad {

struct IfmConfig {
  std::size_t kernel_mid = 3;    // alpha, beta, mu, nu
  std::size_t kernel_small = 3;  // rho
  std::size_t kernel_large = 7;  // omega
  std::size_t kernel_out = 3;
  double exp_clip = 10.0;        // exponents of the scaling gates are clamped to [-clip, clip]
  bool residual = true;
};

void validate(const IfmConfig& config);

/// Receptive-field radius of one IFM block along the token axis.
std::size_t ifm_locality_radius(const IfmConfig& config);

/**
 * Information fusion block over a [M, D, Z] state. Every convolution runs along
 * the token axis with the D embedding channels mixed, same padding:
 *
 *   H1o = H * exp(beta(H))      H1c = H * exp(alpha(H))
 *   H2o = H1o + nu(H1c)         H2c = H1c - mu(H1o)
 *   H3o = rho(H2o) * GELU(omega(H2c))
 *   H3c = omega(H2c) * GELU(rho(H2o))
 *   out = conv_out(H3o + H3c) [+ H]
 */
class InformationFusionModule {
 public:
  static constexpr const char* kConvNames[7] = {"alpha", "beta", "mu", "nu", "rho", "omega", "out"};

  InformationFusionModule(const IfmConfig& config, std::size_t embed_dim, Rng& rng, const std::string& prefix);

  /// Throws NumericalError naming the first stage that produced NaN/Inf.
  Tensor forward(const Tensor& h) const;

  std::vector<Parameter> parameters() const;
  const IfmConfig& config() const { return config_; }
  std::size_t embed_dim() const { return embed_dim_; }

  /// Kernel [D, D, k] and bias [D] of one of the seven convolutions.
  Tensor& weight(const std::string& conv);
  Tensor& bias(const std::string& conv);
  const Tensor& weight(const std::string& conv) const;
  const Tensor& bias(const std::string& conv) const;

 private:
  std::size_t index_of(const std::string& conv) const;

  IfmConfig config_;
  std::size_t embed_dim_;
  std::string prefix_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

/// Max over all IFM parameters of |analytic - central difference| / (|central difference| + 1e-8)
/// for the loss sum(out * probe), probe drawn from a fixed seed. Meant for instances of a few hundred scalars.
double ifm_gradient_check(InformationFusionModule& module, const Tensor& h, double step = 1e-4);

}  // namespace fusad
