#include "fusad/optim.hpp"

#include <cmath>
#include <string>

#include "fusad/error.hpp"

namespace fusad {

AdamW::AdamW(std::vector<Parameter> params, AdamWOptions options) : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.value.requires_grad()) throw ContractError("optimizer parameter '" + p.name + "' does not require grad");
    m_.emplace_back(p.value.numel(), 0.0);
    v_.emplace_back(p.value.numel(), 0.0);
  }
}

void AdamW::step() {
  for (const auto& p : params_) {
    if (!p.value.has_grad()) continue;
    std::size_t bad = 0;
    for (double g : p.value.grad()) bad += std::isfinite(g) ? 0 : 1;
    if (bad) {
      throw NumericalError("non-finite gradient in '" + p.name + "' (" + std::to_string(bad) + " of " +
                           std::to_string(p.value.numel()) + " entries); step " + std::to_string(step_ + 1) +
                           " aborted");
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  const double decay = 1.0 - options_.lr * options_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor value = params_[i].value;
    if (!value.has_grad()) continue;
    auto x = value.mutable_data();
    const auto g = value.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] *= decay;
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      x[j] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

}  // namespace fusad
