#pragma once

#include <vector>

#include "fusad/tensor.hpp"

namespace fusad {

struct AdamWOptions {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/**
 * AdamW with decoupled weight decay: each step first shrinks the value by
 * (1 - lr * weight_decay), then applies the bias-corrected Adam update.
 *
 * Parameters that received no gradient since the last zero_grad() are skipped
 * entirely (no decay, no moment update), so a task head stays untouched while
 * another head trains. A non-finite gradient aborts the step before any value
 * changes and raises NumericalError naming the offending parameter.
 */
class AdamW {
 public:
  AdamW(std::vector<Parameter> params, AdamWOptions options);

  void step();
  void zero_grad();

  std::size_t steps_taken() const { return step_; }
  const AdamWOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

 private:
  std::vector<Parameter> params_;
  AdamWOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t step_ = 0;
};

}  // namespace fusad
