#pragma once

#include <span>
#include <string>
#include <vector>

#include "pgc/matrix.hpp"

namespace pgc::nn {

struct Parameter {
  std::string name;
  Matrix value;
};

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long long steps = 0;

  static AdamState zeros_like(std::span<const Parameter> params);
};

/// One bias-corrected Adam update. All gradients are checked before any
/// parameter is touched; a non-finite entry raises NumericalError naming the
/// parameter and leaves params and state unchanged.
void adam_step(std::span<Parameter> params, std::span<const Matrix> grads, AdamState& state,
               const AdamConfig& config);

}  // namespace pgc::nn
