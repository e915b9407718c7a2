#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pgc/matrix.hpp"

namespace pgc {

struct GradCheckResult {
  std::string name;
  double relative_error = 0.0;
  double tolerance = 0.0;

  bool passed() const { return relative_error < tolerance; }
};

/// ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-7), Frobenius norms.
double relative_error(const Matrix& analytic, const Matrix& numeric);

/// Central differences of `objective` with respect to every entry of `x`
/// (restored afterwards).
Matrix numeric_gradient(Matrix& x, const std::function<double()>& objective, double step = 1e-6);

/// Finite-difference checks of every layer kernel and of the composed model in
/// both convolution modes. Inputs are drawn so that SortPooling keys are at
/// least 1e-2 apart.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed = 2024);

}  // namespace pgc
