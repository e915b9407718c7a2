#include "pgc/nn/adam.hpp"

#include <cmath>

#include "pgc/errors.hpp"

namespace pgc::nn {

AdamState AdamState::zeros_like(std::span<const Parameter> params) {
  AdamState s;
  for (const auto& p : params) {
    s.first_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    s.second_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
  return s;
}

void adam_step(std::span<Parameter> params, std::span<const Matrix> grads, AdamState& state,
               const AdamConfig& config) {
  require(grads.size() == params.size() && state.first_moment.size() == params.size() &&
              state.second_moment.size() == params.size(),
          "adam_step: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(grads[i].rows() == params[i].value.rows() && grads[i].cols() == params[i].value.cols(),
            "adam_step: gradient shape mismatch for " + params[i].name);
    if (!grads[i].allFinite())
      throw NumericalError("non-finite gradient in parameter " + params[i].name);
  }

  ++state.steps;
  const double t = static_cast<double>(state.steps);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = state.first_moment[i].array();
    auto v = state.second_moment[i].array();
    const auto g = grads[i].array();
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.square();
    params[i].value.array() -=
        config.step_size * (m / correction1) / ((v / correction2).sqrt() + config.epsilon);
  }
}

}  // namespace pgc::nn
