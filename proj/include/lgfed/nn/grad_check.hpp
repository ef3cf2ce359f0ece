#pragma once

#include <cstddef>
#include <functional>

#include "lgfed/nn/loss.hpp"
#include "lgfed/nn/network.hpp"

namespace lgfed::nn {

using LossFn = std::function<LossResult(const Matrix& output)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_layer = 0;
  Index worst_index = 0;  // flat index inside the layer; weights first, then biases
  bool worst_is_bias = false;
  std::size_t coordinates = 0;
  bool passed = false;
};

// |a - n| / max(|a|, |n|, floor), floor keeps vanishing coordinates from dominating.
double relative_error(double analytic, double numeric, double floor = 1e-6) noexcept;

/// Central finite differences of the eval-mode loss against `analytic`.
GradCheckReport compare_gradients(const Network& net, const Matrix& batch, const LossFn& loss,
                                  const ParamSet& analytic, double tolerance, double step = 1e-5);

/// Finite-difference check of backward() on an eval-mode pass.
GradCheckReport grad_check(const Network& net, const Matrix& batch, const LossFn& loss,
                           double tolerance, double step = 1e-5);

}  // namespace lgfed::nn
