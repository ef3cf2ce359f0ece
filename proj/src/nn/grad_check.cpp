#include "lgfed/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "lgfed/common/error.hpp"

namespace lgfed::nn {

double relative_error(double analytic, double numeric, double floor) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport compare_gradients(const Network& net, const Matrix& batch, const LossFn& loss,
                                  const ParamSet& analytic, double tolerance, double step) {
  if (!same_shape(net.params(), analytic)) throw ShapeError("analytic gradient shape mismatch");
  Network probe = net;
  GradCheckReport report;
  auto eval = [&] { return loss(predict(probe, batch)).loss; };

  auto check = [&](double& coord, double grad, std::size_t layer, Index idx, bool is_bias) {
    const double saved = coord;
    coord = saved + step;
    const double up = eval();
    coord = saved - step;
    const double down = eval();
    coord = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = relative_error(grad, numeric);
    ++report.coordinates;
    if (err > report.max_rel_error || report.coordinates == 1) {
      report.max_rel_error = err;
      report.worst_layer = layer;
      report.worst_index = idx;
      report.worst_is_bias = is_bias;
    }
  };

  auto& params = probe.mutable_params();
  for (std::size_t li = 0; li < params.size(); ++li) {
    auto& l = params[li];
    for (Index k = 0; k < l.weights.size(); ++k)
      check(l.weights.data()[k], analytic[li].weights.data()[k], li, k, false);
    if (l.bias_enabled)
      for (Index k = 0; k < l.biases.size(); ++k) check(l.biases[k], analytic[li].biases[k], li, k, true);
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

GradCheckReport grad_check(const Network& net, const Matrix& batch, const LossFn& loss,
                           double tolerance, double step) {
  auto fwd = forward(net, batch, Mode::eval);
  const auto lr = loss(fwd.output);
  const auto bwd = backward(net, fwd.cache, lr.grad);
  return compare_gradients(net, batch, loss, bwd.grads, tolerance, step);
}

}  // namespace lgfed::nn
