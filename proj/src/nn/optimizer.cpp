#include "lgfed/nn/optimizer.hpp"

#include "lgfed/common/error.hpp"

namespace lgfed::nn {

double decayed_learning_rate(double base, double decay, std::size_t round) noexcept {
  return base / (1.0 + decay * static_cast<double>(round));
}

OptimizerState::OptimizerState(const SgdConfig& config, const ParamSet& like, std::size_t round)
    : config_(config),
      learning_rate_(decayed_learning_rate(config.learning_rate, config.lr_decay, round)),
      velocity_(zeros_like(like)) {
  if (!(config.learning_rate >= 0.0)) throw ArgumentError("learning rate must be nonnegative");
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) throw ArgumentError("momentum must lie in [0, 1)");
  if (!(config.lr_decay >= 0.0)) throw ArgumentError("learning-rate decay must be nonnegative");
}

void OptimizerState::set_round(std::size_t round) noexcept {
  learning_rate_ = decayed_learning_rate(config_.learning_rate, config_.lr_decay, round);
}

void sgd_step(ParamSet& params, const ParamSet& grads, OptimizerState& opt) {
  if (!same_shape(params, grads) || !same_shape(params, opt.velocity_))
    throw ShapeError("sgd_step operands differ in shape");
  for (const auto& g : grads)
    if (!g.all_finite()) throw NumericError("non-finite gradient, step refused");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = opt.velocity_[i];
    v.weights = opt.momentum() * v.weights + grads[i].weights;
    params[i].weights.noalias() -= opt.learning_rate_ * v.weights;
    if (params[i].bias_enabled) {
      v.biases = opt.momentum() * v.biases + grads[i].biases;
      params[i].biases.noalias() -= opt.learning_rate_ * v.biases;
    }
  }
}

void sgd_step(Network& net, const ParamSet& grads, OptimizerState& opt) {
  sgd_step(net.mutable_params(), grads, opt);
}

}  // namespace lgfed::nn
