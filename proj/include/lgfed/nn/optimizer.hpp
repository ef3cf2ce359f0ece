#pragma once

#include <cstddef>

#include "lgfed/nn/network.hpp"

namespace lgfed::nn {

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.5;
  double lr_decay = 0.0;
};

// eta_round = eta / (1 + decay * round)
double decayed_learning_rate(double base, double decay, std::size_t round) noexcept;

class OptimizerState {
 public:
  OptimizerState(const SgdConfig& config, const ParamSet& like, std::size_t round = 0);

  double learning_rate() const noexcept { return learning_rate_; }
  double momentum() const noexcept { return config_.momentum; }
  const SgdConfig& config() const noexcept { return config_; }
  const ParamSet& velocity() const noexcept { return velocity_; }

  void set_round(std::size_t round) noexcept;

 private:
  friend void sgd_step(ParamSet&, const ParamSet&, OptimizerState&);

  SgdConfig config_;
  double learning_rate_;
  ParamSet velocity_;
};

/// velocity <- momentum * velocity + grad; params <- params - lr * velocity.
/// A non-finite gradient throws NumericError and leaves params and velocity untouched.
void sgd_step(ParamSet& params, const ParamSet& grads, OptimizerState& opt);
void sgd_step(Network& net, const ParamSet& grads, OptimizerState& opt);

}  // namespace lgfed::nn
