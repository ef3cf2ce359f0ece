#pragma once

#include <cstddef>
#include <vector>

#include "lgfed/nn/network.hpp"

namespace lgfed::fed {

using nn::Matrix;
using nn::Network;

/// Simulator state. Device m's model is locals[m] followed by `global`. FedAvg keeps every
/// local empty; local-only keeps `global` empty.
struct FedState {
  Network global;
  std::vector<Network> locals;
  std::size_t split_index = 0;
  Network phase1_model;  // full model at the phase switch (LG runs), empty otherwise

  std::size_t devices() const noexcept { return locals.size(); }
  bool has_locals() const;
};

/// Bottom `k` layers and the remaining top layers of `full`.
struct SplitModel {
  Network local_layers;
  Network global_layers;
  std::size_t split_index = 0;
};

SplitModel split(const Network& full, std::size_t k);

/// FedState with `m` copies of the bottom k layers of `full` and its top layers as global.
FedState make_split_state(const Network& full, std::size_t k, std::size_t m);

/// Eval-mode logits of local followed by global.
Matrix split_predict(const Network& local, const Network& global, const Matrix& x);

}  // namespace lgfed::fed
