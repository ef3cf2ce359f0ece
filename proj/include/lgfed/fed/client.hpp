#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "lgfed/data/dataset.hpp"
#include "lgfed/nn/network.hpp"
#include "lgfed/nn/optimizer.hpp"

namespace lgfed::fed {

/// Adds regularizer terms to the local gradient in place, given current local params.
using GradientHook = std::function<void(const nn::ParamSet& params, nn::ParamSet& grads)>;

struct ClientOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 10;
  nn::SgdConfig sgd;
  std::size_t round = 0;  // drives learning-rate decay
  bool train_local = true;
  bool train_global = true;
  GradientHook local_hook;
};

struct ClientUpdateResult {
  nn::Network global;      // the updated global copy; the only thing returned to the server
  double train_loss = 0.0;  // mean minibatch loss over the update
  std::size_t n_train = 0;
  bool skipped = false;  // empty training split
};

/// E epochs of shuffled B-sized minibatches on the device's training split. `local` is
/// updated in place and stays with the device. Runs inside a DeviceContext.
ClientUpdateResult client_update(const data::DeviceShard& device, nn::Network& local, const nn::Network& global_copy,
                                 const ClientOptions& options, std::uint64_t seed);

/// Mean cross-entropy of local+global on a dataset (eval mode).
double dataset_loss(const nn::Network& local, const nn::Network& global, const data::Dataset& data);

}  // namespace lgfed::fed
