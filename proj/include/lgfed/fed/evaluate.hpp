#pragma once

#include <cstddef>
#include <vector>

#include "lgfed/data/dataset.hpp"
#include "lgfed/fed/split_model.hpp"

namespace lgfed::fed {

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

enum class Split { validation, test };

struct DeviceAccuracy {
  std::vector<double> per_device;
  std::vector<std::size_t> counts;
  double mean = 0.0;  // weighted by split sizes
};

/// Device m's split scored by (locals[m], global), on the device.
DeviceAccuracy evaluate_local_test(const FedState& state, const std::vector<data::DeviceShard>& shards,
                                   Split split = Split::test);

enum class NewTestMode {
  logit_ensemble,  // average the M logit vectors
  weight_average,  // average the local weights, then one forward pass
};

/// Every sample goes through all M local models into the global model.
Matrix ensemble_logits(const FedState& state, const Matrix& x, NewTestMode mode = NewTestMode::logit_ensemble);
double evaluate_new_test(const FedState& state, const data::Dataset& held_out,
                         NewTestMode mode = NewTestMode::logit_ensemble);

}  // namespace lgfed::fed
