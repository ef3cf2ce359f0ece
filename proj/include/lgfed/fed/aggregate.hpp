#pragma once

#include <cstddef>
#include <vector>

#include "lgfed/nn/network.hpp"

namespace lgfed::fed {

struct Contribution {
  const nn::ParamSet* params = nullptr;
  std::size_t n_samples = 0;
};

/// sum_m w_m theta_m with w_m = N_m / sum of N over the contributions. Throws
/// ProtocolError on an empty list, zero total weight or mismatched shapes.
nn::ParamSet aggregate(const std::vector<Contribution>& contributions, std::vector<double>* weights_out = nullptr);

}  // namespace lgfed::fed
