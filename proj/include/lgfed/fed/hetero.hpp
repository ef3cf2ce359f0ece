#pragma once

#include <cstddef>
#include <vector>

#include "lgfed/data/dataset.hpp"
#include "lgfed/fed/algorithms.hpp"

namespace lgfed::fed {

struct HeteroConfig {
  double finetune_participation = 0.0;  // fraction of original devices joining each round
  std::size_t rounds = 0;
  std::size_t warmup_epochs = 1;  // LG: local-only epochs for the new device before joint rounds
};

struct HeteroResult {
  double normal_before = 0.0;   // original devices' local test
  double rotated_before = 0.0;  // new device's test
  double normal_after = 0.0;
  double rotated_after = 0.0;
  FedState state;  // the new device is appended as the last device
};

/// LG state (phase1_model set): the new device starts from the phase-1 bottom layers.
/// FedAvg state: the shared model trains on the new device. Originals sampled with
/// `finetune_participation` train and aggregate alongside.
HeteroResult run_hetero_online(const FedState& trained, const std::vector<data::DeviceShard>& originals,
                               const data::DeviceShard& new_device, const HeteroConfig& hetero,
                               const FederationConfig& config);

}  // namespace lgfed::fed
