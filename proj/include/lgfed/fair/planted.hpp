#pragma once

#include <cstddef>
#include <cstdint>

#include "lgfed/data/dataset.hpp"

namespace lgfed::fair {

/// Synthetic tabular data with a binary protected attribute p ~ Bernoulli(0.5).
/// z-features ~ N(0, 1) drive the label, y = 1[z.u + label_shift (2p-1) + noise > 0].
/// w-features = gamma (2p-1) + N(0, 1) carry p and nothing else.
struct PlantedConfig {
  std::size_t rows = 2000;
  std::size_t signal_dims = 6;
  std::size_t protected_dims = 4;
  double gamma = 1.0;        // 0 makes p independent of the features
  double label_shift = 0.0;  // 0 makes p independent of the label
  double label_noise = 0.5;
};

data::Dataset planted_dataset(const PlantedConfig& config, std::uint64_t seed);

}  // namespace lgfed::fair
