#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "lgfed/fed/algorithms.hpp"
#include "lgfed/nn/network.hpp"

namespace lgfed::fed {

// Little-endian. Header: "LGFM", u32 version, u32 layer count, then per layer u32 fan_in,
// u32 fan_out, u32 flags (bit 0 bias, bits 8-15 activation). Payload per layer: f64 weights
// row-major (fan_in x fan_out), then f64 biases when present. Dropout is not stored.
void write_network(std::ostream& out, const nn::Network& net);
nn::Network read_network(std::istream& in);
void save_network(const std::filesystem::path& path, const nn::Network& net);
nn::Network load_network(const std::filesystem::path& path);

/// global.bin plus local_<m>.bin for every non-empty local under `dir`.
void save_state(const std::filesystem::path& dir, const FedState& state);

void write_history_csv(std::ostream& out, const std::vector<MetricRow>& history);

}  // namespace lgfed::fed
