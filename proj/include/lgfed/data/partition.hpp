#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lgfed/data/dataset.hpp"

namespace lgfed::data {

enum class PartitionMode { iid, shard_noniid };

struct SplitRatios {
  double validation = 0.1;
  double test = 0.1;  // train takes the remainder
};

struct PartitionPlan {
  PartitionMode mode = PartitionMode::shard_noniid;
  std::size_t devices = 100;
  std::size_t classes_per_device = 2;  // shards per device in shard mode
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

struct PartitionResult {
  std::vector<DeviceShard> shards;
  std::vector<std::size_t> dropped;  // source rows assigned to no device
  std::size_t shard_size = 0;        // shard mode only
  std::size_t shard_count = 0;
};

/// Shard mode: rows grouped by label (shuffled within class) and cut into class-pure
/// shards of equal size S, with S the largest size that still yields M*s shards; M*s shards
/// are drawn at random and dealt s per device. Unused rows are dropped and reported.
/// iid mode: shuffled and cut into M equal parts, remainder dropped.
/// Each device's rows are then split train / validation / test.
PartitionResult partition(const Dataset& data, const PartitionPlan& plan);

/// Largest class-pure shard size giving at least `shards` shards, capped at n / shards.
std::size_t class_pure_shard_size(const std::vector<std::size_t>& class_counts, std::size_t shards);

/// JSON audit record: plan, shard size, per-device source rows, dropped rows.
std::string partition_audit_json(const PartitionPlan& plan, const PartitionResult& result);

}  // namespace lgfed::data
