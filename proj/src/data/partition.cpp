#include "lgfed/data/partition.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <numeric>
#include <string>

#include "lgfed/common/error.hpp"

namespace lgfed::data {

namespace {

constexpr std::uint64_t kClassStream = 0xc1a55;
constexpr std::uint64_t kShardStream = 0x5a4d;
constexpr std::uint64_t kSplitStream = 0x5b117;
constexpr std::uint64_t kIidStream = 0x11d;

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

DeviceShard split_device(const Dataset& data, std::vector<std::size_t> rows, std::size_t device,
                         const PartitionPlan& plan) {
  Rng rng = make_rng({plan.seed, kSplitStream, device});
  shuffle(rows, rng);
  const std::size_t n = rows.size();
  const auto n_val = static_cast<std::size_t>(static_cast<double>(n) * plan.ratios.validation);
  const auto n_test = static_cast<std::size_t>(static_cast<double>(n) * plan.ratios.test);
  if (n_val + n_test >= n)
    throw CapacityError("device " + std::to_string(device) + " would have no training rows");
  const std::size_t n_train = n - n_val - n_test;
  DeviceShard shard(device, Dataset{}, Dataset{}, Dataset{});
  shard.train_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
  shard.validation_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_train),
                               rows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  shard.test_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), rows.end());
  DeviceShard out(device, subset(data, shard.train_rows), subset(data, shard.validation_rows),
                  subset(data, shard.test_rows));
  out.train_rows = std::move(shard.train_rows);
  out.validation_rows = std::move(shard.validation_rows);
  out.test_rows = std::move(shard.test_rows);
  return out;
}

}  // namespace

std::size_t class_pure_shard_size(const std::vector<std::size_t>& class_counts, std::size_t shards) {
  if (shards == 0) throw ArgumentError("shard count must be positive");
  const std::size_t n = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
  for (std::size_t s = n / shards; s >= 1; --s) {
    std::size_t available = 0;
    for (auto c : class_counts) available += c / s;
    if (available >= shards) return s;
  }
  throw CapacityError("cannot cut " + std::to_string(shards) + " class-pure shards from " + std::to_string(n) +
                      " rows");
}

PartitionResult partition(const Dataset& data, const PartitionPlan& plan) {
  data.validate();
  if (plan.devices == 0) throw ArgumentError("device count must be positive");
  if (plan.ratios.validation < 0 || plan.ratios.test < 0 || plan.ratios.validation + plan.ratios.test >= 1)
    throw ArgumentError("split ratios must be nonnegative and leave room for training rows");
  const std::size_t n = data.rows();
  PartitionResult result;
  std::vector<std::vector<std::size_t>> device_rows(plan.devices);
  std::vector<bool> used(n, false);

  if (plan.mode == PartitionMode::iid) {
    const std::size_t per = n / plan.devices;
    if (per == 0) throw CapacityError("fewer rows than devices");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng({plan.seed, kIidStream});
    shuffle(order, rng);
    for (std::size_t m = 0; m < plan.devices; ++m)
      device_rows[m].assign(order.begin() + static_cast<std::ptrdiff_t>(m * per),
                            order.begin() + static_cast<std::ptrdiff_t>((m + 1) * per));
  } else {
    if (plan.classes_per_device == 0) throw ArgumentError("classes_per_device must be positive");
    const std::size_t want = plan.devices * plan.classes_per_device;
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
    for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    std::vector<std::size_t> counts;
    for (auto& rows : by_class) counts.push_back(rows.size());
    const std::size_t s = class_pure_shard_size(counts, want);
    result.shard_size = s;
    std::vector<std::vector<std::size_t>> shards;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      Rng rng = make_rng({plan.seed, kClassStream, c});
      shuffle(by_class[c], rng);
      for (std::size_t k = 0; k + s <= by_class[c].size(); k += s)
        shards.emplace_back(by_class[c].begin() + static_cast<std::ptrdiff_t>(k),
                            by_class[c].begin() + static_cast<std::ptrdiff_t>(k + s));
    }
    Rng rng = make_rng({plan.seed, kShardStream});
    shuffle(shards, rng);
    result.shard_count = want;
    for (std::size_t k = 0; k < want; ++k) {
      auto& dst = device_rows[k / plan.classes_per_device];
      dst.insert(dst.end(), shards[k].begin(), shards[k].end());
    }
  }

  for (std::size_t m = 0; m < plan.devices; ++m) {
    for (auto r : device_rows[m]) used[r] = true;
    result.shards.push_back(split_device(data, std::move(device_rows[m]), m, plan));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!used[i]) result.dropped.push_back(i);
  return result;
}

std::string partition_audit_json(const PartitionPlan& plan, const PartitionResult& result) {
  nlohmann::json j;
  j["mode"] = plan.mode == PartitionMode::iid ? "iid" : "shard_noniid";
  j["devices"] = plan.devices;
  j["classes_per_device"] = plan.classes_per_device;
  j["seed"] = plan.seed;
  j["validation_ratio"] = plan.ratios.validation;
  j["test_ratio"] = plan.ratios.test;
  j["shard_size"] = result.shard_size;
  j["shard_count"] = result.shard_count;
  j["dropped"] = result.dropped;
  auto& devs = j["device_rows"] = nlohmann::json::array();
  for (const auto& s : result.shards)
    devs.push_back({{"device", s.device_id()},
                    {"train", s.train_rows},
                    {"validation", s.validation_rows},
                    {"test", s.test_rows}});
  return j.dump();
}

}  // namespace lgfed::data
