#include "lgfed/data/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "lgfed/common/error.hpp"
#include "lgfed/data/privacy.hpp"

namespace lgfed::data {

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ShapeError("feature rows " + std::to_string(features.rows()) + " != label count " +
                     std::to_string(labels.size()));
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw DataError("label " + std::to_string(y) + " outside [0, num_classes)");
  if (!protected_attr.empty()) {
    if (protected_attr.size() != labels.size()) throw ShapeError("protected attribute length != row count");
    for (int p : protected_attr)
      if (p != 0 && p != 1) throw DataError("protected attribute must be 0 or 1");
  }
}

Dataset subset(const Dataset& source, std::span<const std::size_t> rows) {
  Dataset out;
  out.num_classes = source.num_classes;
  out.features.resize(static_cast<nn::Index>(rows.size()), source.features.cols());
  out.labels.reserve(rows.size());
  if (source.has_protected()) out.protected_attr.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= source.rows()) throw ShapeError("subset row out of range");
    out.features.row(static_cast<nn::Index>(i)) = source.features.row(static_cast<nn::Index>(r));
    out.labels.push_back(source.labels[r]);
    if (source.has_protected()) out.protected_attr.push_back(source.protected_attr[r]);
  }
  return out;
}

std::vector<std::size_t> sample_rows(std::size_t available, std::size_t n, Rng& rng) {
  if (n > available)
    throw CapacityError("requested " + std::to_string(n) + " rows from a pool of " + std::to_string(available));
  std::vector<std::size_t> idx(available);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // partial Fisher-Yates
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, available - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

std::vector<std::size_t> class_histogram(const Dataset& data) {
  std::vector<std::size_t> h(static_cast<std::size_t>(std::max(data.num_classes, 0)), 0);
  for (int y : data.labels) ++h.at(static_cast<std::size_t>(y));
  return h;
}

std::size_t distinct_labels(const Dataset& data) {
  const auto h = class_histogram(data);
  return static_cast<std::size_t>(std::count_if(h.begin(), h.end(), [](std::size_t c) { return c > 0; }));
}

DeviceShard::DeviceShard(std::size_t device_id, Dataset train, Dataset validation, Dataset test)
    : device_id_(device_id), train_(std::move(train)), validation_(std::move(validation)), test_(std::move(test)) {}

const Dataset& DeviceShard::train() const {
  record_shard_read();
  return train_;
}

const Dataset& DeviceShard::validation() const {
  record_shard_read();
  return validation_;
}

const Dataset& DeviceShard::test() const {
  record_shard_read();
  return test_;
}

}  // namespace lgfed::data
