#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lgfed/common/rng.hpp"
#include "lgfed/nn/network.hpp"

namespace lgfed::data {

using nn::Matrix;

/// Rows are samples. `protected_attr` is either empty or one {0,1} entry per row.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> protected_attr;
  int num_classes = 0;

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
  bool empty() const noexcept { return labels.empty(); }
  bool has_protected() const noexcept { return !protected_attr.empty(); }

  /// Throws DataError/ShapeError when an invariant is broken.
  void validate() const;
};

Dataset subset(const Dataset& source, std::span<const std::size_t> rows);
/// Uniform sample of `n` distinct rows; CapacityError when n exceeds the row count.
std::vector<std::size_t> sample_rows(std::size_t available, std::size_t n, Rng& rng);
std::vector<std::size_t> class_histogram(const Dataset& data);
std::size_t distinct_labels(const Dataset& data);

/// One simulated device. Split contents are reachable only through the accessors, which
/// report every access to the privacy audit (see privacy.hpp).
class DeviceShard {
 public:
  DeviceShard() = default;
  DeviceShard(std::size_t device_id, Dataset train, Dataset validation, Dataset test);

  std::size_t device_id() const noexcept { return device_id_; }
  std::size_t n_train() const noexcept { return train_.rows(); }
  std::size_t n_validation() const noexcept { return validation_.rows(); }
  std::size_t n_test() const noexcept { return test_.rows(); }

  const Dataset& train() const;
  const Dataset& validation() const;
  const Dataset& test() const;

  // Source-row provenance, filled by partitioning; metadata only.
  std::vector<std::size_t> train_rows, validation_rows, test_rows;

 private:
  std::size_t device_id_ = 0;
  Dataset train_, validation_, test_;
};

}  // namespace lgfed::data
