#include "lgfed/data/transform.hpp"

#include <cmath>
#include <string>

#include "lgfed/common/error.hpp"

namespace lgfed::data {

Dataset rotate90(const Dataset& data, int times) {
  const auto dim = static_cast<nn::Index>(data.dim());
  const auto side = static_cast<nn::Index>(std::llround(std::sqrt(static_cast<double>(dim))));
  if (side * side != dim) throw ShapeError("feature length " + std::to_string(dim) + " is not a perfect square");
  const int t = ((times % 4) + 4) % 4;
  Dataset out = data;
  if (t == 0) return out;
  Matrix src = data.features;
  for (int k = 0; k < t; ++k) {
    // new(r, c) = old(c, n-1-r)
    for (nn::Index i = 0; i < src.rows(); ++i)
      for (nn::Index r = 0; r < side; ++r)
        for (nn::Index c = 0; c < side; ++c) out.features(i, r * side + c) = src(i, c * side + (side - 1 - r));
    if (k + 1 < t) src = out.features;
  }
  return out;
}

Transform rotation(int times) {
  return [times](const Dataset& d) { return rotate90(d, times); };
}

namespace {

DeviceShard finish(Dataset train, Dataset test, const Transform& transform, std::size_t device_id,
                   std::vector<std::size_t> train_rows, std::vector<std::size_t> test_rows) {
  if (transform) {
    train = transform(train);
    test = transform(test);
  }
  Dataset validation;
  validation.num_classes = train.num_classes;
  validation.features.resize(0, train.features.cols());
  DeviceShard shard(device_id, std::move(train), std::move(validation), std::move(test));
  shard.train_rows = std::move(train_rows);
  shard.test_rows = std::move(test_rows);
  return shard;
}

}  // namespace

DeviceShard make_new_device(const Dataset& pool, std::size_t n_train, std::size_t n_test,
                            const Transform& transform, std::uint64_t seed, std::size_t device_id) {
  Rng rng = make_rng({seed, 0xde71ce});
  auto rows = sample_rows(pool.rows(), n_train + n_test, rng);
  std::vector<std::size_t> tr(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> te(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  Dataset train = subset(pool, tr), test = subset(pool, te);
  return finish(std::move(train), std::move(test), transform, device_id, std::move(tr), std::move(te));
}

DeviceShard make_new_device(const Dataset& train_pool, const Dataset& test_pool, std::size_t n_train,
                            std::size_t n_test, const Transform& transform, std::uint64_t seed,
                            std::size_t device_id) {
  Rng rng = make_rng({seed, 0xde71ce, 1});
  auto tr = sample_rows(train_pool.rows(), n_train, rng);
  auto te = sample_rows(test_pool.rows(), n_test, rng);
  Dataset train = subset(train_pool, tr), test = subset(test_pool, te);
  return finish(std::move(train), std::move(test), transform, device_id, std::move(tr), std::move(te));
}

}  // namespace lgfed::data
