#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "lgfed/data/dataset.hpp"

namespace lgfed::data {

/// Rotates every square image row by 90 degrees counter-clockwise, `times` mod 4 times:
/// the pixel at (r, c) moves to (n-1-c, r).
Dataset rotate90(const Dataset& data, int times = 1);

using Transform = std::function<Dataset(const Dataset&)>;  // empty = identity
Transform rotation(int times);

/// Disjoint train/test rows sampled without replacement from one pool.
DeviceShard make_new_device(const Dataset& pool, std::size_t n_train, std::size_t n_test,
                            const Transform& transform, std::uint64_t seed, std::size_t device_id = 0);
/// Train rows from `train_pool`, test rows from `test_pool`.
DeviceShard make_new_device(const Dataset& train_pool, const Dataset& test_pool, std::size_t n_train,
                            std::size_t n_test, const Transform& transform, std::uint64_t seed,
                            std::size_t device_id = 0);

}  // namespace lgfed::data
