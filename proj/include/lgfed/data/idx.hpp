#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lgfed/data/dataset.hpp"

namespace lgfed::data {

struct Normalization {
  double mean = 0.0;
  double stddev = 1.0;
};

struct IdxLoadOptions {
  Normalization normalization;
  std::size_t max_rows = 0;  // 0 = all rows in the file
  int num_classes = 10;
};

/// Whole file; gzip streams (magic 1f 8b) are inflated transparently.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::span<const std::uint8_t> pixels;  // count * rows * cols, view into the parsed buffer
};

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::span<const std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Pixels scaled to [0,1], then (p - mean) / stddev.
Dataset load_idx_images(const std::filesystem::path& images, const std::filesystem::path& labels,
                        const IdxLoadOptions& options = {});
Dataset decode_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes,
                   const IdxLoadOptions& options = {});

}  // namespace lgfed::data
