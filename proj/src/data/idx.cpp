#include "lgfed/data/idx.hpp"

#include <zlib.h>

#include <fstream>
#include <string>

#include "lgfed/common/error.hpp"

namespace lgfed::data {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t offset) {
  if (b.size() < offset + 4) throw FormatError("truncated header", b.size());
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

std::vector<std::uint8_t> inflate_gzip(const std::vector<std::uint8_t>& compressed) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("zlib init failed");
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  zs.next_in = const_cast<Bytef*>(compressed.data());
  zs.avail_in = static_cast<uInt>(compressed.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof chunk;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const auto consumed = zs.total_in;
      inflateEnd(&zs);
      throw FormatError("corrupt gzip stream", consumed);
    }
    out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      const auto consumed = zs.total_in;
      inflateEnd(&zs);
      throw FormatError("truncated gzip stream", consumed);
    }
  }
  inflateEnd(&zs);
  return out;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return inflate_gzip(bytes);
  return bytes;
}

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  const auto magic = read_be32(bytes, 0);
  if (magic != kImageMagic) throw FormatError("bad image magic", 0);
  IdxImages img;
  img.count = read_be32(bytes, 4);
  img.rows = read_be32(bytes, 8);
  img.cols = read_be32(bytes, 12);
  const std::size_t need = img.count * img.rows * img.cols;
  if (bytes.size() - 16 < need)
    throw FormatError("image payload shorter than header count " + std::to_string(img.count), bytes.size());
  if (bytes.size() - 16 > need) throw FormatError("trailing bytes after image payload", 16 + need);
  img.pixels = bytes.subspan(16, need);
  return img;
}

std::span<const std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  const auto magic = read_be32(bytes, 0);
  if (magic != kLabelMagic) throw FormatError("bad label magic", 0);
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() - 8 < count)
    throw FormatError("label payload shorter than header count " + std::to_string(count), bytes.size());
  if (bytes.size() - 8 > count) throw FormatError("trailing bytes after label payload", 8 + count);
  return bytes.subspan(8, count);
}

Dataset decode_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes,
                   const IdxLoadOptions& options) {
  const auto img = parse_idx_images(image_bytes);
  const auto lab = parse_idx_labels(label_bytes);
  if (lab.size() != img.count)
    throw FormatError("label count " + std::to_string(lab.size()) + " != image count " + std::to_string(img.count), 4);
  if (!(options.normalization.stddev > 0.0)) throw ConfigError("normalization stddev must be positive");

  const std::size_t n = options.max_rows == 0 ? img.count : std::min(options.max_rows, img.count);
  const std::size_t dim = img.rows * img.cols;
  Dataset out;
  out.num_classes = options.num_classes;
  out.features.resize(static_cast<nn::Index>(n), static_cast<nn::Index>(dim));
  const double mean = options.normalization.mean, inv_std = 1.0 / options.normalization.stddev;
  double* dst = out.features.data();
  for (std::size_t k = 0; k < n * dim; ++k) dst[k] = (img.pixels[k] / 255.0 - mean) * inv_std;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = lab[i];
    if (lab[i] >= options.num_classes) throw FormatError("label exceeds class count", 8 + i);
  }
  return out;
}

Dataset load_idx_images(const std::filesystem::path& images, const std::filesystem::path& labels,
                        const IdxLoadOptions& options) {
  const auto ib = read_file_bytes(images);
  const auto lb = read_file_bytes(labels);
  return decode_idx(ib, lb, options);
}

}  // namespace lgfed::data
