#include "lgfed/fed/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <string>

#include "lgfed/common/error.hpp"

namespace lgfed::fed {

namespace {

constexpr char kMagic[4] = {'L', 'G', 'F', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated model header", static_cast<std::uint64_t>(in.gcount()));
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("truncated model payload", static_cast<std::uint64_t>(std::max<std::streamoff>(in.tellg(), 0)));
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{b[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_network(std::ostream& out, const nn::Network& net) {
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(net.depth()));
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const auto& l = net.params()[i];
    put_u32(out, static_cast<std::uint32_t>(l.fan_in()));
    put_u32(out, static_cast<std::uint32_t>(l.fan_out()));
    put_u32(out, (l.bias_enabled ? 1u : 0u) | (static_cast<std::uint32_t>(net.activations()[i]) << 8));
  }
  for (const auto& l : net.params()) {
    for (nn::Index k = 0; k < l.weights.size(); ++k) put_f64(out, l.weights.data()[k]);
    if (l.bias_enabled)
      for (nn::Index k = 0; k < l.biases.size(); ++k) put_f64(out, l.biases[k]);
  }
  if (!out) throw IoError("failed writing model");
}

nn::Network read_network(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad model magic", 0);
  if (get_u32(in) != kVersion) throw FormatError("unsupported model version", 4);
  const std::uint32_t depth = get_u32(in);
  nn::ParamSet layers;
  std::vector<nn::Activation> acts;
  for (std::uint32_t i = 0; i < depth; ++i) {
    const auto fan_in = get_u32(in), fan_out = get_u32(in), flags = get_u32(in);
    const auto act = (flags >> 8) & 0xff;
    if (act > 1) throw FormatError("unknown activation code", 12 + 12 * i + 8);
    layers.emplace_back(fan_in, fan_out, (flags & 1u) != 0);
    acts.push_back(static_cast<nn::Activation>(act));
  }
  for (auto& l : layers) {
    for (nn::Index k = 0; k < l.weights.size(); ++k) l.weights.data()[k] = get_f64(in);
    if (l.bias_enabled)
      for (nn::Index k = 0; k < l.biases.size(); ++k) l.biases[k] = get_f64(in);
  }
  return nn::Network(std::move(layers), std::move(acts), std::vector<double>(depth, 0.0));
}

void save_network(const std::filesystem::path& path, const nn::Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_network(out, net);
}

nn::Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_network(in);
}

void save_state(const std::filesystem::path& dir, const FedState& state) {
  std::filesystem::create_directories(dir);
  save_network(dir / "global.bin", state.global);
  for (std::size_t m = 0; m < state.locals.size(); ++m) {
    if (state.locals[m].empty()) continue;
    char name[32];
    std::snprintf(name, sizeof name, "local_%03zu.bin", m);
    save_network(dir / name, state.locals[m]);
  }
}

void write_history_csv(std::ostream& out, const std::vector<MetricRow>& history) {
  out << "round,phase,local_test_acc,new_test_acc,params_communicated\n";
  char line[160];
  for (const auto& r : history) {
    if (r.new_test_acc < 0)
      std::snprintf(line, sizeof line, "%zu,%d,%.6f,,%llu\n", r.round, r.phase, r.local_test_acc,
                    static_cast<unsigned long long>(r.params_communicated));
    else
      std::snprintf(line, sizeof line, "%zu,%d,%.6f,%.6f,%llu\n", r.round, r.phase, r.local_test_acc, r.new_test_acc,
                    static_cast<unsigned long long>(r.params_communicated));
    out << line;
  }
}

}  // namespace lgfed::fed
