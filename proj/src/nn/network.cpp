#include "lgfed/nn/network.hpp"

#include <cmath>
#include <string>

#include "lgfed/common/error.hpp"

namespace lgfed::nn {

ParamLayer::ParamLayer(Index fan_in, Index fan_out, bool bias)
    : weights(Matrix::Zero(fan_in, fan_out)), biases(Vector::Zero(fan_out)), bias_enabled(bias) {}

std::size_t ParamLayer::param_count() const noexcept {
  return static_cast<std::size_t>(weights.size()) +
         (bias_enabled ? static_cast<std::size_t>(biases.size()) : 0);
}

bool ParamLayer::all_finite() const { return weights.allFinite() && biases.allFinite(); }

ParamSet zeros_like(const ParamSet& like) {
  ParamSet out;
  out.reserve(like.size());
  for (const auto& l : like) out.emplace_back(l.fan_in(), l.fan_out(), l.bias_enabled);
  return out;
}

bool same_shape(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].fan_in() != b[i].fan_in() || a[i].fan_out() != b[i].fan_out() ||
        a[i].bias_enabled != b[i].bias_enabled)
      return false;
  }
  return true;
}

std::size_t param_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& l : params) n += l.param_count();
  return n;
}

void axpy(double a, const ParamSet& x, ParamSet& y) {
  if (!same_shape(x, y)) throw ShapeError("axpy operands differ in shape");
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i].weights.noalias() += a * x[i].weights;
    if (y[i].bias_enabled) y[i].biases.noalias() += a * x[i].biases;
  }
}

void scale(double a, ParamSet& x) {
  for (auto& l : x) {
    l.weights *= a;
    l.biases *= a;
  }
}

std::vector<double> flatten(const ParamSet& params) {
  std::vector<double> flat;
  flat.reserve(param_count(params));
  for (const auto& l : params) {
    flat.insert(flat.end(), l.weights.data(), l.weights.data() + l.weights.size());
    if (l.bias_enabled) flat.insert(flat.end(), l.biases.data(), l.biases.data() + l.biases.size());
  }
  return flat;
}

void unflatten(std::span<const double> flat, ParamSet& params) {
  if (flat.size() != param_count(params))
    throw ShapeError("flat buffer has " + std::to_string(flat.size()) + " entries, expected " +
                     std::to_string(param_count(params)));
  std::size_t at = 0;
  for (auto& l : params) {
    std::copy_n(flat.data() + at, l.weights.size(), l.weights.data());
    at += static_cast<std::size_t>(l.weights.size());
    if (l.bias_enabled) {
      std::copy_n(flat.data() + at, l.biases.size(), l.biases.data());
      at += static_cast<std::size_t>(l.biases.size());
    }
  }
}

Network::Network(ParamSet layers, std::vector<Activation> activations,
                 std::vector<double> dropout_rates)
    : layers_(std::move(layers)), activations_(std::move(activations)), dropout_(std::move(dropout_rates)) {
  validate();
}

void Network::validate() const {
  if (activations_.size() != layers_.size() || dropout_.size() != layers_.size())
    throw ShapeError("activation/dropout lists must have one entry per layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.biases.size() != l.fan_out())
      throw ShapeError("layer " + std::to_string(i) + " bias length does not match fan_out");
    if (i > 0 && layers_[i - 1].fan_out() != l.fan_in())
      throw ShapeError("layer " + std::to_string(i) + " fan_in " + std::to_string(l.fan_in()) +
                       " does not match previous fan_out " + std::to_string(layers_[i - 1].fan_out()));
    if (!(dropout_[i] >= 0.0 && dropout_[i] < 1.0))
      throw ShapeError("dropout rate must lie in [0, 1)");
  }
}

Network Network::mlp(std::span<const Index> widths, Rng& rng, const MlpOptions& options) {
  if (widths.size() < 2) throw ShapeError("an MLP needs at least input and output widths");
  ParamSet layers;
  std::vector<Activation> acts;
  std::vector<double> drops;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    ParamLayer layer(widths[i], widths[i + 1], options.bias);
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[i]));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Index k = 0; k < layer.weights.size(); ++k) layer.weights.data()[k] = u(rng);
    if (options.bias)
      for (Index k = 0; k < layer.biases.size(); ++k) layer.biases[k] = u(rng);
    const bool last = i + 2 == widths.size();
    layers.push_back(std::move(layer));
    acts.push_back(last ? options.output : options.hidden);
    drops.push_back(last ? 0.0 : options.hidden_dropout);
  }
  return Network(std::move(layers), std::move(acts), std::move(drops));
}

Index Network::input_dim() const {
  if (layers_.empty()) throw ShapeError("an empty network has no fixed input dimension");
  return layers_.front().fan_in();
}

Index Network::output_dim() const {
  if (layers_.empty()) throw ShapeError("an empty network has no fixed output dimension");
  return layers_.back().fan_out();
}

Network Network::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > layers_.size()) throw ShapeError("slice bounds out of range");
  using Diff = std::ptrdiff_t;
  return Network(ParamSet(layers_.begin() + Diff(begin), layers_.begin() + Diff(end)),
                 std::vector<Activation>(activations_.begin() + Diff(begin), activations_.begin() + Diff(end)),
                 std::vector<double>(dropout_.begin() + Diff(begin), dropout_.begin() + Diff(end)));
}

Network Network::stack(const Network& bottom, const Network& top) {
  ParamSet layers = bottom.layers_;
  layers.insert(layers.end(), top.layers_.begin(), top.layers_.end());
  auto acts = bottom.activations_;
  acts.insert(acts.end(), top.activations_.begin(), top.activations_.end());
  auto drops = bottom.dropout_;
  drops.insert(drops.end(), top.dropout_.begin(), top.dropout_.end());
  return Network(std::move(layers), std::move(acts), std::move(drops));
}

namespace {

std::vector<std::pair<Index, Index>> signature_of(const Network& net) {
  std::vector<std::pair<Index, Index>> sig;
  sig.reserve(net.depth());
  for (const auto& l : net.params()) sig.emplace_back(l.fan_in(), l.fan_out());
  return sig;
}

}  // namespace

ForwardResult forward(const Network& net, const Matrix& batch, Mode mode, Rng* rng) {
  ForwardResult result;
  auto& cache = result.cache;
  cache.signature = signature_of(net);
  cache.net_version = net.version();
  cache.batch_rows = batch.rows();
  if (net.empty()) {
    result.output = batch;
    return result;
  }
  if (batch.cols() != net.input_dim())
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                     std::to_string(net.input_dim()));

  const std::size_t depth = net.depth();
  cache.inputs.reserve(depth);
  cache.pre_activations.reserve(depth);
  cache.dropout_masks.resize(depth);

  Matrix current = batch;
  for (std::size_t i = 0; i < depth; ++i) {
    const auto& layer = net.params()[i];
    Matrix z = current * layer.weights;
    if (layer.bias_enabled) z.rowwise() += layer.biases.transpose();
    cache.inputs.push_back(std::move(current));
    Matrix a = net.activations()[i] == Activation::relu ? Matrix(z.cwiseMax(0.0)) : z;
    cache.pre_activations.push_back(std::move(z));

    const double p = net.dropout_rates()[i];
    if (mode == Mode::train && p > 0.0) {
      if (rng == nullptr) throw ShapeError("train-mode dropout needs a random stream");
      std::bernoulli_distribution keep(1.0 - p);
      Matrix mask(a.rows(), a.cols());
      const double kept = 1.0 / (1.0 - p);
      for (Index k = 0; k < mask.size(); ++k) mask.data()[k] = keep(*rng) ? kept : 0.0;
      a = a.cwiseProduct(mask);
      cache.dropout_masks[i] = std::move(mask);
    }
    current = std::move(a);
  }
  result.output = std::move(current);
  return result;
}

Matrix predict(const Network& net, const Matrix& batch) {
  if (net.empty()) return batch;
  if (batch.cols() != net.input_dim())
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                     std::to_string(net.input_dim()));
  Matrix current = batch;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const auto& layer = net.params()[i];
    Matrix z = current * layer.weights;
    if (layer.bias_enabled) z.rowwise() += layer.biases.transpose();
    if (net.activations()[i] == Activation::relu) z = z.cwiseMax(0.0);
    current = std::move(z);
  }
  return current;
}

BackwardResult backward(const Network& net, const ForwardCache& cache, const Matrix& output_grad) {
  if (cache.net_version != net.version() || cache.signature != signature_of(net))
    throw CacheError("forward cache does not belong to this network state");
  if (output_grad.rows() != cache.batch_rows)
    throw CacheError("gradient has " + std::to_string(output_grad.rows()) + " rows, cache holds " +
                     std::to_string(cache.batch_rows));

  BackwardResult result;
  if (net.empty()) {
    result.input_grad = output_grad;
    return result;
  }
  if (cache.inputs.size() != net.depth()) throw CacheError("cache depth mismatch");
  if (output_grad.cols() != net.output_dim()) throw ShapeError("output gradient width mismatch");

  result.grads = zeros_like(net.params());
  Matrix grad = output_grad;
  for (std::size_t k = net.depth(); k-- > 0;) {
    const auto& layer = net.params()[k];
    if (cache.dropout_masks[k].size() != 0) grad = grad.cwiseProduct(cache.dropout_masks[k]);
    if (net.activations()[k] == Activation::relu)
      grad = grad.cwiseProduct((cache.pre_activations[k].array() > 0.0).cast<double>().matrix());
    result.grads[k].weights.noalias() = cache.inputs[k].transpose() * grad;
    if (layer.bias_enabled) result.grads[k].biases = grad.colwise().sum().transpose();
    Matrix next = grad * layer.weights.transpose();
    grad = std::move(next);
  }
  result.input_grad = std::move(grad);
  return result;
}

}  // namespace lgfed::nn
