#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lgfed/common/rng.hpp"

namespace lgfed::nn {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { identity = 0, relu = 1 };
enum class Mode { train, eval };

/// One dense layer: y = x * weights + biases. `weights` is fan_in x fan_out.
struct ParamLayer {
  Matrix weights;
  Vector biases;
  bool bias_enabled = true;

  ParamLayer() = default;
  ParamLayer(Index fan_in, Index fan_out, bool bias = true);

  Index fan_in() const noexcept { return weights.rows(); }
  Index fan_out() const noexcept { return weights.cols(); }
  std::size_t param_count() const noexcept;
  bool all_finite() const;
};

// Parameter-shaped buffer: gradients, momentum velocity and aggregation inputs all use it.
using ParamSet = std::vector<ParamLayer>;

ParamSet zeros_like(const ParamSet& like);
bool same_shape(const ParamSet& a, const ParamSet& b);
std::size_t param_count(const ParamSet& params);
// y += a * x
void axpy(double a, const ParamSet& x, ParamSet& y);
void scale(double a, ParamSet& x);
std::vector<double> flatten(const ParamSet& params);
void unflatten(std::span<const double> flat, ParamSet& params);

struct MlpOptions {
  Activation hidden = Activation::relu;
  Activation output = Activation::identity;
  double hidden_dropout = 0.0;
  bool bias = true;
};

/// Feed-forward stack of dense layers. A network with zero layers is the identity map,
/// which is what an empty local (FedAvg) or empty global (local-only) segment looks like.
class Network {
 public:
  Network() = default;
  Network(ParamSet layers, std::vector<Activation> activations, std::vector<double> dropout_rates);

  /// `widths` lists every dimension from input to output, e.g. {784, 512, 256, 10}.
  /// Weights and biases are drawn uniformly in +-1/sqrt(fan_in).
  static Network mlp(std::span<const Index> widths, Rng& rng, const MlpOptions& options = {});

  std::size_t depth() const noexcept { return layers_.size(); }
  bool empty() const noexcept { return layers_.empty(); }
  Index input_dim() const;
  Index output_dim() const;
  std::size_t param_count() const noexcept { return nn::param_count(layers_); }

  const ParamSet& params() const noexcept { return layers_; }
  // Mutable access bumps the version so stale forward caches are rejected by backward().
  ParamSet& mutable_params() noexcept {
    ++version_;
    return layers_;
  }
  const std::vector<Activation>& activations() const noexcept { return activations_; }
  const std::vector<double>& dropout_rates() const noexcept { return dropout_; }
  std::uint64_t version() const noexcept { return version_; }

  /// Layers [begin, end) as an independent network.
  Network slice(std::size_t begin, std::size_t end) const;
  /// `bottom` followed by `top`.
  static Network stack(const Network& bottom, const Network& top);

 private:
  void validate() const;

  ParamSet layers_;
  std::vector<Activation> activations_;
  std::vector<double> dropout_;
  std::uint64_t version_ = 0;
};

struct ForwardCache {
  std::vector<Matrix> inputs;           // input seen by layer i
  std::vector<Matrix> pre_activations;  // x_i * W_i + b_i
  std::vector<Matrix> dropout_masks;    // scaled keep-masks; empty matrix when no dropout
  std::vector<std::pair<Index, Index>> signature;
  std::uint64_t net_version = 0;
  Index batch_rows = 0;
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

/// Forward pass. In train mode `rng` drives inverted dropout and must be non-null when any
/// layer has a positive rate; eval mode never touches it.
ForwardResult forward(const Network& net, const Matrix& batch, Mode mode, Rng* rng = nullptr);

/// Eval-mode output without keeping a cache.
Matrix predict(const Network& net, const Matrix& batch);

struct BackwardResult {
  ParamSet grads;
  Matrix input_grad;
};

/// Chain rule through a cached forward pass. `output_grad` is dLoss/dOutput for the batch
/// (already scaled for a mean loss), so the returned gradients are those of the mean loss.
BackwardResult backward(const Network& net, const ForwardCache& cache, const Matrix& output_grad);

}  // namespace lgfed::nn
