#include "lgfed/fed/client.hpp"

#include <algorithm>
#include <numeric>

#include "lgfed/common/error.hpp"
#include "lgfed/data/privacy.hpp"
#include "lgfed/nn/loss.hpp"

namespace lgfed::fed {

ClientUpdateResult client_update(const data::DeviceShard& device, nn::Network& local, const nn::Network& global_copy,
                                 const ClientOptions& options, std::uint64_t seed) {
  data::DeviceContext on_device(device.device_id());
  ClientUpdateResult res;
  res.global = global_copy;
  res.n_train = device.n_train();
  if (res.n_train == 0) {
    res.skipped = true;
    return res;
  }
  if (options.batch_size == 0) throw ArgumentError("batch size must be positive");
  const auto& train = device.train();

  Rng rng(seed);
  nn::OptimizerState local_opt(options.sgd, local.params(), options.round);
  nn::OptimizerState global_opt(options.sgd, res.global.params(), options.round);
  std::vector<std::size_t> order(train.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Matrix xb;
  std::vector<int> yb;
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, order.size() - start);
      xb.resize(static_cast<nn::Index>(count), train.features.cols());
      yb.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        xb.row(static_cast<nn::Index>(i)) = train.features.row(static_cast<nn::Index>(order[start + i]));
        yb[i] = train.labels[order[start + i]];
      }
      const auto lf = nn::forward(local, xb, nn::Mode::train, &rng);
      const auto gf = nn::forward(res.global, lf.output, nn::Mode::train, &rng);
      const auto loss = nn::cross_entropy(gf.output, yb);
      const auto gb = nn::backward(res.global, gf.cache, loss.grad);
      if (options.train_local && !local.empty()) {
        auto lb = nn::backward(local, lf.cache, gb.input_grad);
        if (options.local_hook) options.local_hook(local.params(), lb.grads);
        nn::sgd_step(local, lb.grads, local_opt);
      }
      if (options.train_global && !res.global.empty()) nn::sgd_step(res.global, gb.grads, global_opt);
      loss_sum += loss.loss;
      ++batches;
    }
  }
  res.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
  return res;
}

double dataset_loss(const nn::Network& local, const nn::Network& global, const data::Dataset& data) {
  if (data.empty()) return 0.0;
  return nn::cross_entropy(nn::predict(global, nn::predict(local, data.features)), data.labels).loss;
}

}  // namespace lgfed::fed
