#include "lgfed/fed/evaluate.hpp"

#include "lgfed/common/error.hpp"
#include "lgfed/data/privacy.hpp"
#include "lgfed/nn/loss.hpp"

namespace lgfed::fed {

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size()) throw ShapeError("prediction and label counts differ");
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

DeviceAccuracy evaluate_local_test(const FedState& state, const std::vector<data::DeviceShard>& shards,
                                   Split split) {
  if (state.locals.size() != shards.size()) throw ProtocolError("state and shard counts differ");
  DeviceAccuracy out;
  double hits = 0.0;
  std::size_t total = 0;
  for (std::size_t m = 0; m < shards.size(); ++m) {
    data::DeviceContext on_device(shards[m].device_id());
    const auto& d = split == Split::test ? shards[m].test() : shards[m].validation();
    double acc = 0.0;
    if (!d.empty()) acc = accuracy(nn::argmax_rows(split_predict(state.locals[m], state.global, d.features)), d.labels);
    out.per_device.push_back(acc);
    out.counts.push_back(d.rows());
    hits += acc * static_cast<double>(d.rows());
    total += d.rows();
  }
  out.mean = total ? hits / static_cast<double>(total) : 0.0;
  return out;
}

Matrix ensemble_logits(const FedState& state, const Matrix& x, NewTestMode mode) {
  if (state.locals.empty() || !state.has_locals()) return nn::predict(state.global, x);
  if (mode == NewTestMode::weight_average) {
    Network avg = state.locals.front();
    auto& p = avg.mutable_params();
    nn::scale(0.0, p);
    const double w = 1.0 / static_cast<double>(state.locals.size());
    for (const auto& l : state.locals) nn::axpy(w, l.params(), p);
    return split_predict(avg, state.global, x);
  }
  Matrix sum = split_predict(state.locals.front(), state.global, x);
  for (std::size_t m = 1; m < state.locals.size(); ++m) sum += split_predict(state.locals[m], state.global, x);
  return sum / static_cast<double>(state.locals.size());
}

double evaluate_new_test(const FedState& state, const data::Dataset& held_out, NewTestMode mode) {
  if (held_out.empty()) return 0.0;
  return accuracy(nn::argmax_rows(ensemble_logits(state, held_out.features, mode)), held_out.labels);
}

}  // namespace lgfed::fed
