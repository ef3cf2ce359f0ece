#include "lgfed/fed/split_model.hpp"

#include <algorithm>

#include "lgfed/common/error.hpp"

namespace lgfed::fed {

bool FedState::has_locals() const {
  return std::any_of(locals.begin(), locals.end(), [](const Network& n) { return !n.empty(); });
}

SplitModel split(const Network& full, std::size_t k) {
  if (k > full.depth()) throw ArgumentError("split index exceeds network depth");
  return {full.slice(0, k), full.slice(k, full.depth()), k};
}

FedState make_split_state(const Network& full, std::size_t k, std::size_t m) {
  auto parts = split(full, k);
  FedState s;
  s.global = std::move(parts.global_layers);
  s.locals.assign(m, parts.local_layers);
  s.split_index = k;
  return s;
}

Matrix split_predict(const Network& local, const Network& global, const Matrix& x) {
  return nn::predict(global, nn::predict(local, x));
}

}  // namespace lgfed::fed
