#include "lgfed/fed/aggregate.hpp"

#include "lgfed/common/error.hpp"

namespace lgfed::fed {

nn::ParamSet aggregate(const std::vector<Contribution>& contributions, std::vector<double>* weights_out) {
  if (contributions.empty()) throw ProtocolError("aggregation needs at least one contribution");
  double total = 0.0;
  for (const auto& c : contributions) {
    if (c.params == nullptr) throw ProtocolError("null contribution");
    if (!nn::same_shape(*c.params, *contributions.front().params))
      throw ProtocolError("contributions differ in shape");
    total += static_cast<double>(c.n_samples);
  }
  if (total <= 0.0) throw ProtocolError("contributions carry no samples");
  nn::ParamSet out = nn::zeros_like(*contributions.front().params);
  if (weights_out) weights_out->clear();
  for (const auto& c : contributions) {
    const double w = static_cast<double>(c.n_samples) / total;
    nn::axpy(w, *c.params, out);
    if (weights_out) weights_out->push_back(w);
  }
  return out;
}

}  // namespace lgfed::fed
