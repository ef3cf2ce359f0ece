#include "lgfed/fair/planted.hpp"

#include <random>

#include "lgfed/common/rng.hpp"

namespace lgfed::fair {

data::Dataset planted_dataset(const PlantedConfig& config, std::uint64_t seed) {
  const auto dz = static_cast<nn::Index>(config.signal_dims);
  const auto dw = static_cast<nn::Index>(config.protected_dims);
  Rng dir_rng = make_rng({seed, 0xd1});
  std::normal_distribution<double> g(0.0, 1.0);
  nn::Vector u(dz);
  for (nn::Index j = 0; j < dz; ++j) u[j] = g(dir_rng);
  if (dz > 0) u /= u.norm();

  Rng rng = make_rng({seed, 0xda});
  std::bernoulli_distribution coin(0.5);
  data::Dataset d;
  d.num_classes = 2;
  d.features.resize(static_cast<nn::Index>(config.rows), dz + dw);
  for (std::size_t i = 0; i < config.rows; ++i) {
    const auto r = static_cast<nn::Index>(i);
    const int p = coin(rng) ? 1 : 0;
    const double sign = 2.0 * p - 1.0;
    double score = config.label_shift * sign + config.label_noise * g(rng);
    for (nn::Index j = 0; j < dz; ++j) {
      d.features(r, j) = g(rng);
      score += u[j] * d.features(r, j);
    }
    for (nn::Index j = 0; j < dw; ++j) d.features(r, dz + j) = config.gamma * sign + g(rng);
    d.labels.push_back(score > 0.0 ? 1 : 0);
    d.protected_attr.push_back(p);
  }
  return d;
}

}  // namespace lgfed::fair
