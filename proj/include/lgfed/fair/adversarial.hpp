#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lgfed/data/dataset.hpp"
#include "lgfed/fed/client.hpp"
#include "lgfed/nn/network.hpp"
#include "lgfed/nn/optimizer.hpp"

namespace lgfed::fair {

using nn::Matrix;
using nn::Network;

struct AdversarialUpdate {
  Network global;  // updated global copy
  double predictor_loss = 0.0;
  double adversary_loss = 0.0;
  std::size_t n_train = 0;
};

/// Per batch: (1) local descends grad(L^g - lambda L^a); (2) global copy descends grad L^g;
/// (3) the adversary, on representations recomputed with the updated local, descends its
/// own cross-entropy. Steps (1)-(2) draw dropout from the same stream as client_update,
/// so lambda = 0 reproduces client_update exactly; the adversary uses a separate stream.
AdversarialUpdate adversarial_client_update(const data::DeviceShard& device, Network& local,
                                            const Network& global_copy, Network& adversary, double lambda,
                                            const fed::ClientOptions& options, std::uint64_t seed,
                                            std::size_t adversary_steps = 1);

/// Eval-mode gradient of L^g - lambda L^a with respect to the local parameters.
nn::ParamSet composite_local_gradient(const Network& local, const Network& global, const Network& adversary,
                                      const Matrix& x, std::span<const int> labels,
                                      std::span<const int> protected_attr, double lambda);
double composite_objective(const Network& local, const Network& global, const Network& adversary, const Matrix& x,
                           std::span<const int> labels, std::span<const int> protected_attr, double lambda);

/// Trains `adversary` on frozen representations local(x) -> p for `epochs`.
double train_adversary(const data::Dataset& data, const Network& local, Network& adversary,
                       const fed::ClientOptions& options, std::uint64_t seed);

enum class FairVariant {
  fedavg,     // shared model and shared adversary, both federated, no penalty
  lg,         // per-device local models and adversaries, lambda forced to 0
  lg_adv,     // per-device local models trained against their adversaries
};

FairVariant parse_variant(const std::string& name);
std::string variant_name(FairVariant v);

struct FairConfig {
  std::vector<nn::Index> local_widths{93, 32, 32};  // input -> representation
  std::vector<nn::Index> global_widths{32, 32, 2};
  std::vector<nn::Index> adversary_widths{32, 32, 2};
  double dropout = 0.2;
  double lambda = 1.0;
  std::size_t adversary_steps = 1;  // adversary sub-steps per batch
  std::size_t rounds = 10;
  std::size_t local_epochs = 1;
  std::size_t pretrain_epochs = 10;
  std::size_t probe_epochs = 20;
  double participation = 1.0;
  std::size_t batch_size = 32;
  nn::SgdConfig sgd{0.1, 0.5, 0.0};
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct FairnessReport {
  FairVariant variant = FairVariant::lg_adv;
  double lambda = 0.0;
  double classifier_accuracy = 0.0;
  double classifier_auc = 0.0;
  double adversary_auc = 0.0;
  double probe_auc = 0.0;
  std::uint64_t params_communicated = 0;
};

struct FairRun {
  FairnessReport report;
  std::vector<Network> locals;       // one per device (fedavg: identical copies)
  Network global;
  std::vector<Network> adversaries;  // one per device (fedavg: identical copies)
};

FairRun run_fair_fed(const std::vector<data::DeviceShard>& shards, const FairConfig& config, FairVariant variant);

/// Fresh adversary-architecture probe per device, trained on frozen train-split
/// representations; test AUC averaged over devices, weighted by test rows.
double post_fit_probe(const std::vector<Network>& locals, const std::vector<data::DeviceShard>& shards,
                      const FairConfig& config, std::uint64_t seed);

}  // namespace lgfed::fair
