#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lgfed/data/dataset.hpp"
#include "lgfed/fed/evaluate.hpp"
#include "lgfed/fed/ledger.hpp"
#include "lgfed/fed/split_model.hpp"
#include "lgfed/nn/optimizer.hpp"

namespace lgfed::fed {

struct FederationConfig {
  double participation = 0.1;  // C
  std::size_t local_epochs = 1;
  std::size_t batch_size = 10;
  std::size_t rounds_phase1 = 0;  // FedAvg rounds (LG phase 1); FedAvg/local/MTL run both budgets
  std::size_t rounds_phase2 = 0;
  std::optional<double> goal_accuracy;  // mean validation accuracy ending phase 1 early
  nn::SgdConfig sgd;
  std::uint64_t seed = 0;
  std::size_t split_index = 0;
  std::size_t threads = 1;
  std::size_t eval_every = 0;  // 0: evaluate after the last round only
  NewTestMode new_test_mode = NewTestMode::logit_ensemble;

  std::size_t total_rounds() const noexcept { return rounds_phase1 + rounds_phase2; }
};

struct MetricRow {
  std::size_t round = 0;  // 1-based count of completed rounds
  int phase = 1;
  double local_test_acc = 0.0;
  double new_test_acc = -1.0;  // negative when no held-out set was given
  std::uint64_t params_communicated = 0;  // cumulative
};

struct RoundResult {
  std::size_t round = 0;  // 0-based
  int phase = 1;
  std::vector<std::size_t> sampled;
  std::vector<double> train_loss;   // aligned with `sampled`
  std::vector<double> weights;      // aggregation weights, sum to 1 (empty without aggregation)
  const Network* global = nullptr;  // after aggregation
  const MetricRow* metrics = nullptr;
};

struct RunHooks {
  const data::Dataset* new_test = nullptr;
  std::function<void(const RoundResult&)> on_round;
};

struct RunResult {
  FedState state;
  CommLedger ledger;
  std::vector<MetricRow> history;
  std::size_t switch_round = 0;  // rounds spent in phase 1
  bool goal_reached = false;
  std::vector<std::string> warnings;
};

/// Fresh MLP from the config seed.
Network initial_model(std::span<const nn::Index> widths, std::uint64_t seed, const nn::MlpOptions& options = {});

/// Clients sampled in `round`: max(floor(C M), 1) distinct devices, ascending.
std::vector<std::size_t> sample_clients(std::size_t devices, double participation, std::uint64_t seed,
                                        std::size_t round);
std::uint64_t client_seed(std::uint64_t seed, std::size_t round, std::size_t device);

RunResult run_fedavg(const std::vector<data::DeviceShard>& shards, const Network& init, const FederationConfig& config,
                     const RunHooks& hooks = {});
RunResult run_lg_fedavg(const std::vector<data::DeviceShard>& shards, const Network& init,
                        const FederationConfig& config, const RunHooks& hooks = {});
RunResult run_local_only(const std::vector<data::DeviceShard>& shards, const Network& init,
                         const FederationConfig& config, const RunHooks& hooks = {});
/// Local-only training with the gradient of lambda1 tr(W Omega W^T) + lambda2 |W|_F^2,
/// Omega = (I - 11^T/M)^2, added to every device step.
RunResult run_mtl(const std::vector<data::DeviceShard>& shards, const Network& init, const FederationConfig& config,
                  double lambda1, double lambda2, const RunHooks& hooks = {});

/// tr(W Omega W^T) for columns w_m (flattened device parameters).
double mtl_trace(const std::vector<std::vector<double>>& columns);

}  // namespace lgfed::fed
