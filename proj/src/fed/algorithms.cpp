#include "lgfed/fed/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lgfed/common/error.hpp"
#include "lgfed/common/parallel.hpp"
#include "lgfed/common/rng.hpp"
#include "lgfed/fed/aggregate.hpp"
#include "lgfed/fed/client.hpp"

namespace lgfed::fed {

namespace {

constexpr std::uint64_t kSampleStream = 0x5a3b1e;
constexpr std::uint64_t kClientStream = 0xc11e47;
constexpr std::uint64_t kInitStream = 0x1417;

enum class Kind { federated, isolated };

struct Loop {
  const std::vector<data::DeviceShard>& shards;
  const FederationConfig& config;
  const RunHooks& hooks;
  RunResult& result;

  ClientOptions client_options(std::size_t round) const {
    ClientOptions o;
    o.epochs = config.local_epochs;
    o.batch_size = config.batch_size;
    o.sgd = config.sgd;
    o.round = round;
    return o;
  }

  bool evaluate_now(std::size_t round, std::size_t last_round) const {
    if (round + 1 == last_round) return true;
    return config.eval_every > 0 && (round + 1) % config.eval_every == 0;
  }

  void record_metrics(std::size_t completed, int phase, RoundResult& rr) {
    MetricRow row;
    row.round = completed;
    row.phase = phase;
    row.local_test_acc = evaluate_local_test(result.state, shards).mean;
    if (hooks.new_test) row.new_test_acc = evaluate_new_test(result.state, *hooks.new_test, config.new_test_mode);
    row.params_communicated = result.ledger.total();
    result.history.push_back(row);
    rr.metrics = &result.history.back();
  }

  void federated_round(std::size_t round, int phase, std::size_t last_round) {
    auto& state = result.state;
    const std::size_t m_count = shards.size();
    RoundResult rr;
    rr.round = round;
    rr.phase = phase;
    rr.sampled = sample_clients(m_count, config.participation, config.seed, round);
    std::vector<ClientUpdateResult> out(rr.sampled.size());
    const auto opts = client_options(round);
    parallel_for(rr.sampled.size(), config.threads, [&](std::size_t i) {
      const std::size_t m = rr.sampled[i];
      out[i] = client_update(shards[m], state.locals[m], state.global, opts, client_seed(config.seed, round, m));
    });
    std::vector<Contribution> contrib;
    for (std::size_t i = 0; i < out.size(); ++i) {
      rr.train_loss.push_back(out[i].train_loss);
      if (!out[i].skipped && out[i].n_train > 0) contrib.push_back({&out[i].global.params(), out[i].n_train});
    }
    if (contrib.empty()) {
      result.warnings.push_back("round " + std::to_string(round) + ": no sampled device had training data");
    } else if (!state.global.empty()) {
      auto merged = aggregate(contrib, &rr.weights);
      state.global.mutable_params() = std::move(merged);
    }
    result.ledger.record_round(phase, m_count, rr.sampled.size(), state.global.param_count());
    finish_round(round, phase, last_round, rr);
  }

  void isolated_round(std::size_t round, std::size_t last_round, double lambda1, double lambda2, bool regularize) {
    auto& state = result.state;
    const std::size_t m_count = shards.size();
    RoundResult rr;
    rr.round = round;
    rr.phase = 1;
    rr.sampled.resize(m_count);
    std::iota(rr.sampled.begin(), rr.sampled.end(), std::size_t{0});
    auto opts = client_options(round);
    nn::ParamSet mean;
    if (regularize) {
      // device mean taken once at round start
      mean = nn::zeros_like(state.locals.front().params());
      for (const auto& l : state.locals) nn::axpy(1.0 / static_cast<double>(m_count), l.params(), mean);
      opts.local_hook = [&mean, lambda1, lambda2](const nn::ParamSet& p, nn::ParamSet& g) {
        nn::axpy(2.0 * lambda1, p, g);
        nn::axpy(-2.0 * lambda1, mean, g);
        nn::axpy(2.0 * lambda2, p, g);
      };
    }
    std::vector<double> losses(m_count, 0.0);
    parallel_for(m_count, config.threads, [&](std::size_t m) {
      losses[m] = client_update(shards[m], state.locals[m], state.global, opts, client_seed(config.seed, round, m))
                      .train_loss;
    });
    rr.train_loss = std::move(losses);
    // MTL: every device uploads its weights and receives the device mean
    if (regularize) result.ledger.record_round(1, m_count, m_count, state.locals.front().param_count());
    finish_round(round, 1, last_round, rr);
  }

  void finish_round(std::size_t round, int phase, std::size_t last_round, RoundResult& rr) {
    if (evaluate_now(round, last_round)) record_metrics(round + 1, phase, rr);
    rr.global = &result.state.global;
    if (hooks.on_round) hooks.on_round(rr);
  }
};

void check_inputs(const std::vector<data::DeviceShard>& shards, const Network& init, const FederationConfig& c) {
  if (shards.empty()) throw ArgumentError("federation needs at least one device");
  if (init.empty()) throw ArgumentError("initial model is empty");
  if (c.batch_size == 0) throw ArgumentError("batch size must be positive");
  (void)sampled_count(c.participation, shards.size());
}

void final_evaluation(Loop& loop) {
  // zero-round runs still report the starting point
  if (loop.result.history.empty()) {
    RoundResult rr;
    loop.record_metrics(0, 1, rr);
  }
}

RunResult run_isolated(const std::vector<data::DeviceShard>& shards, const Network& init, const FederationConfig& config,
                       const RunHooks& hooks, double lambda1, double lambda2, bool regularize) {
  check_inputs(shards, init, config);
  RunResult result;
  result.state.locals.assign(shards.size(), init);
  result.state.split_index = init.depth();
  Loop loop{shards, config, hooks, result};
  const std::size_t rounds = config.total_rounds();
  for (std::size_t r = 0; r < rounds; ++r) loop.isolated_round(r, rounds, lambda1, lambda2, regularize);
  final_evaluation(loop);
  result.switch_round = rounds;
  result.ledger.record_local_exchange(shards.size() * init.param_count());
  return result;
}

}  // namespace

Network initial_model(std::span<const nn::Index> widths, std::uint64_t seed, const nn::MlpOptions& options) {
  Rng rng = make_rng({seed, kInitStream});
  return Network::mlp(widths, rng, options);
}

std::vector<std::size_t> sample_clients(std::size_t devices, double participation, std::uint64_t seed,
                                        std::size_t round) {
  const std::size_t k = sampled_count(participation, devices);
  Rng rng = make_rng({seed, kSampleStream, round});
  auto picked = data::sample_rows(devices, k, rng);
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::uint64_t client_seed(std::uint64_t seed, std::size_t round, std::size_t device) {
  return derive_seed({seed, kClientStream, round, device});
}

RunResult run_fedavg(const std::vector<data::DeviceShard>& shards, const Network& init, const FederationConfig& config,
                     const RunHooks& hooks) {
  check_inputs(shards, init, config);
  RunResult result;
  result.state.global = init;
  result.state.locals.assign(shards.size(), Network{});
  Loop loop{shards, config, hooks, result};
  const std::size_t rounds = config.total_rounds();
  for (std::size_t r = 0; r < rounds; ++r) loop.federated_round(r, 1, rounds);
  final_evaluation(loop);
  result.switch_round = rounds;
  return result;
}

RunResult run_lg_fedavg(const std::vector<data::DeviceShard>& shards, const Network& init,
                        const FederationConfig& config, const RunHooks& hooks) {
  check_inputs(shards, init, config);
  if (config.split_index > init.depth()) throw ArgumentError("split index exceeds network depth");
  RunResult result;
  result.state.global = init;
  result.state.locals.assign(shards.size(), Network{});
  Loop loop{shards, config, hooks, result};

  std::size_t r = 0;
  std::size_t budget = config.rounds_phase1;
  for (; r < config.rounds_phase1; ++r) {
    loop.federated_round(r, 1, budget);
    if (config.goal_accuracy &&
        evaluate_local_test(result.state, shards, Split::validation).mean >= *config.goal_accuracy) {
      result.goal_reached = true;
      ++r;
      break;
    }
  }
  if (config.goal_accuracy && !result.goal_reached)
    result.warnings.push_back("goal accuracy not reached in phase 1; switching after " + std::to_string(r) + " rounds");
  result.switch_round = r;

  // Phase-2 locals warm-start from the phase-1 bottom layers.
  auto& st = result.state;
  st.phase1_model = st.global;
  if (config.split_index > 0) {
    auto parts = split(st.phase1_model, config.split_index);
    st.global = std::move(parts.global_layers);
    st.locals.assign(shards.size(), parts.local_layers);
  }
  st.split_index = config.split_index;
  const std::size_t end = r + config.rounds_phase2;
  for (; r < end; ++r) loop.federated_round(r, 2, end);
  final_evaluation(loop);
  if (config.split_index > 0) result.ledger.record_local_exchange(shards.size() * st.locals.front().param_count());
  return result;
}

RunResult run_local_only(const std::vector<data::DeviceShard>& shards, const Network& init,
                         const FederationConfig& config, const RunHooks& hooks) {
  return run_isolated(shards, init, config, hooks, 0.0, 0.0, false);
}

RunResult run_mtl(const std::vector<data::DeviceShard>& shards, const Network& init, const FederationConfig& config,
                  double lambda1, double lambda2, const RunHooks& hooks) {
  if (lambda1 < 0 || lambda2 < 0) throw ArgumentError("MTL lambdas must be nonnegative");
  return run_isolated(shards, init, config, hooks, lambda1, lambda2, true);
}

double mtl_trace(const std::vector<std::vector<double>>& columns) {
  if (columns.empty()) return 0.0;
  const std::size_t p = columns.front().size();
  std::vector<double> mean(p, 0.0);
  for (const auto& c : columns) {
    if (c.size() != p) throw ShapeError("MTL columns differ in length");
    for (std::size_t i = 0; i < p; ++i) mean[i] += c[i] / static_cast<double>(columns.size());
  }
  // Omega = (I - J/M)^2 = I - J/M, so tr(W Omega W^T) = sum_m |w_m - mean|^2
  double t = 0.0;
  for (const auto& c : columns)
    for (std::size_t i = 0; i < p; ++i) t += (c[i] - mean[i]) * (c[i] - mean[i]);
  return t;
}

}  // namespace lgfed::fed
