#include "lgfed/fed/hetero.hpp"

#include "lgfed/common/error.hpp"
#include "lgfed/common/rng.hpp"
#include "lgfed/data/privacy.hpp"
#include "lgfed/fed/aggregate.hpp"
#include "lgfed/fed/client.hpp"
#include "lgfed/nn/loss.hpp"

namespace lgfed::fed {

namespace {

constexpr std::uint64_t kHeteroStream = 0x4e7e20;

double device_test_accuracy(const Network& local, const Network& global, const data::DeviceShard& shard) {
  data::DeviceContext on_device(shard.device_id());
  const auto& t = shard.test();
  if (t.empty()) return 0.0;
  return accuracy(nn::argmax_rows(split_predict(local, global, t.features)), t.labels);
}

double originals_accuracy(const FedState& st, const std::vector<data::DeviceShard>& originals) {
  double hits = 0.0;
  std::size_t total = 0;
  for (std::size_t m = 0; m < originals.size(); ++m) {
    const std::size_t n = originals[m].n_test();
    hits += device_test_accuracy(st.locals[m], st.global, originals[m]) * static_cast<double>(n);
    total += n;
  }
  return total ? hits / static_cast<double>(total) : 0.0;
}

}  // namespace

HeteroResult run_hetero_online(const FedState& trained, const std::vector<data::DeviceShard>& originals,
                               const data::DeviceShard& new_device, const HeteroConfig& hetero,
                               const FederationConfig& config) {
  if (trained.locals.size() != originals.size()) throw ProtocolError("trained state and original shards differ");
  HeteroResult res;
  res.state = trained;
  auto& st = res.state;
  const bool lg = trained.has_locals();
  Network fresh;
  if (lg) {
    if (trained.phase1_model.empty()) throw ArgumentError("LG state lacks the phase-1 model");
    fresh = split(trained.phase1_model, trained.split_index).local_layers;
  }
  st.locals.push_back(fresh);
  const std::size_t new_index = st.locals.size() - 1;

  res.normal_before = originals_accuracy(st, originals);
  res.rotated_before = device_test_accuracy(st.locals[new_index], st.global, new_device);

  for (std::size_t r = 0; r < hetero.rounds; ++r) {
    ClientOptions opts;
    opts.epochs = config.local_epochs;
    opts.batch_size = config.batch_size;
    opts.sgd = config.sgd;
    opts.round = r;
    const std::uint64_t round_seed = derive_seed({config.seed, kHeteroStream, r});
    if (lg && r == 0 && hetero.warmup_epochs > 0) {
      // fit the new representation against the frozen global model first
      ClientOptions warm = opts;
      warm.epochs = hetero.warmup_epochs;
      warm.train_global = false;
      (void)client_update(new_device, st.locals[new_index], st.global, warm, derive_seed({round_seed, 0x3a}));
    }
    std::vector<ClientUpdateResult> out;
    out.push_back(client_update(new_device, st.locals[new_index], st.global, opts, derive_seed({round_seed, 0})));
    if (hetero.finetune_participation > 0.0) {
      for (auto m : sample_clients(originals.size(), hetero.finetune_participation, round_seed, r))
        out.push_back(client_update(originals[m], st.locals[m], st.global, opts, derive_seed({round_seed, 1, m})));
    }
    std::vector<Contribution> contrib;
    for (const auto& o : out)
      if (!o.skipped) contrib.push_back({&o.global.params(), o.n_train});
    if (!contrib.empty() && !st.global.empty()) st.global.mutable_params() = aggregate(contrib);
  }

  res.normal_after = originals_accuracy(st, originals);
  res.rotated_after = device_test_accuracy(st.locals[new_index], st.global, new_device);
  return res;
}

}  // namespace lgfed::fed
