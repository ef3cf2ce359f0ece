#include "lgfed/fair/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lgfed/common/error.hpp"
#include "lgfed/common/parallel.hpp"
#include "lgfed/common/rng.hpp"
#include "lgfed/data/privacy.hpp"
#include "lgfed/fair/auc.hpp"
#include "lgfed/fed/aggregate.hpp"
#include "lgfed/fed/algorithms.hpp"
#include "lgfed/fed/ledger.hpp"
#include "lgfed/nn/loss.hpp"

namespace lgfed::fair {

namespace {

constexpr std::uint64_t kAdversaryStream = 0xad7e;
constexpr std::uint64_t kPretrainStream = 0x97e;
constexpr std::uint64_t kProbeStream = 0x970be;
constexpr std::uint64_t kInitStream = 0x1417f;

void gather(const data::Dataset& d, const std::vector<std::size_t>& order, std::size_t start, std::size_t count,
            Matrix& x, std::vector<int>& y, std::vector<int>& p) {
  x.resize(static_cast<nn::Index>(count), d.features.cols());
  y.resize(count);
  p.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = order[start + i];
    x.row(static_cast<nn::Index>(i)) = d.features.row(static_cast<nn::Index>(r));
    y[i] = d.labels[r];
    p[i] = d.protected_attr[r];
  }
}

std::vector<double> positive_scores(const Matrix& logits) {
  const Matrix prob = nn::softmax(logits);
  std::vector<double> s(static_cast<std::size_t>(prob.rows()));
  // Blocked matrix products can round identical rows differently; snap to a
  // 1e-12 grid so equal inputs stay tied for the AUC.
  for (nn::Index i = 0; i < prob.rows(); ++i)
    s[static_cast<std::size_t>(i)] = std::round(prob(i, prob.cols() - 1) * 1e12) / 1e12;
  return s;
}

Network make_mlp(std::vector<nn::Index> widths, double dropout, std::uint64_t seed) {
  Rng rng(seed);
  nn::MlpOptions o;
  o.hidden_dropout = dropout;
  return Network::mlp(widths, rng, o);
}

// Representation layers end in ReLU: they feed further layers, not a softmax.
Network make_local(std::vector<nn::Index> widths, double dropout, std::uint64_t seed) {
  Rng rng(seed);
  nn::MlpOptions o;
  o.hidden_dropout = dropout;
  o.output = nn::Activation::relu;
  Network net = Network::mlp(widths, rng, o);
  std::vector<double> rates(net.depth(), dropout);
  return Network(net.params(), net.activations(), rates);
}

// Test-row weighted mean of per-device AUCs. Each device scores with its own
// network, so pooling raw scores would mix unrelated calibrations.
class DeviceAucMean {
 public:
  void add(std::span<const double> scores, std::span<const int> attrs) {
    const bool both = std::find(attrs.begin(), attrs.end(), 0) != attrs.end() &&
                      std::find(attrs.begin(), attrs.end(), 1) != attrs.end();
    if (!both) return;
    sum_ += roc_auc(scores, attrs) * static_cast<double>(attrs.size());
    rows_ += attrs.size();
  }
  double value() const {
    if (rows_ == 0) throw UndefinedMetricError("no device has both protected groups in its test split");
    return sum_ / static_cast<double>(rows_);
  }

 private:
  double sum_ = 0.0;
  std::size_t rows_ = 0;
};

}  // namespace

AdversarialUpdate adversarial_client_update(const data::DeviceShard& device, Network& local,
                                            const Network& global_copy, Network& adversary, double lambda,
                                            const fed::ClientOptions& options, std::uint64_t seed,
                                            std::size_t adversary_steps) {
  data::DeviceContext on_device(device.device_id());
  if (lambda < 0.0) throw ArgumentError("lambda must be nonnegative");
  AdversarialUpdate res;
  res.global = global_copy;
  res.n_train = device.n_train();
  if (res.n_train == 0) return res;
  if (options.batch_size == 0) throw ArgumentError("batch size must be positive");
  const auto& train = device.train();
  if (!train.has_protected()) throw ConfigError("device data has no protected attribute");

  Rng rng(seed);
  Rng adv_rng(derive_seed({seed, kAdversaryStream}));
  nn::OptimizerState local_opt(options.sgd, local.params(), options.round);
  nn::OptimizerState global_opt(options.sgd, res.global.params(), options.round);
  nn::OptimizerState adv_opt(options.sgd, adversary.params(), options.round);
  std::vector<std::size_t> order(train.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix xb;
  std::vector<int> yb, pb;
  double lg_sum = 0.0, la_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, order.size() - start);
      gather(train, order, start, count, xb, yb, pb);
      const auto lf = nn::forward(local, xb, nn::Mode::train, &rng);
      const auto gf = nn::forward(res.global, lf.output, nn::Mode::train, &rng);
      const auto loss_g = nn::cross_entropy(gf.output, yb);
      const auto gb = nn::backward(res.global, gf.cache, loss_g.grad);
      if (options.train_local && !local.empty()) {
        Matrix dh = gb.input_grad;
        if (lambda != 0.0) {
          const auto af = nn::forward(adversary, lf.output, nn::Mode::train, &adv_rng);
          const auto loss_a = nn::cross_entropy(af.output, pb);
          dh -= lambda * nn::backward(adversary, af.cache, loss_a.grad).input_grad;
        }
        const auto lb = nn::backward(local, lf.cache, dh);
        nn::sgd_step(local, lb.grads, local_opt);
      }
      if (options.train_global && !res.global.empty()) nn::sgd_step(res.global, gb.grads, global_opt);

      const Matrix h = nn::forward(local, xb, nn::Mode::train, &adv_rng).output;
      double loss_a = 0.0;
      for (std::size_t k = 0; k < adversary_steps; ++k) {
        const auto af = nn::forward(adversary, h, nn::Mode::train, &adv_rng);
        const auto ce = nn::cross_entropy(af.output, pb);
        nn::sgd_step(adversary, nn::backward(adversary, af.cache, ce.grad).grads, adv_opt);
        if (k == 0) loss_a = ce.loss;
      }
      lg_sum += loss_g.loss;
      la_sum += loss_a;
      ++batches;
    }
  }
  if (batches) {
    res.predictor_loss = lg_sum / static_cast<double>(batches);
    res.adversary_loss = la_sum / static_cast<double>(batches);
  }
  return res;
}

double composite_objective(const Network& local, const Network& global, const Network& adversary, const Matrix& x,
                           std::span<const int> labels, std::span<const int> protected_attr, double lambda) {
  const Matrix h = nn::predict(local, x);
  return nn::cross_entropy(nn::predict(global, h), labels).loss -
         lambda * nn::cross_entropy(nn::predict(adversary, h), protected_attr).loss;
}

nn::ParamSet composite_local_gradient(const Network& local, const Network& global, const Network& adversary,
                                      const Matrix& x, std::span<const int> labels,
                                      std::span<const int> protected_attr, double lambda) {
  const auto lf = nn::forward(local, x, nn::Mode::eval);
  const auto gf = nn::forward(global, lf.output, nn::Mode::eval);
  const auto af = nn::forward(adversary, lf.output, nn::Mode::eval);
  Matrix dh = nn::backward(global, gf.cache, nn::cross_entropy(gf.output, labels).grad).input_grad;
  dh -= lambda * nn::backward(adversary, af.cache, nn::cross_entropy(af.output, protected_attr).grad).input_grad;
  return nn::backward(local, lf.cache, dh).grads;
}

double train_adversary(const data::Dataset& data, const Network& local, Network& adversary,
                       const fed::ClientOptions& options, std::uint64_t seed) {
  if (data.empty()) return 0.0;
  if (!data.has_protected()) throw ConfigError("data has no protected attribute");
  const Matrix h = nn::predict(local, data.features);
  Rng rng(seed);
  nn::OptimizerState opt(options.sgd, adversary.params(), options.round);
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix xb;
  std::vector<int> pb;
  double last = 0.0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, order.size() - start);
      xb.resize(static_cast<nn::Index>(count), h.cols());
      pb.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        xb.row(static_cast<nn::Index>(i)) = h.row(static_cast<nn::Index>(order[start + i]));
        pb[i] = data.protected_attr[order[start + i]];
      }
      const auto af = nn::forward(adversary, xb, nn::Mode::train, &rng);
      const auto loss = nn::cross_entropy(af.output, pb);
      nn::sgd_step(adversary, nn::backward(adversary, af.cache, loss.grad).grads, opt);
      sum += loss.loss;
      ++batches;
    }
    last = batches ? sum / static_cast<double>(batches) : 0.0;
  }
  return last;
}

FairVariant parse_variant(const std::string& name) {
  if (name == "fedavg") return FairVariant::fedavg;
  if (name == "lg") return FairVariant::lg;
  if (name == "lg_adv") return FairVariant::lg_adv;
  throw ArgumentError("unknown fairness variant '" + name + "' (fedavg | lg | lg_adv)");
}

std::string variant_name(FairVariant v) {
  switch (v) {
    case FairVariant::fedavg: return "fedavg";
    case FairVariant::lg: return "lg";
    case FairVariant::lg_adv: return "lg_adv";
  }
  return "?";
}

double post_fit_probe(const std::vector<Network>& locals, const std::vector<data::DeviceShard>& shards,
                      const FairConfig& config, std::uint64_t seed) {
  if (locals.size() != shards.size()) throw ProtocolError("local models and shards differ in count");
  DeviceAucMean auc;
  fed::ClientOptions opt;
  opt.epochs = config.probe_epochs;
  opt.batch_size = config.batch_size;
  opt.sgd = config.sgd;
  for (std::size_t m = 0; m < shards.size(); ++m) {
    data::DeviceContext on_device(shards[m].device_id());
    auto widths = config.adversary_widths;
    widths.front() = locals[m].empty() ? shards[m].train().features.cols() : locals[m].output_dim();
    Network probe = make_mlp(widths, config.dropout, derive_seed({seed, kProbeStream, m}));
    (void)train_adversary(shards[m].train(), locals[m], probe, opt, derive_seed({seed, kProbeStream, m, 1}));
    const auto& test = shards[m].test();
    if (test.empty()) continue;
    auc.add(positive_scores(nn::predict(probe, nn::predict(locals[m], test.features))), test.protected_attr);
  }
  return auc.value();
}

FairRun run_fair_fed(const std::vector<data::DeviceShard>& shards, const FairConfig& config, FairVariant variant) {
  if (shards.empty()) throw ArgumentError("fairness run needs at least one device");
  const std::size_t m_count = shards.size();
  auto lw = config.local_widths;
  {
    data::DeviceContext on_device(shards.front().device_id());
    lw.front() = shards.front().train().features.cols();
  }
  if (lw.back() != config.global_widths.front() || lw.back() != config.adversary_widths.front())
    throw ConfigError("representation width must match the global and adversary input widths");
  const double lambda = variant == FairVariant::lg_adv ? config.lambda : 0.0;

  FairRun run;
  run.report.variant = variant;
  run.report.lambda = lambda;
  const Network local0 = make_local(lw, config.dropout, derive_seed({config.seed, kInitStream, 0}));
  run.global = make_mlp(config.global_widths, config.dropout, derive_seed({config.seed, kInitStream, 1}));
  const Network adv0 = make_mlp(config.adversary_widths, config.dropout, derive_seed({config.seed, kInitStream, 2}));
  run.locals.assign(m_count, local0);
  run.adversaries.assign(m_count, adv0);

  fed::ClientOptions base;
  base.batch_size = config.batch_size;
  base.sgd = config.sgd;
  fed::CommLedger ledger;

  if (variant != FairVariant::fedavg && config.pretrain_epochs > 0) {
    // local models pretrained against a scratch copy of the initial global model,
    // then local adversaries on the frozen representations
    parallel_for(m_count, config.threads, [&](std::size_t m) {
      fed::ClientOptions o = base;
      o.epochs = config.pretrain_epochs;
      (void)fed::client_update(shards[m], run.locals[m], run.global, o, derive_seed({config.seed, kPretrainStream, m}));
      data::DeviceContext on_device(shards[m].device_id());
      (void)train_adversary(shards[m].train(), run.locals[m], run.adversaries[m], o,
                            derive_seed({config.seed, kPretrainStream, m, 1}));
    });
  }

  for (std::size_t r = 0; r < config.rounds; ++r) {
    const auto sampled = fed::sample_clients(m_count, config.participation, config.seed, r);
    fed::ClientOptions o = base;
    o.epochs = config.local_epochs;
    o.round = r;
    std::vector<AdversarialUpdate> out(sampled.size());
    parallel_for(sampled.size(), config.threads, [&](std::size_t i) {
      const std::size_t m = sampled[i];
      out[i] = adversarial_client_update(shards[m], run.locals[m], run.global, run.adversaries[m], lambda, o,
                                         fed::client_seed(config.seed, r, m), config.adversary_steps);
    });
    std::vector<fed::Contribution> cg, cl, ca;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i].n_train == 0) continue;
      cg.push_back({&out[i].global.params(), out[i].n_train});
      cl.push_back({&run.locals[sampled[i]].params(), out[i].n_train});
      ca.push_back({&run.adversaries[sampled[i]].params(), out[i].n_train});
    }
    if (cg.empty()) continue;
    run.global.mutable_params() = fed::aggregate(cg);
    std::uint64_t per_round = run.global.param_count();
    if (variant == FairVariant::fedavg) {
      // the whole predictor and the adversary are shared
      auto lp = fed::aggregate(cl);
      auto ap = fed::aggregate(ca);
      for (std::size_t m = 0; m < m_count; ++m) {
        run.locals[m].mutable_params() = lp;
        run.adversaries[m].mutable_params() = ap;
      }
      per_round += run.locals.front().param_count() + run.adversaries.front().param_count();
    }
    ledger.record_round(1, m_count, sampled.size(), per_round);
  }
  run.report.params_communicated = ledger.total();

  std::vector<double> cls_scores;
  std::vector<int> labels;
  DeviceAucMean adv_auc;
  std::size_t hits = 0;
  for (std::size_t m = 0; m < m_count; ++m) {
    data::DeviceContext on_device(shards[m].device_id());
    const auto& test = shards[m].test();
    if (test.empty()) continue;
    const Matrix h = nn::predict(run.locals[m], test.features);
    const Matrix logits = nn::predict(run.global, h);
    const auto pred = nn::argmax_rows(logits);
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == test.labels[i];
    const auto cs = positive_scores(logits);
    adv_auc.add(positive_scores(nn::predict(run.adversaries[m], h)), test.protected_attr);
    cls_scores.insert(cls_scores.end(), cs.begin(), cs.end());
    labels.insert(labels.end(), test.labels.begin(), test.labels.end());
  }
  if (labels.empty()) throw CapacityError("no device has test rows");
  run.report.classifier_accuracy = static_cast<double>(hits) / static_cast<double>(labels.size());
  run.report.classifier_auc = roc_auc(cls_scores, labels);
  run.report.adversary_auc = adv_auc.value();
  run.report.probe_auc = post_fit_probe(run.locals, shards, config, config.seed);
  return run;
}

}  // namespace lgfed::fair
