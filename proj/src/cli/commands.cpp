#include "lgfed/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "lgfed/cli/presets.hpp"
#include "lgfed/common/error.hpp"
#include "lgfed/common/rng.hpp"
#include "lgfed/data/tabular.hpp"
#include "lgfed/data/transform.hpp"
#include "lgfed/fed/model_io.hpp"

namespace lgfed::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kBlobStream = 0xb10b;
constexpr std::uint64_t kNewDeviceStream = 0x4e3d;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const Json& j) { open_out(path) << j.dump(2) << '\n'; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path idx_path(const fs::path& dir, const std::string& stem) {
  for (const auto& name : {stem, stem + ".gz"})
    if (fs::exists(dir / name)) return dir / name;
  throw IoError("missing dataset file " + (dir / stem).string() + "[.gz]");
}

data::Dataset take_rows(const data::Dataset& d, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> rows;
  for (std::size_t i = begin; i < end; ++i) rows.push_back(i);
  return data::subset(d, rows);
}

// Class c centred at a fixed random mean; the means depend on the seed only.
data::Dataset blobs(const DatasetConfig& c, std::size_t per_class, std::uint64_t seed, std::uint64_t stream) {
  const auto dim = static_cast<nn::Index>(c.dim);
  const auto k = static_cast<nn::Index>(c.classes);
  Rng means_rng = make_rng({seed, kBlobStream});
  std::normal_distribution<double> g(0.0, 1.0);
  nn::Matrix means(k, dim);
  for (nn::Index i = 0; i < means.size(); ++i) means.data()[i] = 2.0 * g(means_rng);
  Rng rng = make_rng({seed, kBlobStream, stream});
  data::Dataset d;
  d.num_classes = static_cast<int>(c.classes);
  d.features.resize(static_cast<nn::Index>(per_class) * k, dim);
  for (nn::Index i = 0; i < d.features.rows(); ++i) {
    const auto cls = static_cast<int>(i % k);
    d.labels.push_back(cls);
    for (nn::Index j = 0; j < dim; ++j) d.features(i, j) = means(cls, j) + c.noise * g(rng);
  }
  return d;
}

std::uint64_t params_from(std::span<const nn::Index> widths, std::size_t begin) {
  std::uint64_t n = 0;
  for (std::size_t i = begin; i + 1 < widths.size(); ++i)
    n += static_cast<std::uint64_t>(widths[i]) * widths[i + 1] + widths[i + 1];
  return n;
}

Json phase_json(const fed::PhaseCounters& p) {
  return Json{{"rounds", p.rounds}, {"params_down", p.params_down}, {"params_up", p.params_up}, {"total", p.total()}};
}

MethodSummary ledger_only_run(const FedExperiment& c, Method m, const fs::path& dir) {
  const auto& f = c.federation;
  const std::uint64_t full = c.ledger_only.params_full ? c.ledger_only.params_full : params_from(c.widths, 0);
  const std::uint64_t global =
      c.ledger_only.params_global ? c.ledger_only.params_global : params_from(c.widths, f.split_index);
  const std::uint64_t devices = c.partition.devices;
  const std::uint64_t sampled = fed::sampled_count(f.participation, c.partition.devices);
  MethodSummary s;
  s.method = m;
  Json phases = Json::array();
  auto phase = [&](std::uint64_t rounds, std::uint64_t down, std::uint64_t up, std::uint64_t params) {
    phases.push_back(Json{{"rounds", rounds},
                          {"params_per_round", params},
                          {"params_down", rounds * down * params},
                          {"params_up", rounds * up * params}});
    s.params_communicated += rounds * (down + up) * params;
  };
  switch (m) {
    case Method::fedavg: phase(f.total_rounds(), devices, sampled, full); break;
    case Method::lg:
      phase(f.rounds_phase1, devices, sampled, full);
      phase(f.rounds_phase2, devices, sampled, global);
      s.phase2_params_per_round = (devices + sampled) * global;
      break;
    case Method::local: phase(f.total_rounds(), 0, 0, full); break;
    case Method::mtl: phase(f.total_rounds(), devices, devices, full); break;
  }
  ensure_dir(dir);
  write_json(dir / "ledger.json", Json{{"method", method_name(m)},
                                       {"ledger_only", true},
                                       {"params_full", full},
                                       {"params_global", global},
                                       {"phases", phases},
                                       {"total", s.params_communicated}});
  return s;
}

Json summary_json(const MethodSummary& s) {
  return Json{{"method", method_name(s.method)},
              {"local_test_acc", s.local_test_acc},
              {"new_test_acc", s.new_test_acc},
              {"params_communicated", s.params_communicated},
              {"phase2_params_per_round", s.phase2_params_per_round},
              {"switch_round", s.switch_round},
              {"warnings", s.warnings}};
}

fed::RunResult train(const FedExperiment& c, Method m, const FedData& d) {
  nn::MlpOptions opts;
  opts.hidden_dropout = c.hidden_dropout;
  const auto init = fed::initial_model(c.widths, c.seed, opts);
  fed::RunHooks hooks;
  if (!d.new_test.empty()) hooks.new_test = &d.new_test;
  switch (m) {
    case Method::fedavg: return fed::run_fedavg(d.shards, init, c.federation, hooks);
    case Method::lg: return fed::run_lg_fedavg(d.shards, init, c.federation, hooks);
    case Method::local: return fed::run_local_only(d.shards, init, c.federation, hooks);
    case Method::mtl: return fed::run_mtl(d.shards, init, c.federation, c.mtl_lambda1, c.mtl_lambda2, hooks);
  }
  throw ProtocolError("unhandled method");
}

Json report_json(const fair::FairnessReport& r) {
  return Json{{"classifier_accuracy", r.classifier_accuracy},
              {"classifier_auc", r.classifier_auc},
              {"adversary_auc", r.adversary_auc},
              {"probe_auc", r.probe_auc},
              {"lambda", r.lambda},
              {"params_communicated", r.params_communicated}};
}

std::string variant_description(fair::FairVariant v) {
  switch (v) {
    case fair::FairVariant::fedavg: return "FedAvg with a federated adversary, no adversarial penalty";
    case fair::FairVariant::lg: return "LG-FedAvg without penalizing the adversarial network";
    case fair::FairVariant::lg_adv: return "LG-FedAvg+Adv";
  }
  return "";
}

}  // namespace

Json resolve_config(const std::string& command, const std::string& preset, const fs::path& config_file,
                    const Overrides& overrides) {
  Json j = preset.empty() ? Json::object() : find_preset(command, preset).config;
  if (!config_file.empty()) {
    const Json file = read_json_file(config_file);
    if (!file.is_object()) throw ConfigError(config_file.string() + " must hold a JSON object");
    j.merge_patch(file);
  }
  if (overrides.seed) j["seed"] = *overrides.seed;
  if (overrides.threads) j["threads"] = *overrides.threads;
  if (overrides.trials) {
    if (command == "theory") {
      j["trials"] = *overrides.trials;
    } else if (command == "fair") {
      j["seeds"] = *overrides.trials;
    } else {
      throw ArgumentError("--trials/--seeds applies to the theory and fair commands only");
    }
  }
  return j;
}

TheorySummary cmd_theory(const TheoryConfig& c, const fs::path& out) {
  ensure_dir(out);
  write_json(out / "config.json", to_json(c));
  TheorySummary s;
  const auto alphas = theory::alpha_grid(c.alpha_step);
  s.curve = theory::mc_generalization(c.world, alphas, c.trials, c.seed, c.threads);
  {
    auto f = open_out(out / "curve.csv");
    theory::write_curve_csv(f, s.curve);
  }
  const auto& w = c.world;
  const double k = theory::device_factor(w);
  s.alpha_star_closed_form = theory::closed_form_errors(w.d, w.n_train, w.devices, w.rho, w.sigma, 0.0, k).alpha_star;
  s.alpha_star_empirical = theory::empirical_alpha_star(s.curve);
  s.mc_global = s.curve.mean.front();
  s.mc_local = s.curve.mean.back();
  for (std::size_t i = 0; i < alphas.size(); ++i)
    if (alphas[i] == s.alpha_star_empirical) {
      s.mc_at_alpha_star = s.curve.mean[i];
      s.mc_std_at_alpha_star = s.curve.stddev[i];
    }
  const auto cf_local = theory::closed_form_errors(w.d, w.n_train, w.devices, w.rho, w.sigma, 1.0, k);
  const auto cf_global = theory::closed_form_errors(w.d, w.n_train, w.devices, w.rho, w.sigma, 0.0, k);
  write_json(out / "summary.json", Json{{"alpha_star_closed_form", s.alpha_star_closed_form},
                                        {"alpha_star_empirical", s.alpha_star_empirical},
                                        {"device_factor", k},
                                        {"mc_local", s.mc_local},
                                        {"mc_global", s.mc_global},
                                        {"mc_at_alpha_star", s.mc_at_alpha_star},
                                        {"mc_std_at_alpha_star", s.mc_std_at_alpha_star},
                                        {"closed_form_local", cf_local.e_local},
                                        {"closed_form_global", cf_global.e_global},
                                        {"trials", c.trials}});
  return s;
}

FedData load_fed_data(const FedExperiment& c) {
  FedData d;
  data::Dataset train, test;
  const auto& ds = c.dataset;
  if (ds.source == "mnist") {
    const fs::path dir = ds.dir.empty() ? default_data_dir() / "mnist" : ds.dir;
    data::IdxLoadOptions o;
    o.normalization = ds.normalization;
    train = data::load_idx_images(idx_path(dir, "train-images-idx3-ubyte"), idx_path(dir, "train-labels-idx1-ubyte"), o);
    test = data::load_idx_images(idx_path(dir, "t10k-images-idx3-ubyte"), idx_path(dir, "t10k-labels-idx1-ubyte"), o);
  } else {
    train = blobs(ds, ds.rows_per_class, c.seed, 1);
    test = blobs(ds, std::max<std::size_t>(ds.rows_per_class / 2, 1), c.seed, 2);
  }
  if (c.widths.front() != train.features.cols())
    throw ConfigError("model.widths[0] = " + std::to_string(c.widths.front()) + " but the data has " +
                      std::to_string(train.features.cols()) + " features");
  const std::size_t n_train = ds.train_rows ? std::min(ds.train_rows, train.rows()) : train.rows();
  const std::size_t n_new = ds.new_test_rows ? std::min(ds.new_test_rows, test.rows()) : test.rows();
  const auto fed_rows = take_rows(train, 0, n_train);
  d.new_test = take_rows(test, 0, n_new);
  // Spare rows keep a new device disjoint from the federation; without any, it samples
  // from the full files.
  d.spare_train = n_train < train.rows() ? take_rows(train, n_train, train.rows()) : train;
  d.spare_test = n_new < test.rows() ? take_rows(test, n_new, test.rows()) : test;
  auto part = data::partition(fed_rows, c.partition);
  d.audit_json = data::partition_audit_json(c.partition, part);
  d.shards = std::move(part.shards);
  return d;
}

std::vector<MethodSummary> cmd_fed(const FedExperiment& c, const fs::path& out) {
  ensure_dir(out);
  write_json(out / "config.json", to_json(c));
  std::vector<MethodSummary> summaries;
  if (c.ledger_only.enabled) {
    for (auto m : c.methods) summaries.push_back(ledger_only_run(c, m, out / method_name(m)));
  } else {
    const FedData d = load_fed_data(c);
    open_out(out / "partition.json") << d.audit_json << '\n';
    for (auto m : c.methods) {
      const fs::path dir = out / method_name(m);
      ensure_dir(dir);
      const auto r = train(c, m, d);
      {
        auto f = open_out(dir / "history.csv");
        fed::write_history_csv(f, r.history);
      }
      MethodSummary s;
      s.method = m;
      s.params_communicated = r.ledger.total();
      if (r.ledger.phase(2).rounds) s.phase2_params_per_round = r.ledger.phase(2).total() / r.ledger.phase(2).rounds;
      s.switch_round = r.switch_round;
      s.warnings = r.warnings;
      if (!r.history.empty()) {
        s.local_test_acc = r.history.back().local_test_acc;
        s.new_test_acc = r.history.back().new_test_acc;
      }
      write_json(dir / "ledger.json", Json{{"method", method_name(m)},
                                           {"ledger_only", false},
                                           {"phase1", phase_json(r.ledger.phase(1))},
                                           {"phase2", phase_json(r.ledger.phase(2))},
                                           {"one_time_local_exchange", r.ledger.one_time_local_exchange()},
                                           {"total", r.ledger.total()},
                                           {"switch_round", r.switch_round},
                                           {"goal_reached", r.goal_reached}});
      if (c.save_models) fed::save_state(dir / "models", r.state);
      summaries.push_back(std::move(s));
    }
  }
  Json j = Json::array();
  for (const auto& s : summaries) j.push_back(summary_json(s));
  write_json(out / "summary.json", j);
  return summaries;
}

std::vector<HeteroRow> cmd_hetero(const HeteroExperiment& c, const fs::path& out) {
  ensure_dir(out);
  write_json(out / "config.json", to_json(c));
  if (c.base.ledger_only.enabled) throw ConfigError("hetero needs training; disable ledger_only");
  const FedData d = load_fed_data(c.base);
  data::Transform tf;
  if (c.rotation_times % 4 != 0) tf = data::rotation(c.rotation_times);
  const auto device = data::make_new_device(d.spare_train, d.spare_test, c.new_train, c.new_test, tf,
                                            derive_seed({c.base.seed, kNewDeviceStream}), d.shards.size());
  std::vector<HeteroRow> rows;
  std::ostringstream csv;
  csv << "method,finetune_participation,normal_before,rotated_before,normal_after,rotated_after\n";
  Json j = Json::array();
  for (auto m : c.base.methods) {
    const auto trained = train(c.base, m, d);
    for (double p : c.finetune_participation) {
      fed::HeteroConfig h;
      h.finetune_participation = p;
      h.rounds = c.rounds;
      h.warmup_epochs = c.warmup_epochs;
      HeteroRow row{m, p, fed::run_hetero_online(trained.state, d.shards, device, h, c.base.federation)};
      const auto& r = row.result;
      csv << method_name(m) << ',' << fmt("%.2f", p) << ',' << fmt("%.6f", r.normal_before) << ','
          << fmt("%.6f", r.rotated_before) << ',' << fmt("%.6f", r.normal_after) << ',' << fmt("%.6f", r.rotated_after)
          << '\n';
      j.push_back(Json{{"method", method_name(m)},
                       {"finetune_participation", p},
                       {"normal_before", r.normal_before},
                       {"rotated_before", r.rotated_before},
                       {"normal_after", r.normal_after},
                       {"rotated_after", r.rotated_after}});
      rows.push_back(std::move(row));
    }
  }
  open_out(out / "hetero.csv") << csv.str();
  write_json(out / "hetero.json", j);
  return rows;
}

std::vector<FairVariantSummary> cmd_fair(const FairExperiment& c, const fs::path& out) {
  ensure_dir(out);
  write_json(out / "config.json", to_json(c));
  data::Dataset adult;
  if (c.source == "adult") {
    const fs::path dir = c.adult_dir.empty() ? default_data_dir() / "adult" : c.adult_dir;
    for (const char* f : {"adult.data", "adult.test", "adult.schema.json"})
      if (!fs::exists(dir / f)) throw IoError("missing dataset file " + (dir / f).string());
    adult = data::load_csv_tabular({dir / "adult.data", dir / "adult.test"}, data::load_schema(dir / "adult.schema.json"))
                .data;
  }
  std::vector<FairVariantSummary> out_rows;
  for (auto v : c.variants) out_rows.push_back({v, {}});
  for (std::size_t s = 0; s < c.seeds; ++s) {
    const std::uint64_t seed = c.seed + s;
    const data::Dataset d = c.source == "adult" ? adult : fair::planted_dataset(c.planted, seed);
    data::PartitionPlan plan;
    plan.mode = data::PartitionMode::iid;
    plan.devices = c.devices;
    plan.seed = seed;
    const auto shards = data::partition(d, plan).shards;
    fair::FairConfig fc = c.fair;
    fc.seed = seed;
    for (auto& row : out_rows) row.runs.push_back(fair::run_fair_fed(shards, fc, row.variant).report);
  }
  Json variants = Json::array();
  for (const auto& row : out_rows) {
    Json runs = Json::array(), mean = Json::object(), stdev = Json::object();
    for (const auto& r : row.runs) runs.push_back(report_json(r));
    for (const char* key : {"classifier_accuracy", "classifier_auc", "adversary_auc", "probe_auc"}) {
      double m = 0.0, ss = 0.0;
      for (const auto& r : runs) m += r[key].get<double>();
      m /= static_cast<double>(runs.size());
      for (const auto& r : runs) ss += std::pow(r[key].get<double>() - m, 2);
      mean[key] = m;
      stdev[key] = runs.size() > 1 ? std::sqrt(ss / static_cast<double>(runs.size() - 1)) : 0.0;
    }
    variants.push_back(Json{{"variant", fair::variant_name(row.variant)},
                            {"description", variant_description(row.variant)},
                            {"runs", runs},
                            {"mean", mean},
                            {"std", stdev}});
  }
  write_json(out / "fair.json", Json{{"source", c.source}, {"seeds", c.seeds}, {"variants", variants}});
  return out_rows;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Local/global federated learning experiments"};
  app.require_subcommand(1);
  std::string preset;
  fs::path config_file, out_dir;
  std::uint64_t seed = 0;
  std::size_t threads = 1, trials = 0;
  bool print_config = false;
  std::vector<CLI::App*> runs;
  const std::pair<const char*, const char*> commands[] = {
      {"theory", "linear-regression local/global mixing: MC curve and closed forms"},
      {"fed", "train FedAvg, LG-FedAvg, local-only and MTL baselines, or count their communication"},
      {"hetero", "train, then add a transformed new device and fine-tune online"},
      {"fair", "adversarially fair representations with a protected attribute"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--preset", preset, "named preset (see `lgfed presets`)");
    sub->add_option("--config", config_file, "JSON config merged over the preset")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "base seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--trials,--seeds", trials, "MC trials (theory) or repeated runs (fair)")->check(CLI::PositiveNumber);
    sub->add_flag("--print-config", print_config, "print the resolved config and exit");
    runs.push_back(sub);
  }
  auto* list = app.add_subcommand("presets", "list the shipped presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_code::ok : exit_code::usage;
  }

  try {
    if (list->parsed()) {
      for (const auto& p : presets()) std::cout << p.command << ' ' << p.name << "  " << p.summary << '\n';
      return exit_code::ok;
    }
    CLI::App* sub = nullptr;
    for (auto* r : runs)
      if (r->parsed()) sub = r;
    const std::string cmd = sub->get_name();
    Overrides o;
    if (sub->count("--seed")) o.seed = seed;
    if (sub->count("--threads")) o.threads = threads;
    if (sub->count("--trials")) o.trials = trials;
    const Json raw = resolve_config(cmd, preset, config_file, o);
    Json resolved;
    if (cmd == "theory") resolved = to_json(parse_theory(raw));
    if (cmd == "fed") resolved = to_json(parse_fed(raw));
    if (cmd == "hetero") resolved = to_json(parse_hetero(raw));
    if (cmd == "fair") resolved = to_json(parse_fair(raw));
    if (print_config) {
      std::cout << resolved.dump(2) << '\n';
      return exit_code::ok;
    }
    if (out_dir.empty()) throw ArgumentError("--out is required");

    if (cmd == "theory") {
      const auto s = cmd_theory(parse_theory(resolved), out_dir);
      std::cout << "alpha* closed form " << fmt("%.5f", s.alpha_star_closed_form) << ", empirical "
                << fmt("%.2f", s.alpha_star_empirical) << "; MC local " << fmt("%.5f", s.mc_local) << ", global "
                << fmt("%.5f", s.mc_global) << '\n';
    } else if (cmd == "fed") {
      for (const auto& s : cmd_fed(parse_fed(resolved), out_dir))
        std::cout << method_name(s.method) << ": local test " << fmt("%.4f", s.local_test_acc) << ", new test "
                  << fmt("%.4f", s.new_test_acc) << ", params communicated " << s.params_communicated << '\n';
    } else if (cmd == "hetero") {
      for (const auto& r : cmd_hetero(parse_hetero(resolved), out_dir))
        std::cout << method_name(r.method) << " C=" << fmt("%.2f", r.finetune_participation) << ": normal "
                  << fmt("%.4f", r.result.normal_before) << " -> " << fmt("%.4f", r.result.normal_after)
                  << ", rotated " << fmt("%.4f", r.result.rotated_before) << " -> "
                  << fmt("%.4f", r.result.rotated_after) << '\n';
    } else {
      for (const auto& v : cmd_fair(parse_fair(resolved), out_dir)) {
        double acc = 0.0, adv = 0.0, probe = 0.0;
        for (const auto& r : v.runs) {
          acc += r.classifier_accuracy / v.runs.size();
          adv += r.adversary_auc / v.runs.size();
          probe += r.probe_auc / v.runs.size();
        }
        std::cout << fair::variant_name(v.variant) << ": accuracy " << fmt("%.4f", acc) << ", adversary AUC "
                  << fmt("%.4f", adv) << ", probe AUC " << fmt("%.4f", probe) << '\n';
      }
    }
    return exit_code::ok;
  } catch (const Error& e) {
    std::cerr << "lgfed: " << e.what() << '\n';
    switch (e.kind()) {
      case Error::Kind::usage: return exit_code::usage;
      case Error::Kind::io: return exit_code::io;
      case Error::Kind::numeric: return exit_code::numeric;
      case Error::Kind::data: return exit_code::data;
      case Error::Kind::internal: return exit_code::internal;
    }
    return exit_code::internal;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "lgfed: " << e.what() << '\n';
    return exit_code::io;
  } catch (const std::exception& e) {
    std::cerr << "lgfed: internal error: " << e.what() << '\n';
    return exit_code::internal;
  }
}

}  // namespace lgfed::cli
