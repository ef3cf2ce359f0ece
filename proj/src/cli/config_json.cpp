#include "lgfed/cli/config.hpp"

#include <fstream>
#include <set>

#include "lgfed/common/error.hpp"

namespace lgfed::cli {

namespace {

// Reads known keys from one JSON object and rejects the rest.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(label(key) + ": " + e.what());
    }
  }

  void get_optional(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    double v = 0.0;
    get(key, v);
    out = v;
  }

  void get_path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  Reader child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return Reader(it == j_.end() ? empty() : *it, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown key '" + label(item.key()) + "'");
  }

  std::string label(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  static const Json& empty() {
    static const Json e = Json::object();
    return e;
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

theory::InputDist parse_input_dist(const std::string& s) {
  if (s == "gaussian_iso") return theory::InputDist::gaussian_iso;
  if (s == "uniform_pm1") return theory::InputDist::uniform_pm1;
  throw ConfigError("input_dist must be gaussian_iso or uniform_pm1, got '" + s + "'");
}

std::string input_dist_name(theory::InputDist d) {
  return d == theory::InputDist::gaussian_iso ? "gaussian_iso" : "uniform_pm1";
}

theory::DeviceVariance parse_device_variance(const std::string& s) {
  if (s == "per_coordinate") return theory::DeviceVariance::per_coordinate;
  if (s == "total") return theory::DeviceVariance::total;
  throw ConfigError("device_variance must be per_coordinate or total, got '" + s + "'");
}

std::string device_variance_name(theory::DeviceVariance v) {
  return v == theory::DeviceVariance::per_coordinate ? "per_coordinate" : "total";
}

data::PartitionMode parse_partition_mode(const std::string& s) {
  if (s == "shard") return data::PartitionMode::shard_noniid;
  if (s == "iid") return data::PartitionMode::iid;
  throw ConfigError("partition mode must be shard or iid, got '" + s + "'");
}

std::string partition_mode_name(data::PartitionMode m) { return m == data::PartitionMode::iid ? "iid" : "shard"; }

fed::NewTestMode parse_new_test_mode(const std::string& s) {
  if (s == "logit_ensemble") return fed::NewTestMode::logit_ensemble;
  if (s == "weight_average") return fed::NewTestMode::weight_average;
  throw ConfigError("new_test_mode must be logit_ensemble or weight_average, got '" + s + "'");
}

std::string new_test_mode_name(fed::NewTestMode m) {
  return m == fed::NewTestMode::logit_ensemble ? "logit_ensemble" : "weight_average";
}

void read_sgd(Reader& r, nn::SgdConfig& sgd) {
  r.get("learning_rate", sgd.learning_rate);
  r.get("momentum", sgd.momentum);
  r.get("lr_decay", sgd.lr_decay);
  require(sgd.learning_rate >= 0.0, r.label("learning_rate") + " must be nonnegative");
  require(sgd.momentum >= 0.0 && sgd.momentum < 1.0, r.label("momentum") + " must be in [0, 1)");
  require(sgd.lr_decay >= 0.0, r.label("lr_decay") + " must be nonnegative");
}

void check_participation(double c, const std::string& label) {
  require(c >= 0.0 && c <= 1.0, label + " must be in [0, 1]");
}

void parse_fed_into(Reader& top, FedExperiment& c) {
  top.get("seed", c.seed);
  top.get("threads", c.threads);
  {
    auto r = top.child("dataset");
    auto& d = c.dataset;
    r.get("source", d.source);
    r.get_path("dir", d.dir);
    r.get("train_rows", d.train_rows);
    r.get("new_test_rows", d.new_test_rows);
    r.get("norm_mean", d.normalization.mean);
    r.get("norm_std", d.normalization.stddev);
    r.get("classes", d.classes);
    r.get("dim", d.dim);
    r.get("rows_per_class", d.rows_per_class);
    r.get("noise", d.noise);
    r.finish();
    require(d.source == "mnist" || d.source == "blobs", "dataset.source must be mnist or blobs");
    require(d.normalization.stddev > 0.0, "dataset.norm_std must be positive");
    require(d.classes >= 2 && d.dim > 0, "blobs need at least 2 classes and a positive dim");
  }
  {
    auto r = top.child("partition");
    std::string mode = partition_mode_name(c.partition.mode);
    r.get("mode", mode);
    c.partition.mode = parse_partition_mode(mode);
    r.get("devices", c.partition.devices);
    r.get("classes_per_device", c.partition.classes_per_device);
    r.get("validation", c.partition.ratios.validation);
    r.get("test", c.partition.ratios.test);
    r.finish();
    require(c.partition.devices > 0, "partition.devices must be positive");
  }
  {
    auto r = top.child("model");
    r.get("widths", c.widths);
    r.get("hidden_dropout", c.hidden_dropout);
    r.get("split_index", c.federation.split_index);
    r.finish();
    require(c.widths.size() >= 2, "model.widths needs an input and an output width");
    for (auto w : c.widths) require(w > 0, "model.widths must be positive");
    require(c.federation.split_index < c.widths.size(), "model.split_index must be below the layer count");
  }
  {
    auto r = top.child("federation");
    auto& f = c.federation;
    r.get("participation", f.participation);
    r.get("local_epochs", f.local_epochs);
    r.get("batch_size", f.batch_size);
    r.get("rounds_phase1", f.rounds_phase1);
    r.get("rounds_phase2", f.rounds_phase2);
    r.get_optional("goal_accuracy", f.goal_accuracy);
    r.get("eval_every", f.eval_every);
    std::string mode = new_test_mode_name(f.new_test_mode);
    r.get("new_test_mode", mode);
    f.new_test_mode = parse_new_test_mode(mode);
    read_sgd(r, f.sgd);
    r.finish();
    check_participation(f.participation, "federation.participation");
    require(f.batch_size > 0, "federation.batch_size must be positive");
  }
  {
    std::vector<std::string> names;
    for (auto m : c.methods) names.push_back(method_name(m));
    top.get("methods", names);
    c.methods.clear();
    for (const auto& n : names) c.methods.push_back(parse_method(n));
    require(!c.methods.empty(), "methods must not be empty");
  }
  {
    auto r = top.child("mtl");
    r.get("lambda1", c.mtl_lambda1);
    r.get("lambda2", c.mtl_lambda2);
    r.finish();
  }
  top.get("save_models", c.save_models);
  {
    auto r = top.child("ledger_only");
    r.get("enabled", c.ledger_only.enabled);
    r.get("params_full", c.ledger_only.params_full);
    r.get("params_global", c.ledger_only.params_global);
    r.finish();
  }
  c.partition.seed = c.seed;
  c.federation.seed = c.seed;
  c.federation.threads = c.threads;
  require(c.threads > 0, "threads must be positive");
}

Json fed_json(const FedExperiment& c) {
  const auto& d = c.dataset;
  const auto& f = c.federation;
  Json methods = Json::array();
  for (auto m : c.methods) methods.push_back(method_name(m));
  return Json{
      {"seed", c.seed},
      {"threads", c.threads},
      {"dataset",
       {{"source", d.source},
        {"dir", d.dir.string()},
        {"train_rows", d.train_rows},
        {"new_test_rows", d.new_test_rows},
        {"norm_mean", d.normalization.mean},
        {"norm_std", d.normalization.stddev},
        {"classes", d.classes},
        {"dim", d.dim},
        {"rows_per_class", d.rows_per_class},
        {"noise", d.noise}}},
      {"partition",
       {{"mode", partition_mode_name(c.partition.mode)},
        {"devices", c.partition.devices},
        {"classes_per_device", c.partition.classes_per_device},
        {"validation", c.partition.ratios.validation},
        {"test", c.partition.ratios.test}}},
      {"model", {{"widths", c.widths}, {"hidden_dropout", c.hidden_dropout}, {"split_index", f.split_index}}},
      {"federation",
       {{"participation", f.participation},
        {"local_epochs", f.local_epochs},
        {"batch_size", f.batch_size},
        {"rounds_phase1", f.rounds_phase1},
        {"rounds_phase2", f.rounds_phase2},
        {"goal_accuracy", f.goal_accuracy ? Json(*f.goal_accuracy) : Json(nullptr)},
        {"eval_every", f.eval_every},
        {"new_test_mode", new_test_mode_name(f.new_test_mode)},
        {"learning_rate", f.sgd.learning_rate},
        {"momentum", f.sgd.momentum},
        {"lr_decay", f.sgd.lr_decay}}},
      {"methods", methods},
      {"mtl", {{"lambda1", c.mtl_lambda1}, {"lambda2", c.mtl_lambda2}}},
      {"save_models", c.save_models},
      {"ledger_only",
       {{"enabled", c.ledger_only.enabled},
        {"params_full", c.ledger_only.params_full},
        {"params_global", c.ledger_only.params_global}}},
  };
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::fedavg: return "fedavg";
    case Method::lg: return "lg";
    case Method::local: return "local";
    case Method::mtl: return "mtl";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "fedavg") return Method::fedavg;
  if (name == "lg") return Method::lg;
  if (name == "local") return Method::local;
  if (name == "mtl") return Method::mtl;
  throw ConfigError("unknown method '" + name + "' (fedavg | lg | local | mtl)");
}

TheoryConfig parse_theory(const Json& j) {
  TheoryConfig c;
  Reader top(j, "");
  top.get("seed", c.seed);
  top.get("threads", c.threads);
  top.get("trials", c.trials);
  top.get("alpha_step", c.alpha_step);
  auto w = top.child("world");
  w.get("d", c.world.d);
  w.get("devices", c.world.devices);
  w.get("n_train", c.world.n_train);
  w.get("n_test", c.world.n_test);
  w.get("rho", c.world.rho);
  w.get("sigma", c.world.sigma);
  std::string dist = input_dist_name(c.world.input_dist), var = device_variance_name(c.world.device_variance);
  w.get("input_dist", dist);
  w.get("device_variance", var);
  c.world.input_dist = parse_input_dist(dist);
  c.world.device_variance = parse_device_variance(var);
  w.finish();
  top.finish();
  require(c.world.d > 0 && c.world.devices > 0 && c.world.n_train > 0 && c.world.n_test > 0,
          "world sizes must be positive");
  require(c.world.rho >= 0.0 && c.world.sigma >= 0.0, "world.rho and world.sigma must be nonnegative");
  require(c.trials > 0, "trials must be positive");
  require(c.alpha_step > 0.0 && c.alpha_step <= 0.05, "alpha_step must be in (0, 0.05]");
  require(c.threads > 0, "threads must be positive");
  return c;
}

Json to_json(const TheoryConfig& c) {
  return Json{{"seed", c.seed},
              {"threads", c.threads},
              {"trials", c.trials},
              {"alpha_step", c.alpha_step},
              {"world",
               {{"d", c.world.d},
                {"devices", c.world.devices},
                {"n_train", c.world.n_train},
                {"n_test", c.world.n_test},
                {"rho", c.world.rho},
                {"sigma", c.world.sigma},
                {"input_dist", input_dist_name(c.world.input_dist)},
                {"device_variance", device_variance_name(c.world.device_variance)}}}};
}

FedExperiment parse_fed(const Json& j) {
  FedExperiment c;
  Reader top(j, "");
  parse_fed_into(top, c);
  top.finish();
  return c;
}

Json to_json(const FedExperiment& c) { return fed_json(c); }

HeteroExperiment parse_hetero(const Json& j) {
  HeteroExperiment c;
  c.base.methods = {Method::fedavg, Method::lg};
  Reader top(j, "");
  parse_fed_into(top, c.base);
  auto h = top.child("hetero");
  h.get("rotation_times", c.rotation_times);
  h.get("new_train", c.new_train);
  h.get("new_test", c.new_test);
  h.get("finetune_participation", c.finetune_participation);
  h.get("rounds", c.rounds);
  h.get("warmup_epochs", c.warmup_epochs);
  h.finish();
  top.finish();
  for (double p : c.finetune_participation) check_participation(p, "hetero.finetune_participation");
  for (auto m : c.base.methods)
    require(m == Method::fedavg || m == Method::lg, "hetero methods must be fedavg or lg");
  require(c.new_train > 0 && c.new_test > 0, "hetero.new_train and hetero.new_test must be positive");
  return c;
}

Json to_json(const HeteroExperiment& c) {
  Json j = fed_json(c.base);
  j["hetero"] = Json{{"rotation_times", c.rotation_times},
                     {"new_train", c.new_train},
                     {"new_test", c.new_test},
                     {"finetune_participation", c.finetune_participation},
                     {"rounds", c.rounds},
                     {"warmup_epochs", c.warmup_epochs}};
  return j;
}

FairExperiment parse_fair(const Json& j) {
  FairExperiment c;
  Reader top(j, "");
  top.get("seed", c.seed);
  top.get("threads", c.threads);
  top.get("source", c.source);
  top.get_path("adult_dir", c.adult_dir);
  top.get("devices", c.devices);
  top.get("seeds", c.seeds);
  {
    auto r = top.child("planted");
    auto& p = c.planted;
    r.get("rows", p.rows);
    r.get("signal_dims", p.signal_dims);
    r.get("protected_dims", p.protected_dims);
    r.get("gamma", p.gamma);
    r.get("label_shift", p.label_shift);
    r.get("label_noise", p.label_noise);
    r.finish();
  }
  auto& f = c.fair;
  {
    auto r = top.child("model");
    r.get("local_widths", f.local_widths);
    r.get("global_widths", f.global_widths);
    r.get("adversary_widths", f.adversary_widths);
    r.get("dropout", f.dropout);
    r.finish();
  }
  {
    auto r = top.child("training");
    r.get("lambda", f.lambda);
    r.get("adversary_steps", f.adversary_steps);
    r.get("rounds", f.rounds);
    r.get("local_epochs", f.local_epochs);
    r.get("pretrain_epochs", f.pretrain_epochs);
    r.get("probe_epochs", f.probe_epochs);
    r.get("participation", f.participation);
    r.get("batch_size", f.batch_size);
    read_sgd(r, f.sgd);
    r.finish();
  }
  {
    std::vector<std::string> names;
    for (auto v : c.variants) names.push_back(fair::variant_name(v));
    top.get("variants", names);
    c.variants.clear();
    for (const auto& n : names) c.variants.push_back(fair::parse_variant(n));
  }
  top.finish();
  f.threads = c.threads;
  require(c.source == "planted" || c.source == "adult", "source must be planted or adult");
  require(c.devices > 0 && c.seeds > 0, "devices and seeds must be positive");
  require(f.lambda >= 0.0, "training.lambda must be nonnegative");
  require(f.adversary_steps > 0, "training.adversary_steps must be positive");
  require(f.batch_size > 0, "training.batch_size must be positive");
  require(f.local_widths.size() >= 2 && f.global_widths.size() >= 2 && f.adversary_widths.size() >= 2,
          "model widths need at least two entries");
  check_participation(f.participation, "training.participation");
  require(!c.variants.empty(), "variants must not be empty");
  require(c.threads > 0, "threads must be positive");
  return c;
}

Json to_json(const FairExperiment& c) {
  const auto& f = c.fair;
  const auto& p = c.planted;
  Json variants = Json::array();
  for (auto v : c.variants) variants.push_back(fair::variant_name(v));
  return Json{{"seed", c.seed},
              {"threads", c.threads},
              {"source", c.source},
              {"adult_dir", c.adult_dir.string()},
              {"devices", c.devices},
              {"seeds", c.seeds},
              {"planted",
               {{"rows", p.rows},
                {"signal_dims", p.signal_dims},
                {"protected_dims", p.protected_dims},
                {"gamma", p.gamma},
                {"label_shift", p.label_shift},
                {"label_noise", p.label_noise}}},
              {"model",
               {{"local_widths", f.local_widths},
                {"global_widths", f.global_widths},
                {"adversary_widths", f.adversary_widths},
                {"dropout", f.dropout}}},
              {"training",
               {{"lambda", f.lambda},
                {"adversary_steps", f.adversary_steps},
                {"rounds", f.rounds},
                {"local_epochs", f.local_epochs},
                {"pretrain_epochs", f.pretrain_epochs},
                {"probe_epochs", f.probe_epochs},
                {"participation", f.participation},
                {"batch_size", f.batch_size},
                {"learning_rate", f.sgd.learning_rate},
                {"momentum", f.sgd.momentum},
                {"lr_decay", f.sgd.lr_decay}}},
              {"variants", variants}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::filesystem::path default_data_dir() { return LGFED_DEFAULT_DATA_DIR; }

}  // namespace lgfed::cli
