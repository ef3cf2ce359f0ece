#include "lgfed/cli/presets.hpp"

#include "lgfed/common/error.hpp"

namespace lgfed::cli {

namespace {

Json theory_world(double rho, const char* dist, const char* variance, std::size_t devices) {
  return Json{{"world",
               {{"d", 20},
                {"devices", devices},
                {"n_train", 2000},
                {"n_test", 1000},
                {"rho", rho},
                {"sigma", 1.5},
                {"input_dist", dist},
                {"device_variance", variance}}}};
}

Json with(Json base, const Json& patch) {
  base.merge_patch(patch);
  return base;
}

// 784-512-256-256-128-10, two local layers, E=1, B=10, lr 0.05, momentum 0.5, C=0.1.
Json mnist_full(std::size_t rounds1, std::size_t rounds2, const Json& methods) {
  return Json{{"partition", {{"mode", "shard"}, {"devices", 100}, {"classes_per_device", 2}}},
              {"model", {{"widths", {784, 512, 256, 256, 128, 10}}, {"split_index", 2}}},
              {"federation",
               {{"participation", 0.1},
                {"local_epochs", 1},
                {"batch_size", 10},
                {"learning_rate", 0.05},
                {"momentum", 0.5},
                {"rounds_phase1", rounds1},
                {"rounds_phase2", rounds2},
                {"goal_accuracy", 0.975}}},
              {"methods", methods}};
}

// LeNet-5 counts given as inputs: 64,102 parameters, 2,872 in the federated part.
Json cifar_full(std::size_t rounds1, std::size_t rounds2, const Json& methods) {
  return Json{{"partition", {{"mode", "shard"}, {"devices", 100}, {"classes_per_device", 2}}},
              {"federation",
               {{"participation", 0.1},
                {"local_epochs", 1},
                {"batch_size", 50},
                {"learning_rate", 0.1},
                {"momentum", 0.5},
                {"lr_decay", 0.005},
                {"rounds_phase1", rounds1},
                {"rounds_phase2", rounds2},
                {"goal_accuracy", 0.57}}},
              {"methods", methods},
              {"ledger_only", {{"enabled", true}, {"params_full", 64102}, {"params_global", 2872}}}};
}

// M=20 devices with 2 classes each over the first 12,000 training images.
// Narrower stack and C=0.5 so FedAvg reaches 80% on new test within about a minute.
Json mnist_desk() {
  return Json{{"dataset", {{"source", "mnist"}, {"train_rows", 12000}, {"new_test_rows", 2000}}},
              {"partition", {{"mode", "shard"}, {"devices", 20}, {"classes_per_device", 2}}},
              {"model", {{"widths", {784, 128, 64, 64, 32, 10}}, {"split_index", 2}}},
              {"federation",
               {{"participation", 0.5},
                {"local_epochs", 1},
                {"batch_size", 10},
                {"learning_rate", 0.05},
                {"momentum", 0.5},
                {"rounds_phase1", 60},
                {"rounds_phase2", 40},
                {"goal_accuracy", nullptr}}},
              {"methods", {"fedavg", "lg", "local"}}};
}

std::vector<Preset> build() {
  std::vector<Preset> p;
  const char* uni = "uniform_pm1";
  const char* per = "per_coordinate";
  p.push_back({"fig2a", "theory", "uniform inputs, sigma=1.5, rho=0.1", with(theory_world(0.1, uni, per, 100), {{"trials", 50}})});
  p.push_back({"fig2b", "theory", "uniform inputs, sigma=1.5, rho=0.06", with(theory_world(0.06, uni, per, 100), {{"trials", 50}})});
  for (auto [name, rho] : {std::pair{"rho_sweep_0.5", 0.5}, {"rho_sweep_0.1", 0.1}, {"rho_sweep_0.06", 0.06}, {"rho_sweep_0.02", 0.02}})
    p.push_back({name, "theory", "uniform inputs, sigma=1.5, device variance sweep",
                 with(theory_world(rho, uni, per, 100), {{"trials", 50}})});
  p.push_back({"variance_rates", "theory", "gaussian inputs, rho=0, M=50: pure data-variance rates",
               with(theory_world(0.0, "gaussian_iso", "total", 50), {{"trials", 100}})});
  p.push_back({"alpha_star", "theory", "gaussian inputs, total device variance rho=0.1, M=100",
               with(theory_world(0.1, "gaussian_iso", "total", 100), {{"trials", 100}})});

  p.push_back({"mnist_full_fedavg", "fed", "full-scale MNIST FedAvg budget, 800 rounds (ledger only)",
               with(mnist_full(800, 0, {"fedavg"}), {{"ledger_only", {{"enabled", true}}}})});
  p.push_back({"mnist_full_lg", "fed", "full-scale MNIST LG-FedAvg budget, 400 + 100 rounds (ledger only)",
               with(mnist_full(400, 100, {"lg"}), {{"ledger_only", {{"enabled", true}}}})});
  p.push_back({"mnist_full_local", "fed", "full-scale MNIST local-only budget, 200 rounds (ledger only)",
               with(mnist_full(200, 0, {"local"}), {{"ledger_only", {{"enabled", true}}}})});
  p.push_back({"cifar_full_fedavg", "fed", "full-scale CIFAR-10 FedAvg budget, 1800 rounds (ledger only)",
               cifar_full(1800, 0, {"fedavg"})});
  p.push_back({"cifar_full_lg", "fed", "full-scale CIFAR-10 LG-FedAvg budget, 1200 + 100 rounds (ledger only)",
               cifar_full(1200, 100, {"lg"})});
  p.push_back({"mnist_desk", "fed", "MNIST, 20 devices x 2 classes, 100 rounds", mnist_desk()});
  p.push_back({"blobs_quick", "fed", "synthetic Gaussian blobs, 10 devices, a few seconds",
               Json{{"dataset", {{"source", "blobs"}, {"classes", 6}, {"dim", 16}, {"rows_per_class", 150}}},
                    {"partition", {{"mode", "shard"}, {"devices", 10}, {"classes_per_device", 2}}},
                    {"model", {{"widths", {16, 32, 16, 6}}, {"split_index", 1}}},
                    {"federation",
                     {{"participation", 0.3}, {"batch_size", 10}, {"rounds_phase1", 10}, {"rounds_phase2", 5}}},
                    {"methods", {"fedavg", "lg", "local", "mtl"}}}});

  p.push_back({"mnist_desk", "hetero", "desk MNIST training, then a rotated device with 3000/500 images",
               with(mnist_desk(), {{"methods", {"fedavg", "lg"}},
                                   {"hetero",
                                    {{"rotation_times", 1},
                                     {"new_train", 3000},
                                     {"new_test", 500},
                                     {"finetune_participation", {0.0, 0.1}},
                                     {"rounds", 5},
                                     {"warmup_epochs", 1}}}})});
  p.push_back({"blobs_quick", "hetero", "synthetic blobs, rotation-free new device",
               Json{{"dataset", {{"source", "blobs"}, {"classes", 6}, {"dim", 16}, {"rows_per_class", 150}}},
                    {"partition", {{"mode", "shard"}, {"devices", 10}, {"classes_per_device", 2}}},
                    {"model", {{"widths", {16, 32, 16, 6}}, {"split_index", 1}}},
                    {"federation",
                     {{"participation", 0.3}, {"batch_size", 10}, {"rounds_phase1", 10}, {"rounds_phase2", 5}}},
                    {"methods", {"fedavg", "lg"}},
                    {"hetero", {{"rotation_times", 0}, {"new_train", 200}, {"new_test", 100}, {"rounds", 2}}}}});

  // Tutorial recipe: 93 inputs, [32,32,32] stacks, dropout 0.2, B=32, lr 0.1, momentum 0.5.
  p.push_back({"adult", "fair", "UCI adult, race as protected attribute, 10 devices",
               Json{{"source", "adult"},
                    {"devices", 10},
                    {"seeds", 10},
                    {"model",
                     {{"local_widths", {93, 32, 32}},
                      {"global_widths", {32, 32, 2}},
                      {"adversary_widths", {32, 32, 2}},
                      {"dropout", 0.2}}},
                    {"training",
                     {{"lambda", 1.0},
                      {"rounds", 10},
                      {"local_epochs", 1},
                      {"pretrain_epochs", 10},
                      {"batch_size", 32},
                      {"learning_rate", 0.1},
                      {"momentum", 0.5}}}}});
  p.push_back({"planted", "fair", "planted feature/attribute correlation, 10 devices x 400 rows",
               Json{{"source", "planted"},
                    {"devices", 10},
                    {"seeds", 5},
                    {"planted", {{"rows", 4000}, {"gamma", 0.35}}},
                    {"model",
                     {{"local_widths", {10, 32, 32}},
                      {"global_widths", {32, 32, 2}},
                      {"adversary_widths", {32, 32, 2}},
                      {"dropout", 0.2}}},
                    {"training", {{"lambda", 1.0}, {"adversary_steps", 3}, {"rounds", 200}, {"pretrain_epochs", 10}}}}});
  p.push_back({"planted_quick", "fair", "small planted run for smoke tests",
               Json{{"source", "planted"},
                    {"devices", 4},
                    {"planted", {{"rows", 800}, {"gamma", 0.6}}},
                    {"model",
                     {{"local_widths", {10, 16, 16}}, {"global_widths", {16, 16, 2}}, {"adversary_widths", {16, 16, 2}}}},
                    {"training", {{"rounds", 5}, {"pretrain_epochs", 2}, {"probe_epochs", 5}}}}});
  return p;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = build();
  return all;
}

const Preset& find_preset(const std::string& command, const std::string& name) {
  std::string known;
  for (const auto& p : presets()) {
    if (p.command != command) continue;
    if (p.name == name) return p;
    known += (known.empty() ? "" : ", ") + p.name;
  }
  throw ArgumentError("no " + command + " preset named '" + name + "' (known: " + known + ")");
}

}  // namespace lgfed::cli
