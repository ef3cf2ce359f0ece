#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lgfed/data/idx.hpp"
#include "lgfed/data/partition.hpp"
#include "lgfed/fair/adversarial.hpp"
#include "lgfed/fair/planted.hpp"
#include "lgfed/fed/algorithms.hpp"
#include "lgfed/fed/hetero.hpp"
#include "lgfed/theory/linear_world.hpp"

namespace lgfed::cli {

using Json = nlohmann::json;

struct TheoryConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  theory::WorldParams world;
  std::size_t trials = 100;
  double alpha_step = 0.05;
};

// "mnist": IDX files under dir. "blobs": Gaussian class clusters, for quick runs.
struct DatasetConfig {
  std::string source = "mnist";
  std::filesystem::path dir;  // empty: the build's data directory + "/mnist"
  std::size_t train_rows = 0;     // rows of the train file used for federation, 0 = all
  std::size_t new_test_rows = 0;  // rows of the test file held out for the new test, 0 = all
  data::Normalization normalization{0.1307, 0.3081};
  // blobs only
  std::size_t classes = 10;
  std::size_t dim = 20;
  std::size_t rows_per_class = 200;
  double noise = 1.0;
};

enum class Method { fedavg, lg, local, mtl };

// Ledger-only runs count parameters without training; counts default to the model widths.
struct LedgerOnly {
  bool enabled = false;
  std::uint64_t params_full = 0;
  std::uint64_t params_global = 0;
};

struct FedExperiment {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  DatasetConfig dataset;
  data::PartitionPlan partition;
  std::vector<nn::Index> widths{784, 128, 64, 64, 32, 10};
  double hidden_dropout = 0.0;
  fed::FederationConfig federation;
  std::vector<Method> methods{Method::fedavg, Method::lg, Method::local};
  double mtl_lambda1 = 0.01;
  double mtl_lambda2 = 0.0;
  bool save_models = true;
  LedgerOnly ledger_only;
};

struct HeteroExperiment {
  FedExperiment base;
  int rotation_times = 1;
  std::size_t new_train = 3000;
  std::size_t new_test = 500;
  std::vector<double> finetune_participation{0.0, 0.1};
  std::size_t rounds = 1;
  std::size_t warmup_epochs = 1;
};

struct FairExperiment {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string source = "planted";  // or "adult"
  fair::PlantedConfig planted;
  std::filesystem::path adult_dir;  // empty: the build's data directory + "/adult"
  std::size_t devices = 10;
  fair::FairConfig fair;
  std::vector<fair::FairVariant> variants{fair::FairVariant::fedavg, fair::FairVariant::lg,
                                          fair::FairVariant::lg_adv};
  std::size_t seeds = 1;
};

std::string method_name(Method m);
Method parse_method(const std::string& name);

// Missing keys keep their defaults; unknown keys are configuration errors.
TheoryConfig parse_theory(const Json& j);
FedExperiment parse_fed(const Json& j);
HeteroExperiment parse_hetero(const Json& j);
FairExperiment parse_fair(const Json& j);

// Fully resolved form, every field present.
Json to_json(const TheoryConfig& c);
Json to_json(const FedExperiment& c);
Json to_json(const HeteroExperiment& c);
Json to_json(const FairExperiment& c);

Json read_json_file(const std::filesystem::path& path);

std::filesystem::path default_data_dir();

}  // namespace lgfed::cli
