#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lgfed/cli/config.hpp"
#include "lgfed/data/dataset.hpp"

namespace lgfed::cli {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> trials;  // theory trials, fairness seeds
};

/// preset, then config file, then flags; later sources win key by key.
Json resolve_config(const std::string& command, const std::string& preset, const std::filesystem::path& config_file,
                    const Overrides& overrides);

// Every command writes config.json (resolved) into `out` before anything else.

struct TheorySummary {
  double alpha_star_closed_form = 0.0;
  double alpha_star_empirical = 0.0;
  double mc_local = 0.0, mc_global = 0.0, mc_at_alpha_star = 0.0, mc_std_at_alpha_star = 0.0;
  theory::McCurve curve;
};
TheorySummary cmd_theory(const TheoryConfig& config, const std::filesystem::path& out);

struct MethodSummary {
  Method method = Method::fedavg;
  double local_test_acc = -1.0;
  double new_test_acc = -1.0;
  std::uint64_t params_communicated = 0;
  std::uint64_t phase2_params_per_round = 0;
  std::size_t switch_round = 0;
  std::vector<std::string> warnings;
};

/// Federated training data: shards plus the held-out new-test set and the spare pools.
struct FedData {
  std::vector<data::DeviceShard> shards;
  data::Dataset new_test;
  data::Dataset spare_train;  // train-file rows not given to devices
  data::Dataset spare_test;   // test-file rows not in the new test
  std::string audit_json;
};
FedData load_fed_data(const FedExperiment& config);

std::vector<MethodSummary> cmd_fed(const FedExperiment& config, const std::filesystem::path& out);

struct HeteroRow {
  Method method = Method::fedavg;
  double finetune_participation = 0.0;
  fed::HeteroResult result;
};
std::vector<HeteroRow> cmd_hetero(const HeteroExperiment& config, const std::filesystem::path& out);

struct FairVariantSummary {
  fair::FairVariant variant = fair::FairVariant::lg_adv;
  std::vector<fair::FairnessReport> runs;
};
std::vector<FairVariantSummary> cmd_fair(const FairExperiment& config, const std::filesystem::path& out);

/// Parses argv, runs the subcommand, maps errors to exit codes.
int run_cli(int argc, char** argv);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 2;
inline constexpr int io = 3;
inline constexpr int numeric = 4;
inline constexpr int data = 5;
inline constexpr int internal = 6;
}  // namespace exit_code

}  // namespace lgfed::cli
