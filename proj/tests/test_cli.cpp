#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "lgfed/cli/commands.hpp"
#include "lgfed/cli/presets.hpp"
#include "lgfed/common/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "lgfed_cli_test";

std::string binary() {
  const char* p = std::getenv("LGFED_CLI");
  REQUIRE_MESSAGE(p != nullptr, "LGFED_CLI must point at the lgfed executable");
  return p;
}

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Result run(const std::string& args) {
  fs::create_directories(kTmp);
  const auto so = kTmp / "stdout.txt", se = kTmp / "stderr.txt";
  const std::string cmd = binary() + " " + args + " >" + so.string() + " 2>" + se.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(so);
  r.err = slurp(se);
  return r;
}

fs::path fresh(const std::string& name) {
  const auto p = kTmp / name;
  fs::remove_all(p);
  return p;
}

fs::path write_config(const std::string& name, const json& j) {
  fs::create_directories(kTmp);
  const auto p = kTmp / name;
  std::ofstream(p) << j.dump();
  return p;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_CASE("presets list and usage errors") {
  const auto r = run("presets");
  CHECK(r.code == 0);
  for (const char* name : {"fig2a", "fig2b", "mnist_desk", "cifar_full_lg", "adult", "planted"})
    CHECK(r.out.find(name) != std::string::npos);
  CHECK(run("").code == lgfed::cli::exit_code::usage);
  CHECK(run("bogus").code == lgfed::cli::exit_code::usage);
  CHECK(run("theory --preset nope --out " + fresh("x").string()).code == lgfed::cli::exit_code::usage);
  CHECK(run("theory --preset fig2a").code == lgfed::cli::exit_code::usage);  // no --out
  const auto bad = write_config("bad.json", {{"world", {{"dd", 3}}}});
  const auto rb = run("theory --config " + bad.string() + " --out " + fresh("bad").string());
  CHECK(rb.code == lgfed::cli::exit_code::usage);
  CHECK(rb.err.find("world.dd") != std::string::npos);
  const auto neg = write_config("neg.json", {{"world", {{"sigma", -1.0}}}});
  CHECK(run("theory --config " + neg.string() + " --out " + fresh("neg").string()).code ==
        lgfed::cli::exit_code::usage);
  CHECK(run("fed --preset blobs_quick --trials 3 --out " + fresh("t").string()).code == lgfed::cli::exit_code::usage);
}

TEST_CASE("theory output, single trial and byte reproducibility") {
  const auto small = write_config("theory.json", {{"world", {{"devices", 5}, {"n_train", 100}, {"n_test", 50}}}});
  const std::string base = "theory --preset fig2a --config " + small.string() + " --seed 4 ";
  const auto a = fresh("theory_a"), b = fresh("theory_b"), one = fresh("theory_one");
  REQUIRE(run(base + "--trials 3 --out " + a.string()).code == 0);
  REQUIRE(run(base + "--trials 3 --threads 2 --out " + b.string()).code == 0);
  for (const char* f : {"curve.csv", "summary.json"}) CHECK(slurp(a / f) == slurp(b / f));
  CHECK(read_json(b / "config.json")["threads"] == 2);
  CHECK(read_json(a / "config.json")["world"]["rho"].get<double>() == doctest::Approx(0.1));
  CHECK(read_json(a / "config.json")["world"]["devices"].get<int>() == 5);

  REQUIRE(run(base + "--trials 1 --out " + one.string()).code == 0);
  std::istringstream csv(slurp(one / "curve.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "alpha,mc_mean,mc_std,closed_form");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1), c3 = line.find(',', c2 + 1);
    CHECK(std::stod(line.substr(c2 + 1, c3 - c2 - 1)) == 0.0);
  }
  CHECK(rows == 21);
  const auto s = read_json(one / "summary.json");
  CHECK(s.contains("alpha_star_closed_form"));
  CHECK(s.contains("alpha_star_empirical"));
}

TEST_CASE("config echo matches --print-config") {
  const auto p = run("fed --preset blobs_quick --seed 9 --print-config");
  REQUIRE(p.code == 0);
  const auto printed = json::parse(p.out);
  CHECK(printed["seed"] == 9);
  CHECK(printed["federation"]["rounds_phase1"] == 10);
  // the echoed config re-parses to itself
  CHECK(lgfed::cli::to_json(lgfed::cli::parse_fed(printed)) == printed);
  const auto f = write_config("echo.json", printed);
  const auto again = run("fed --config " + f.string() + " --print-config");
  CHECK(json::parse(again.out) == printed);
}

TEST_CASE("fed methods, degenerate split, ledgers and thread invariance") {
  const auto cfg0 = write_config("split0.json", {{"model", {{"split_index", 0}}}, {"methods", {"fedavg", "lg", "local"}}});
  const auto a = fresh("fed_a"), b = fresh("fed_b");
  REQUIRE(run("fed --preset blobs_quick --config " + cfg0.string() + " --out " + a.string()).code == 0);
  REQUIRE(run("fed --preset blobs_quick --config " + cfg0.string() + " --threads 3 --out " + b.string()).code == 0);
  for (const char* f : {"summary.json", "fedavg/history.csv", "lg/history.csv", "local/history.csv",
                        "fedavg/models/global.bin", "lg/ledger.json", "partition.json"})
    CHECK(slurp(a / f) == slurp(b / f));
  CHECK(slurp(a / "fedavg/models/global.bin") == slurp(a / "lg/models/global.bin"));
  const auto s = read_json(a / "summary.json");
  REQUIRE(s.size() == 3);
  CHECK(s[0]["local_test_acc"] == s[1]["local_test_acc"]);
  CHECK(s[0]["new_test_acc"] == s[1]["new_test_acc"]);
  CHECK(s[0]["params_communicated"] == s[1]["params_communicated"]);
  CHECK(s[2]["params_communicated"] == 0);
  CHECK(read_json(a / "local/ledger.json")["total"] == 0);
  CHECK(fs::exists(a / "config.json"));
  CHECK(fs::exists(a / "local/models/local_000.bin"));
}

TEST_CASE("full-scale ledgers without training") {
  struct Case {
    const char* preset;
    double total, unit;
  };
  for (auto c : {Case{"cifar_full_fedavg", 12.7, 1e9}, Case{"cifar_full_lg", 8.5, 1e9},
                 Case{"mnist_full_fedavg", 5.6, 1e10}, Case{"mnist_full_lg", 2.9, 1e10}}) {
    const auto out = fresh(c.preset);
    REQUIRE(run(std::string("fed --preset ") + c.preset + " --out " + out.string()).code == 0);
    const auto s = read_json(out / "summary.json");
    CHECK(std::round(s[0]["params_communicated"].get<double>() / c.unit * 10) / 10 == doctest::Approx(c.total));
  }
  const auto out = fresh("mnist_local");
  REQUIRE(run("fed --preset mnist_full_local --out " + out.string()).code == 0);
  CHECK(read_json(out / "summary.json")[0]["params_communicated"] == 0);
}

TEST_CASE("missing dataset is an I/O error naming the path") {
  const auto cfg = write_config("nodata.json", {{"dataset", {{"dir", "/nonexistent/mnist"}}}});
  const auto r = run("fed --preset mnist_desk --config " + cfg.string() + " --out " + fresh("nodata").string());
  CHECK(r.code == lgfed::cli::exit_code::io);
  CHECK(r.err.find("/nonexistent/mnist/train-") != std::string::npos);
  const auto cfg2 = write_config("noadult.json", {{"adult_dir", "/nonexistent/adult"}});
  const auto r2 = run("fair --preset adult --config " + cfg2.string() + " --out " + fresh("noadult").string());
  CHECK(r2.code == lgfed::cli::exit_code::io);
  CHECK(r2.err.find("/nonexistent/adult") != std::string::npos);
}

TEST_CASE("hetero grid") {
  const auto out = fresh("hetero");
  REQUIRE(run("hetero --preset blobs_quick --out " + out.string()).code == 0);
  const auto j = read_json(out / "hetero.json");
  REQUIRE(j.size() == 4);
  std::set<std::pair<std::string, double>> cells;
  for (const auto& row : j) {
    cells.insert({row["method"].get<std::string>(), row["finetune_participation"].get<double>()});
    for (const char* k : {"normal_before", "rotated_before", "normal_after", "rotated_after"}) {
      CHECK(row[k].get<double>() >= 0.0);
      CHECK(row[k].get<double>() <= 1.0);
    }
  }
  CHECK(cells == std::set<std::pair<std::string, double>>{{"fedavg", 0.0}, {"fedavg", 0.1}, {"lg", 0.0}, {"lg", 0.1}});
  // unrotated new device from the same distribution: the shared model scores it like the originals do
  CHECK(std::abs(j[0]["normal_before"].get<double>() - j[0]["rotated_before"].get<double>()) < 0.1);
  CHECK(slurp(out / "hetero.csv").rfind("method,finetune_participation,normal_before", 0) == 0);
}

TEST_CASE("fair reports per variant with seed statistics") {
  const auto out = fresh("fair");
  REQUIRE(run("fair --preset planted_quick --seeds 3 --out " + out.string()).code == 0);
  const auto j = read_json(out / "fair.json");
  REQUIRE(j["variants"].size() == 3);
  for (const auto& v : j["variants"]) {
    CHECK(v["runs"].size() == 3);
    for (const char* k : {"classifier_accuracy", "classifier_auc", "adversary_auc", "probe_auc"}) {
      CHECK(v["mean"].contains(k));
      CHECK(v["std"][k].get<double>() >= 0.0);
      for (const auto& r : v["runs"]) CHECK((r[k].get<double>() >= 0.0 && r[k].get<double>() <= 1.0));
    }
  }
  CHECK(j["variants"][1]["variant"] == "lg");
  CHECK(j["variants"][1]["description"].get<std::string>().find("without penalizing") != std::string::npos);
  CHECK(j["variants"][1]["runs"][0]["lambda"] == 0.0);
  const auto again = fresh("fair2");
  REQUIRE(run("fair --preset planted_quick --seeds 3 --out " + again.string()).code == 0);
  CHECK(slurp(out / "fair.json") == slurp(again / "fair.json"));
}

TEST_CASE("in-process config resolution") {
  using namespace lgfed::cli;
  const auto j = resolve_config("theory", "fig2b", {}, Overrides{7, 2, 11});
  const auto c = parse_theory(j);
  CHECK(c.seed == 7);
  CHECK(c.threads == 2);
  CHECK(c.trials == 11);
  CHECK(c.world.rho == doctest::Approx(0.06));
  CHECK(c.world.sigma == doctest::Approx(1.5));
  CHECK_THROWS_AS(find_preset("fed", "fig2a"), lgfed::ArgumentError);
  CHECK_THROWS_AS(parse_fed(json{{"methods", {"fedprox"}}}), lgfed::ConfigError);
  CHECK_THROWS_AS(parse_fair(json{{"training", {{"lambda", -1.0}}}}), lgfed::ConfigError);
  const auto fj = to_json(parse_fair(find_preset("fair", "planted").config));
  CHECK(fj["training"]["lambda"] == 1.0);
}
