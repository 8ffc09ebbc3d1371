#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pdt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = pdt::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pdt_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("train writes checkpoint, curve with one row per episode, and resolved config") {
  const auto dir = scratch("train");
  auto r = cli({"train", "--env", "component", "--seed", "1", "--episodes", "25", "--out", dir.string()});
  REQUIRE(r.code == pdt::cli::kExitOk);
  CHECK(fs::exists(dir / "checkpoint.json"));
  const auto curve = read_csv(dir / "curve.csv");
  REQUIRE(curve.size() == 26);
  CHECK(curve[0] == std::vector<std::string>{"episode", "return", "epsilon", "loss_ma"});
  CHECK(curve[25][0] == "24");

  const std::string resolved = slurp(dir / "resolved_config.txt");
  for (const char* key : {"seed = 1", "train.episodes = 25", "train.learning_rate = 0.001", "train.batch_size = 64",
                          "train.epsilon_decay_episodes = 12", "env.component.horizon = 10",
                          "env.component.theta_good = 0.99", "train.reward_scale = 1e-06"})
    CHECK_MESSAGE(resolved.find(key) != std::string::npos, key);
}

TEST_CASE("train reruns are byte-identical") {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  for (const auto& dir : {a, b})
    REQUIRE(cli({"train", "--env", "component", "--episodes", "20", "--seed", "3", "--out", dir.string()}).code == 0);
  CHECK(slurp(a / "curve.csv") == slurp(b / "curve.csv"));
  CHECK(slurp(a / "checkpoint.json") == slurp(b / "checkpoint.json"));
  const auto c = scratch("rerun_c");
  REQUIRE(cli({"train", "--env", "component", "--episodes", "20", "--seed", "4", "--out", c.string()}).code == 0);
  CHECK(slurp(a / "curve.csv") != slurp(c / "curve.csv"));
}

TEST_CASE("config file values apply and command-line flags override them") {
  const auto dir = scratch("config");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# small run\n[train]\nepisodes = 7\nbatch_size = 8\n[env.component]\nencoding = compressed\n";
  }
  auto r = cli({"train", "--config", (dir / "run.cfg").string(), "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  CHECK(read_csv(dir / "a" / "curve.csv").size() == 8);
  CHECK(slurp(dir / "a" / "checkpoint.json").find("\"compressed\"") != std::string::npos);
  r = cli({"train", "--config", (dir / "run.cfg").string(), "--episodes", "4", "--out", (dir / "b").string()});
  REQUIRE(r.code == 0);
  CHECK(read_csv(dir / "b" / "curve.csv").size() == 5);
}

TEST_CASE("reliability checkpoint round-trips into eval") {
  const auto dir = scratch("reliability");
  REQUIRE(cli({"train", "--env", "reliability", "--episodes", "3", "--out", (dir / "t").string()}).code == 0);
  auto r = cli({"eval", "--env", "reliability", "--checkpoint", (dir / "t" / "checkpoint.json").string(), "--episodes",
                "6", "--out", (dir / "e").string()});
  REQUIRE(r.code == 0);
  const auto rows = read_csv(dir / "e" / "eval_episodes.csv");
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == std::vector<std::string>{"seed", "success", "cost", "measurement", "fe", "lab"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const int actions = std::stoi(rows[i][3]) + std::stoi(rows[i][4]) + std::stoi(rows[i][5]);
    CHECK(actions >= 1);
    CHECK(actions <= 40);
  }
  // A component checkpoint is rejected for the reliability env.
  REQUIRE(cli({"train", "--env", "component", "--episodes", "2", "--out", (dir / "c").string()}).code == 0);
  r = cli({"eval", "--env", "reliability", "--checkpoint", (dir / "c" / "checkpoint.json").string(), "--out",
           (dir / "x").string()});
  CHECK(r.code == pdt::cli::kExitRuntime);
}

TEST_CASE("missing checkpoints are runtime failures") {
  const auto dir = scratch("missing");
  auto r = cli({"eval", "--env", "component", "--checkpoint", (dir / "nope.json").string(), "--out", dir.string()});
  CHECK(r.code == pdt::cli::kExitRuntime);
  CHECK(r.err.find("MissingCheckpoint") != std::string::npos);
  r = cli({"compare", "--env", "reliability", "--out", dir.string()});
  CHECK(r.code == pdt::cli::kExitRuntime);
  CHECK(r.err.find("MissingCheckpoint") != std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(cli({}).code == pdt::cli::kExitUsage);
  CHECK(cli({"fly"}).code == pdt::cli::kExitUsage);
  CHECK(cli({"train", "--bogus"}).code == pdt::cli::kExitUsage);
  CHECK(cli({"oracle", "--env", "pipeline"}).code == pdt::cli::kExitUsage);
  CHECK(cli({"oracle", "--env", "reliability"}).code == pdt::cli::kExitUsage);
  CHECK(cli({"eval", "--env", "component", "--policy", "benchmark"}).code == pdt::cli::kExitUsage);
  CHECK(cli({"--help"}).code == pdt::cli::kExitOk);
}

TEST_CASE("invalid config values are runtime failures") {
  const auto dir = scratch("badcfg");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "[env.component]\ntheta_good = 1.5\n";
  }
  auto r = cli({"oracle", "--config", (dir / "bad.cfg").string(), "--out", dir.string()});
  CHECK(r.code == pdt::cli::kExitRuntime);
  CHECK(cli({"oracle", "--config", (dir / "absent.cfg").string(), "--out", dir.string()}).code ==
        pdt::cli::kExitRuntime);
}

TEST_CASE("oracle writes one row per reachable state") {
  const auto dir = scratch("oracle");
  REQUIRE(cli({"oracle", "--out", dir.string()}).code == 0);
  const auto rows = read_csv(dir / "value_table.csv");
  CHECK(rows.size() == 286 + 1);
  CHECK(rows[0] == std::vector<std::string>{"n_success", "n_fail", "days_left", "value", "action"});
  CHECK(slurp(dir / "oracle_summary.json").find("\"states\": 286") != std::string::npos);
}

TEST_CASE("output directory falls back to the environment variable") {
  const auto dir = scratch("envvar");
  ::setenv(pdt::cli::kOutDirVariable, dir.string().c_str(), 1);
  const int code = cli({"oracle", "--constrained"}).code;
  ::unsetenv(pdt::cli::kOutDirVariable);
  CHECK(code == 0);
  CHECK(fs::exists(dir / "value_table.csv"));
}

TEST_CASE("component compare: fixed histogram edges and oracle dominance") {
  const auto dir = scratch("compare");
  REQUIRE(cli({"train", "--env", "component", "--episodes", "30", "--out", (dir / "u").string()}).code == 0);
  REQUIRE(cli({"train", "--env", "component", "--constrained", "--episodes", "30", "--out", (dir / "c").string()})
              .code == 0);
  const std::vector<std::string> args = {"compare",
                                         "--env",
                                         "component",
                                         "--episodes",
                                         "300",
                                         "--checkpoint",
                                         (dir / "u" / "checkpoint.json").string(),
                                         "--constrained-checkpoint",
                                         (dir / "c" / "checkpoint.json").string(),
                                         "--out"};
  auto with_out = [&](const fs::path& out) {
    auto a = args;
    a.push_back(out.string());
    return a;
  };
  REQUIRE(cli(with_out(dir / "x")).code == 0);

  const auto hist = read_csv(dir / "x" / "compare_histogram.csv");
  REQUIRE(hist.size() >= 2);
  CHECK(hist[0] == std::vector<std::string>{"bin_lo", "bin_hi", "random", "dqn", "dqn_constrained", "oracle"});
  CHECK(std::stod(hist[1][0]) == -1e7);
  CHECK(std::stod(hist.back()[1]) == 1e7);
  for (std::size_t col = 2; col < 6; ++col) {
    long total = 0;
    for (std::size_t i = 1; i < hist.size(); ++i) total += std::stol(hist[i][col]);
    CHECK(total == 300);  // every return of the game lies inside [-1e7, 1e7]
  }

  const auto summary = read_csv(dir / "x" / "compare_summary.csv");
  REQUIRE(summary.size() == 5);
  const double oracle_mean = std::stod(summary[4][2]);
  const double oracle_se = std::stod(summary[4][4]);
  CHECK(summary[4][0] == "oracle");
  for (std::size_t i = 1; i < 4; ++i) {
    const double se = std::stod(summary[i][4]);
    CHECK(oracle_mean >= std::stod(summary[i][2]) - 3.0 * std::sqrt(se * se + oracle_se * oracle_se));
  }
  CHECK(read_csv(dir / "x" / "compare_episodes.csv").size() == 4 * 300 + 1);

  // Unconstrained checkpoint in the constrained slot is rejected.
  auto swapped = with_out(dir / "y");
  swapped[8] = (dir / "u" / "checkpoint.json").string();
  CHECK(cli(swapped).code == pdt::cli::kExitRuntime);

  REQUIRE(cli(with_out(dir / "z")).code == 0);
  for (const char* f : {"compare_summary.csv", "compare_histogram.csv", "compare_episodes.csv"})
    CHECK(slurp(dir / "x" / f) == slurp(dir / "z" / f));
}
