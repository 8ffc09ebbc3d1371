#include "cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pdt/belief_mdp.hpp"
#include "pdt/config.hpp"
#include "pdt/deepsets.hpp"
#include "pdt/dp_oracle.hpp"
#include "pdt/dqn.hpp"
#include "pdt/env_component.hpp"
#include "pdt/env_reliability.hpp"
#include "pdt/error.hpp"

namespace pdt::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string env = "component";
  std::string config_path;
  std::string out_dir;
  std::string checkpoint;
  std::string constrained_checkpoint;
  std::string policy = "dqn";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  bool constrained = false;
  unsigned threads = 1;
};

// Everything a subcommand needs: the parsed flags, the key-value config with
// command-line overrides applied, and the output directory.
struct Run {
  Options opt;
  KeyValueConfig kv;
  fs::path out;
  std::ostream& log;
  std::ostream& err;

  std::uint64_t seed() const { return static_cast<std::uint64_t>(kv.get_int("seed", 1)); }

  std::size_t eval_episodes(std::size_t fallback) const {
    const auto n = kv.get_int("eval.episodes", static_cast<std::int64_t>(fallback));
    if (n < 1) throw ConfigError("eval.episodes must be at least 1");
    return static_cast<std::size_t>(n);
  }

  // Disjoint from training episodes, whose seeds are hashed streams.
  std::uint64_t eval_base_seed() const {
    return static_cast<std::uint64_t>(
        kv.get_int("eval.base_seed", static_cast<std::int64_t>(1'000'000'000ULL + 1'000'000ULL * seed())));
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (out / name).string());
    return f;
  }

  void finish() const {
    for (const auto& [key, value] : kv.unused()) err << "warning: unused config key " << key << "\n";
    auto f = open("resolved_config.txt");
    kv.write_resolved(f);
  }
};

fs::path resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* v = std::getenv(kOutDirVariable); v && *v) return v;
  return "pdt_out";
}

void require_env(const std::string& env) {
  if (env != "component" && env != "reliability")
    throw UsageError("--env must be 'component' or 'reliability'");
}

void require_policy(const std::string& env, const std::string& policy) {
  const bool ok = policy == "dqn" || policy == "random" ||
                  policy == (env == "component" ? "oracle" : "benchmark");
  if (!ok)
    throw UsageError(env == "component" ? "--policy for component must be dqn, random or oracle"
                                        : "--policy for reliability must be dqn, random or benchmark");
}

// ---- checkpoints ---------------------------------------------------------

struct Checkpoint {
  std::string env;
  std::string encoding;
  bool constrained = false;
  nn::DeepSetsNet net;
};

json checkpoint_payload(const std::string& env, const std::string& encoding, bool constrained,
                        const dqn::TrainConfig& tc, const nn::DeepSetsNet& net) {
  return json{{"format", "pdt-dqn"},     {"version", 1},          {"env", env},
              {"encoding", encoding},    {"constrained", constrained}, {"seed", tc.seed},
              {"episodes", tc.episodes}, {"net", net.to_json()}};
}

Checkpoint read_checkpoint(const std::string& path, const std::string& env) {
  if (path.empty()) throw MissingCheckpoint("no checkpoint given");
  const json j = nn::load_checkpoint(path);
  if (j.value("format", "") != "pdt-dqn") throw ConfigError(path + ": not a pdt-dqn checkpoint");
  Checkpoint c{j.at("env").get<std::string>(), j.value("encoding", ""), j.value("constrained", false),
               nn::DeepSetsNet::from_json(j.at("net"))};
  if (c.env != env) throw ConfigError(path + ": trained on env '" + c.env + "', not '" + env + "'");
  return c;
}

// ---- component helpers ---------------------------------------------------

std::string encoding_name(component::Encoding e) { return e == component::Encoding::Set ? "set" : "compressed"; }

component::Config component_config(const KeyValueConfig& kv, bool constrained) {
  component::Config c = component::Config::from(kv);
  c.constrained = c.constrained || constrained;
  return c;
}

component::Config component_config_for(const KeyValueConfig& kv, const Checkpoint& ck) {
  component::Config c = component::Config::from(kv);
  c.encoding = ck.encoding == "compressed" ? component::Encoding::Compressed : component::Encoding::Set;
  c.constrained = ck.constrained;
  return c;
}

std::vector<double> component_edges() { return uniform_edges(-1e7, 1e7, 40); }

struct ComponentRow {
  std::string name;
  EvalSummary summary;
  std::size_t use_failure_episodes = 0;
};

ComponentRow evaluate_component(const std::string& name, const component::Env& env,
                                const Policy<component::State>& policy, std::size_t n, std::uint64_t base,
                                unsigned threads) {
  ComponentRow row{name, {}, 0};
  std::vector<std::uint64_t> seeds;
  std::vector<double> returns;
  std::vector<std::size_t> lengths;
  for_each_episode(
      env, policy, n, base, 1.0,
      [&](std::size_t, const EpisodeRecord<component::State>& r) {
        seeds.push_back(r.seed);
        returns.push_back(r.total_return);
        lengths.push_back(r.length());
        for (const auto& t : r.transitions) {
          if (t.action == static_cast<std::size_t>(component::Action::Use) &&
              t.next_state.belief.n_fail > t.state.belief.n_fail) {
            ++row.use_failure_episodes;
            break;
          }
        }
      },
      threads);
  row.summary = summarize(std::move(seeds), std::move(returns), std::move(lengths), component_edges());
  return row;
}

json component_row_json(const ComponentRow& row) {
  json j = summary_json(row.summary);
  j["policy"] = row.name;
  j["use_failure_rate"] = static_cast<double>(row.use_failure_episodes) / row.summary.returns.size();
  return j;
}

void write_component_rows(const Run& run, const std::string& stem, const std::vector<ComponentRow>& rows) {
  {
    auto f = run.open(stem + "_summary.csv");
    f << "policy,episodes,mean,sd,standard_error,min,max,use_failure_rate\n";
    for (const auto& r : rows) {
      const auto& s = r.summary;
      f << r.name << ',' << s.returns.size() << ',' << format_double(s.mean) << ',' << format_double(s.sd) << ','
        << format_double(s.standard_error()) << ',' << format_double(s.min) << ',' << format_double(s.max) << ','
        << format_double(static_cast<double>(r.use_failure_episodes) / s.returns.size()) << '\n';
    }
  }
  {
    auto f = run.open(stem + "_histogram.csv");
    f << "bin_lo,bin_hi";
    for (const auto& r : rows) f << ',' << r.name;
    f << '\n';
    const auto& edges = rows.front().summary.histogram.edges;
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      f << format_double(edges[b]) << ',' << format_double(edges[b + 1]);
      for (const auto& r : rows) f << ',' << r.summary.histogram.counts[b];
      f << '\n';
    }
  }
  {
    auto f = run.open(stem + "_episodes.csv");
    f << "policy,seed,return,length\n";
    for (const auto& r : rows)
      for (std::size_t i = 0; i < r.summary.returns.size(); ++i)
        f << r.name << ',' << r.summary.seeds[i] << ',' << format_double(r.summary.returns[i]) << ','
          << r.summary.lengths[i] << '\n';
  }
  json j = json::array();
  for (const auto& r : rows) j.push_back(component_row_json(r));
  run.open(stem + "_summary.json") << j.dump(2) << '\n';
}

// ---- reliability helpers -------------------------------------------------

struct ReliabilityEpisode {
  std::uint64_t seed = 0;
  bool success = false;
  double cost = 0.0;
  std::array<int, reliability::kActionCount> counts{};
};

struct ReliabilityRow {
  std::string name;
  std::vector<ReliabilityEpisode> episodes;

  double success_rate() const {
    std::size_t k = 0;
    for (const auto& e : episodes) k += e.success;
    return static_cast<double>(k) / episodes.size();
  }

  std::vector<double> successful_costs() const {
    std::vector<double> v;
    for (const auto& e : episodes)
      if (e.success) v.push_back(e.cost);
    return v;
  }
};

ReliabilityRow evaluate_reliability(const std::string& name, const reliability::Env& env,
                                    const Policy<reliability::State>& policy, std::size_t n, std::uint64_t base,
                                    unsigned threads) {
  ReliabilityRow row{name, {}};
  for_each_episode(
      env, policy, n, base, 1.0,
      [&](std::size_t, const EpisodeRecord<reliability::State>& r) {
        const auto& last = r.transitions.back().next_state;
        row.episodes.push_back({r.seed, last.success(), r.total_return, last.action_counts});
      },
      threads);
  return row;
}

std::vector<double> reliability_edges() { return uniform_edges(-400.0, 0.0, 40); }

json reliability_row_json(const ReliabilityRow& row) {
  const auto costs = row.successful_costs();
  double total = 0.0;
  for (const auto& e : row.episodes) total += e.cost;
  json j{{"policy", row.name},
         {"episodes", row.episodes.size()},
         {"success_rate", row.success_rate()},
         {"successes", costs.size()},
         {"mean_return", total / row.episodes.size()}};
  if (!costs.empty()) {
    const auto s = summarize(std::vector<std::uint64_t>(costs.size(), 0), costs,
                             std::vector<std::size_t>(costs.size(), 0), reliability_edges());
    j["cost_success"] = {{"mean", s.mean}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}};
  }
  return j;
}

void write_reliability_rows(const Run& run, const std::string& stem, const std::vector<ReliabilityRow>& rows) {
  {
    auto f = run.open(stem + "_summary.csv");
    f << "policy,episodes,success_rate,successes,mean_cost_success,sd_cost_success,mean_return\n";
    for (const auto& r : rows) {
      const auto costs = r.successful_costs();
      double total = 0.0;
      for (const auto& e : r.episodes) total += e.cost;
      f << r.name << ',' << r.episodes.size() << ',' << format_double(r.success_rate()) << ',' << costs.size()
        << ',';
      if (costs.empty()) {
        f << ',';
      } else {
        const auto s = summarize(std::vector<std::uint64_t>(costs.size(), 0), costs,
                                 std::vector<std::size_t>(costs.size(), 0));
        f << format_double(s.mean) << ',' << format_double(s.sd);
      }
      f << ',' << format_double(total / r.episodes.size()) << '\n';
    }
  }
  {
    auto f = run.open(stem + "_histogram.csv");
    f << "bin_lo,bin_hi";
    for (const auto& r : rows) f << ',' << r.name;
    f << '\n';
    std::vector<Histogram> hists;
    for (const auto& r : rows) hists.push_back(make_histogram(r.successful_costs(), reliability_edges()));
    const auto& edges = hists.front().edges;
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      f << format_double(edges[b]) << ',' << format_double(edges[b + 1]);
      for (const auto& h : hists) f << ',' << h.counts[b];
      f << '\n';
    }
  }
  {
    auto f = run.open(stem + "_episodes.csv");
    f << "policy,seed,success,cost,measurement,fe,lab\n";
    for (const auto& r : rows)
      for (const auto& e : r.episodes)
        f << r.name << ',' << e.seed << ',' << (e.success ? 1 : 0) << ',' << format_double(e.cost) << ','
          << e.counts[0] << ',' << e.counts[1] << ',' << e.counts[2] << '\n';
  }
  json j = json::array();
  for (const auto& r : rows) j.push_back(reliability_row_json(r));
  run.open(stem + "_summary.json") << j.dump(2) << '\n';
}

// ---- subcommands ---------------------------------------------------------

dqn::TrainConfig train_defaults(const std::string& env, std::uint64_t seed) {
  dqn::TrainConfig d;
  d.seed = seed;
  if (env == "component") {
    d.episodes = 3000;
    d.reward_scale = 1e-6;
  } else {
    d.episodes = 2000;
    d.train_every = 4;
    d.reward_scale = 0.05;
  }
  d.epsilon_decay_episodes = d.episodes / 2;
  return d;
}

template <class Env>
void write_training(const Run& run, const Env& env, const dqn::TrainConfig& tc, const std::string& encoding,
                    bool constrained) {
  const auto result = dqn::train(env, tc);
  nn::save_checkpoint(run.out / "checkpoint.json",
                      checkpoint_payload(run.opt.env, encoding, constrained, tc, result.net));
  auto f = run.open("curve.csv");
  dqn::write_curve_csv(f, result.curve);
  run.log << "trained " << tc.episodes << " episodes, " << result.steps << " steps, " << result.updates
          << " updates\n";
}

void cmd_train(Run& run) {
  if (run.opt.episodes) run.kv.set("train.episodes", std::to_string(*run.opt.episodes));
  const auto tc = dqn::TrainConfig::from(run.kv, "train", train_defaults(run.opt.env, run.seed()));
  if (run.opt.env == "component") {
    const auto cfg = component_config(run.kv, run.opt.constrained);
    write_training(run, component::Env(cfg), tc, encoding_name(cfg.encoding), cfg.constrained);
  } else {
    write_training(run, reliability::Env(reliability::Config::from(run.kv)), tc, "set", false);
  }
}

void cmd_eval(Run& run) {
  if (run.opt.episodes) run.kv.set("eval.episodes", std::to_string(*run.opt.episodes));
  const std::string& policy = run.opt.policy;
  if (run.opt.env == "component") {
    const std::size_t n = run.eval_episodes(1000);
    std::optional<component::Config> cfg;
    Policy<component::State> pol;
    if (policy == "dqn") {
      auto ck = read_checkpoint(run.opt.checkpoint, "component");
      cfg = component_config_for(run.kv, ck);
      pol = dqn::greedy_policy(component::Env(*cfg), std::move(ck.net));
    } else if (policy == "random") {
      cfg = component_config(run.kv, run.opt.constrained);
      pol = dqn::random_policy<component::State>();
    } else if (policy == "oracle") {
      cfg = component_config(run.kv, run.opt.constrained);
      pol = oracle::as_policy(oracle::backward_induction(*cfg, cfg->constrained));
    }
    const auto row = evaluate_component(policy, component::Env(*cfg), pol, n, run.eval_base_seed(), run.opt.threads);
    auto f = run.open("eval_episodes.csv");
    write_episode_csv(f, row.summary);
    auto h = run.open("eval_histogram.csv");
    write_histogram_csv(h, row.summary.histogram);
    run.open("eval_summary.json") << component_row_json(row).dump(2) << '\n';
    run.log << policy << ": mean " << row.summary.mean << " +/- " << row.summary.standard_error() << "\n";
  } else {
    const std::size_t n = run.eval_episodes(200);
    const reliability::Env env(reliability::Config::from(run.kv));
    Policy<reliability::State> pol;
    if (policy == "dqn") {
      pol = dqn::greedy_policy(env, read_checkpoint(run.opt.checkpoint, "reliability").net);
    } else if (policy == "random") {
      pol = dqn::random_policy<reliability::State>();
    } else if (policy == "benchmark") {
      pol = reliability::benchmark_policy();
    }
    const auto row = evaluate_reliability(policy, env, pol, n, run.eval_base_seed(), run.opt.threads);
    auto f = run.open("eval_episodes.csv");
    f << "seed,success,cost,measurement,fe,lab\n";
    for (const auto& e : row.episodes)
      f << e.seed << ',' << (e.success ? 1 : 0) << ',' << format_double(e.cost) << ',' << e.counts[0] << ','
        << e.counts[1] << ',' << e.counts[2] << '\n';
    run.open("eval_summary.json") << reliability_row_json(row).dump(2) << '\n';
    run.log << policy << ": success rate " << row.success_rate() << "\n";
  }
}

void cmd_oracle(Run& run) {
  const auto cfg = component_config(run.kv, run.opt.constrained);
  const auto table = oracle::backward_induction(cfg, cfg.constrained);
  auto f = run.open("value_table.csv");
  oracle::write_table_csv(f, table);
  const json j{{"constrained", cfg.constrained},
               {"horizon", cfg.horizon},
               {"states", table.states().size()},
               {"initial_value", table.initial_value()},
               {"initial_action", component::kActionNames[static_cast<std::size_t>(table.action({0, 0, cfg.horizon}))]}};
  run.open("oracle_summary.json") << j.dump(2) << '\n';
  run.log << "V*(0,0," << cfg.horizon << ") = " << format_double(table.initial_value()) << "\n";
}

void cmd_compare(Run& run) {
  if (run.opt.episodes) run.kv.set("eval.episodes", std::to_string(*run.opt.episodes));
  const unsigned threads = run.opt.threads;
  if (run.opt.env == "component") {
    const std::size_t n = run.eval_episodes(1000);
    const std::uint64_t base = run.eval_base_seed();
    auto ck = read_checkpoint(run.opt.checkpoint, "component");
    auto ck_c = read_checkpoint(run.opt.constrained_checkpoint, "component");
    if (ck.constrained) throw ConfigError("--checkpoint must be an unconstrained run");
    if (!ck_c.constrained) throw ConfigError("--constrained-checkpoint must be a constrained run");
    const auto base_cfg = component_config(run.kv, false);
    const auto cfg_u = component_config_for(run.kv, ck);
    const auto cfg_c = component_config_for(run.kv, ck_c);
    const component::Env env(base_cfg), env_u(cfg_u), env_c(cfg_c);
    std::vector<ComponentRow> rows;
    rows.push_back(evaluate_component("random", env, dqn::random_policy<component::State>(), n, base, threads));
    rows.push_back(evaluate_component("dqn", env_u, dqn::greedy_policy(env_u, std::move(ck.net)), n, base, threads));
    rows.push_back(evaluate_component("dqn_constrained", env_c, dqn::greedy_policy(env_c, std::move(ck_c.net)), n,
                                      base, threads));
    rows.push_back(evaluate_component("oracle", env, oracle::as_policy(oracle::backward_induction(base_cfg, false)),
                                      n, base, threads));
    write_component_rows(run, "compare", rows);
    for (const auto& r : rows)
      run.log << r.name << ": mean " << r.summary.mean << " +/- " << r.summary.standard_error() << "\n";
  } else {
    const std::size_t n = run.eval_episodes(200);
    const std::uint64_t base = run.eval_base_seed();
    auto ck = read_checkpoint(run.opt.checkpoint, "reliability");
    const reliability::Env env(reliability::Config::from(run.kv));
    std::vector<ReliabilityRow> rows;
    rows.push_back(evaluate_reliability("random", env, dqn::random_policy<reliability::State>(), n, base, threads));
    rows.push_back(evaluate_reliability("benchmark", env, reliability::benchmark_policy(), n, base, threads));
    rows.push_back(evaluate_reliability("dqn", env, dqn::greedy_policy(env, std::move(ck.net)), n, base, threads));
    write_reliability_rows(run, "compare", rows);
    for (const auto& r : rows) run.log << r.name << ": success rate " << r.success_rate() << "\n";
  }
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--env", o.env, "component or reliability")->capture_default_str();
  sub->add_option("--config", o.config_path, "key-value config file");
  sub->add_option("--seed", o.seed, "run seed (default 1)");
  sub->add_option("--out", o.out_dir, std::string("output directory (default $") + kOutDirVariable + " or pdt_out)");
  sub->add_option("--threads", o.threads, "evaluation worker threads")->check(CLI::Range(1u, 256u));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probabilistic digital twin experiments"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "train a DQN policy; writes checkpoint.json and curve.csv");
  add_common(train, o);
  train->add_option("--episodes", o.episodes, "training episodes");
  train->add_flag("--constrained", o.constrained, "component: Use only when P(good) exceeds the threshold");

  auto* eval = app.add_subcommand("eval", "evaluate one policy over seeded episodes");
  add_common(eval, o);
  eval->add_option("--episodes", o.episodes, "evaluation episodes");
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint.json from train");
  eval->add_option("--policy", o.policy, "dqn, random, oracle (component) or benchmark (reliability)")
      ->capture_default_str();
  eval->add_flag("--constrained", o.constrained, "component: constrained game for random/oracle");

  auto* orc = app.add_subcommand("oracle", "exact backward induction for the component game");
  add_common(orc, o);
  orc->add_flag("--constrained", o.constrained, "constrained game");

  auto* cmp = app.add_subcommand("compare", "compare policies over a shared set of seeded episodes");
  add_common(cmp, o);
  cmp->add_option("--episodes", o.episodes, "evaluation episodes per policy");
  cmp->add_option("--checkpoint", o.checkpoint, "DQN checkpoint (unconstrained for component)");
  cmp->add_option("--constrained-checkpoint", o.constrained_checkpoint, "component: constrained DQN checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    require_env(o.env);
    if (eval->parsed()) require_policy(o.env, o.policy);
    if (orc->parsed() && o.env != "component") throw UsageError("oracle is only defined for --env component");
    Run r{o, o.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(o.config_path),
          resolve_out_dir(o.out_dir), out, err};
    if (o.seed) r.kv.set("seed", std::to_string(*o.seed));
    fs::create_directories(r.out);
    if (train->parsed()) cmd_train(r);
    if (eval->parsed()) cmd_eval(r);
    if (orc->parsed()) cmd_oracle(r);
    if (cmp->parsed()) cmd_compare(r);
    r.finish();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace pdt::cli
