// Command line for training, evaluating and inspecting mixture policies.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rppo/checkpoint.hpp"
#include "rppo/config.hpp"
#include "rppo/diagnostics.hpp"
#include "rppo/errors.hpp"
#include "rppo/ot.hpp"
#include "rppo/trainer.hpp"

namespace {

using namespace rppo;

KvDocument merge_config(const std::string& config_path, const std::vector<std::string>& overrides,
                        bool seed_set, std::uint64_t seed, bool out_set, const std::string& out) {
  KvDocument kv;
  if (!config_path.empty()) kv = KvDocument::parse_file(config_path);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key=value: " + ov);
    kv.set(ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (seed_set) kv.set("seed", std::to_string(seed));
  if (out_set) kv.set("out", out);
  return kv;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              bool seed_set, std::uint64_t seed, bool out_set, const std::string& out) {
  const KvDocument kv = merge_config(config_path, overrides, seed_set, seed, out_set, out);
  const TrainConfig cfg = train_config_from_kv(kv);
  const TrainResult result = train(cfg);
  double final_reward = result.rows.empty() ? 0.0 : result.rows.back().mean_reward;
  std::cout << "final mean reward: " << format_double(final_reward) << "\n";
  if (!cfg.out_dir.empty()) {
    std::cout << "wrote " << cfg.out_dir << "/metrics.csv and " << cfg.out_dir
              << "/checkpoint.txt\n";
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& env_name, int episodes,
             std::uint64_t seed) {
  const GmmParams policy = read_checkpoint(checkpoint);
  const Env env = Env::make(env_name);
  const auto [mean, sd] = evaluate(policy, env, episodes, seed);
  std::cout << "mean_reward,std_reward\n"
            << format_double(mean) << ',' << format_double(sd) << "\n";
  return 0;
}

int cmd_distance(const std::string& path_a, const std::string& path_b) {
  const GmmParams a = read_checkpoint(path_a);
  const GmmParams b = read_checkpoint(path_b);
  const TransportResult trans = gmm_w2_transport(a, b);
  const double tv = gmm_tv_bound(a, b);
  std::cout << "w2_sq,tv_bound\n"
            << format_double(trans.objective) << ',' << format_double(tv) << "\n";
  std::cout << "plan\n";
  for (int i = 0; i < trans.plan.rows(); ++i) {
    for (int j = 0; j < trans.plan.cols(); ++j) {
      std::cout << (j ? "," : "") << format_double(trans.plan(i, j));
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_optimize(std::uint64_t seed, const std::string& out) {
  const auto runs = quadratic_battery(10, seed);
  bool all_ok = true;
  for (const auto& run : runs) {
    all_ok = all_ok && check_descent(run.trace) &&
             check_step_bound(run.trace, run.f_star, run.lipschitz) && run.final_gap <= 1e-6;
  }
  std::string csv = "k,f,step_dist,alpha\n";
  for (const auto& rec : runs.front().trace.records) {
    csv += std::to_string(rec.k) + ',' + format_double(rec.f_value) + ',' +
           format_double(rec.step_distance) + ',' + format_double(rec.alpha) + '\n';
  }
  if (out.empty()) {
    std::cout << csv;
  } else {
    std::filesystem::create_directories(out);
    std::ofstream file(out + "/trace.csv");
    file << csv;
    std::cout << "wrote " << out << "/trace.csv\n";
  }
  std::cerr << "quadratic suite: " << (all_ok ? "all checks passed" : "CHECK FAILED") << "\n";
  return all_ok ? 0 : 1;
}

int cmd_selftest(bool inject_fault) {
  const auto results = run_selftest(inject_fault);
  bool all_pass = true;
  std::printf("%-36s %-6s %s\n", "check", "status", "detail");
  for (const auto& r : results) {
    std::printf("%-36s %-6s %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian proximal policy optimization with Gaussian-mixture policies"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, env_name = "pointmass";
  std::string dist_a, dist_b;
  std::uint64_t seed = 0;
  int episodes = 10;
  bool inject_fault = false;
  std::vector<std::string> overrides;

  auto* train_cmd = app.add_subcommand(
      "train", "Train a policy; flags and key=value overrides beat config-file values");
  train_cmd->add_option("--config", config_path, "config file (key = value lines)");
  train_cmd->add_option("--seed", seed, "random seed (overrides config and key=value)");
  train_cmd->add_option("--out", out_dir, "output directory (overrides config and key=value)");
  train_cmd->add_option("overrides", overrides, "key=value overrides applied after the file");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
  eval_cmd->add_option("--env", env_name, "environment name (pendulum | pointmass)");
  eval_cmd->add_option("--episodes", episodes, "number of episodes");
  eval_cmd->add_option("--seed", seed, "random seed");

  auto* dist_cmd = app.add_subcommand("distance", "W2^2, TV bound and plan between checkpoints");
  dist_cmd->add_option("gmm_a", dist_a, "first checkpoint")->required();
  dist_cmd->add_option("gmm_b", dist_b, "second checkpoint")->required();

  auto* opt_cmd = app.add_subcommand("optimize", "Run the quadratic suite, emit its trace CSV");
  opt_cmd->add_option("--seed", seed, "suite seed");
  opt_cmd->add_option("--out", out_dir, "directory for trace.csv (default: stdout)");

  auto* self_cmd = app.add_subcommand("selftest", "Run oracle suites, print a pass/fail table");
  self_cmd->add_flag("--inject-gradient-fault", inject_fault,
                     "test hook: corrupt one gradient so the suite must fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) {
      return cmd_train(config_path, overrides, train_cmd->count("--seed") > 0, seed,
                       train_cmd->count("--out") > 0, out_dir);
    }
    if (eval_cmd->parsed()) return cmd_eval(checkpoint, env_name, episodes, seed);
    if (dist_cmd->parsed()) return cmd_distance(dist_a, dist_b);
    if (opt_cmd->parsed()) return cmd_optimize(seed, out_dir);
    if (self_cmd->parsed()) return cmd_selftest(inject_fault);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
