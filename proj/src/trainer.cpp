#include "rppo/trainer.hpp"

#include <chrono>
#include <limits>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rppo/checkpoint.hpp"
#include "rppo/errors.hpp"
#include "rppo/ot.hpp"

namespace rppo {

void TrainConfig::validate() const {
  if (components < 1) throw ConfigError("K must be at least 1");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
  if (episodes_per_iter < 1) throw ConfigError("episodes_per_iter must be positive");
  if (outer_iters < 0) throw ConfigError("outer_iters must be non-negative");
  if (inner_prox_iters < 1) throw ConfigError("inner_prox_iters must be positive");
  if (!(floor > 0.0)) throw ConfigError("floor must be positive");
}

namespace {

// Largest admissible |log ratio| for a candidate update's importance weights.
constexpr double kLogRatioTrust = 1.5;

// Upper bound on the proximal step size; backtracking works downward from
// here.
constexpr double kAlphaCap = 10.0;

bool parse_bool(const std::string& text, const std::string& what) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ConfigError("bad boolean value for " + what + ": '" + text + "'");
}

}  // namespace

TrainConfig train_config_from_kv(const KvDocument& kv) {
  TrainConfig cfg;
  for (const auto& [key, value] : kv.entries()) {
    if (key == "env") {
      cfg.env = value;
    } else if (key == "K") {
      cfg.components = static_cast<int>(parse_long(value, key));
    } else if (key == "beta") {
      cfg.beta = parse_double(value, key);
    } else if (key == "gamma") {
      cfg.gamma = parse_double(value, key);
    } else if (key == "proximity") {
      cfg.proximity = proximity_from_name(value);
    } else if (key == "episodes_per_iter") {
      cfg.episodes_per_iter = static_cast<int>(parse_long(value, key));
    } else if (key == "outer_iters") {
      cfg.outer_iters = static_cast<int>(parse_long(value, key));
    } else if (key == "inner_prox_iters") {
      cfg.inner_prox_iters = static_cast<int>(parse_long(value, key));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_long(value, key));
    } else if (key == "floor") {
      cfg.floor = parse_double(value, key);
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "timing") {
      cfg.timing = parse_bool(value, key);
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ManifoldPoint gmm_to_point(const GmmParams& g) {
  ManifoldPoint p;
  p.spd_parts.reserve(g.components());
  for (int i = 0; i < g.components(); ++i) p.spd_parts.push_back(g.component(i));
  p.vector_parts.push_back(g.eta().head(std::max(0, g.components() - 1)));
  return p;
}

GmmParams gmm_from_point(const ManifoldPoint& p, const GmmParams& like) {
  const int k = like.components();
  Vector eta = Vector::Zero(k);
  eta.head(k - 1) = p.vector_parts.at(0);
  return GmmParams(like.state_dim(), like.action_dim(), std::move(eta), p.spd_parts, like.floor());
}

Tangent gmm_tangent_to_manifold(const GmmTangent& t) {
  Tangent out;
  out.spd_parts = t.d_components;
  out.vector_parts.push_back(t.d_eta);
  return out;
}

std::string metrics_to_csv(const std::vector<TrainIterRow>& rows) {
  std::ostringstream out;
  out << "iter,mean_reward,surrogate,phi,w2sq,descent_ok,seconds\n";
  for (const auto& r : rows) {
    out << r.iter << ',' << format_double(r.mean_reward) << ',' << format_double(r.surrogate)
        << ',' << format_double(r.phi) << ',' << format_double(r.w2_sq) << ','
        << (r.descent_ok ? 1 : 0) << ',' << format_double(r.seconds) << '\n';
  }
  return out.str();
}

void write_metrics_csv(const std::string& path, const std::vector<TrainIterRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write metrics: " + path);
  out << metrics_to_csv(rows);
}

std::pair<double, double> evaluate(const GmmParams& policy, const Env& env, int episodes,
                                   std::uint64_t seed) {
  if (episodes < 1) throw InvalidInputError("evaluate: episodes must be positive");
  const std::vector<Trajectory> trajs = collect_rollouts(policy, env, episodes, seed);
  double mean = 0.0;
  for (const auto& t : trajs) mean += t.total_reward;
  mean /= episodes;
  double var = 0.0;
  for (const auto& t : trajs) var += (t.total_reward - mean) * (t.total_reward - mean);
  return {mean, std::sqrt(var / episodes)};
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const Env env = Env::make(cfg.env);
  const EnvSpec& spec = env.spec();

  Rng init_rng(derive_seed(cfg.seed, 0xA11CE));
  GmmParams policy = GmmParams::broad_init(
      spec.obs_dim, spec.action_dim, cfg.components,
      [&env](Rng& r) { return env.sample_observation(r); }, spec.action_low, spec.action_high,
      cfg.floor, init_rng);

  std::vector<TrainIterRow> rows;
  std::vector<GmmParams> history;
  rows.reserve(cfg.outer_iters);
  history.push_back(policy);

  // Step-size state across outer iterations: optimistic start, backtracking
  // inside optimize finds the workable scale, and the warm start carries the
  // most productive accepted scale into the next batch. A probe-based 1/L
  // start is useless here: probing at the eigenvalue floor measures the cone
  // boundary blowup rather than the curvature the steps actually see.
  double warm_alpha = kAlphaCap;

  for (int iter = 0; iter < cfg.outer_iters; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();

    const std::vector<Trajectory> trajs =
        collect_rollouts(policy, env, cfg.episodes_per_iter, derive_seed(cfg.seed, 1000 + iter));
    double mean_reward = 0.0;
    for (const auto& t : trajs) mean_reward += t.total_reward;
    mean_reward /= trajs.size();

    TrainIterRow row;
    row.iter = iter;
    row.mean_reward = mean_reward;

    const GmmParams theta_old = policy;
    try {
      Batch batch = estimate_advantages(trajs, cfg.gamma);
      attach_old_logp(batch, theta_old);

      ObjectiveSpec obj;
      obj.g_value = [&](const ManifoldPoint& p) {
        const GmmParams cand = gmm_from_point(p, theta_old);
        // Trust bound: past this the importance estimate is dominated by a
        // few samples and its minimization is unbounded below.
        if (max_abs_log_ratio(cand, theta_old, batch) > kLogRatioTrust) {
          return std::numeric_limits<double>::infinity();
        }
        return surrogate_value(cand, theta_old, batch);
      };
      obj.g_grad = [&](const ManifoldPoint& p) {
        return gmm_tangent_to_manifold(surrogate_grad(gmm_from_point(p, theta_old), theta_old, batch));
      };
      obj.phi_value = [&](const ManifoldPoint& p) {
        return phi_value(gmm_from_point(p, theta_old), theta_old, cfg.beta, cfg.proximity);
      };
      obj.phi_grad = [&](const ManifoldPoint& p) {
        return gmm_tangent_to_manifold(
            phi_grad(gmm_from_point(p, theta_old), theta_old, cfg.beta, cfg.proximity));
      };

      const ManifoldPoint start = gmm_to_point(theta_old);
      obj.lipschitz_L = 1.0 / warm_alpha;

      ProxConfig inner;
      inner.max_iters = cfg.inner_prox_iters;
      inner.step_tol = 1e-10;
      inner.alpha0 = warm_alpha;

      IterateTrace trace;
      ManifoldPoint result = start;
      try {
        std::tie(result, trace) = optimize(start, obj, inner);
      } catch (const StalledError& stalled) {
        trace = stalled.trace;
        result = start;
        std::cerr << "rppo: iteration " << iter << " stalled, keeping current policy\n";
      }

      // Warm start from the most productive accepted scale of this batch,
      // probing upward so the step size can recover after a conservative
      // stretch. A stalled iteration says nothing about scale (usually batch
      // noise), so it leaves the warm start untouched.
      if (trace.accepted_steps() > 0) {
        double best_alpha = 0.0;
        for (int s = 0; s + 1 < static_cast<int>(trace.records.size()); ++s) {
          best_alpha = std::max(best_alpha, trace.records[s].alpha);
        }
        warm_alpha = std::min(2.0 * best_alpha, kAlphaCap);
      }

      row.objective = trace.final_f();
      row.descent_ok = check_descent(trace);
      // Acceptance guard: the old parameters score exactly zero, so only a
      // strictly negative objective is an improvement worth taking.
      if (row.objective < 0.0) {
        policy = gmm_from_point(result, theta_old);
        row.accepted = true;
        row.surrogate = surrogate_value(policy, theta_old, batch);
        row.phi = phi_value(policy, theta_old, cfg.beta, cfg.proximity);
        row.w2_sq = gmm_w2_sq(policy, theta_old);
      }
    } catch (const DegenerateBatchError& err) {
      throw DegenerateBatchError("outer iteration " + std::to_string(iter) + ": " + err.what());
    }

    if (cfg.timing) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    rows.push_back(row);
    history.push_back(policy);
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_metrics_csv(cfg.out_dir + "/metrics.csv", rows);
    write_checkpoint(cfg.out_dir + "/checkpoint.txt", policy);
  }
  return TrainResult{std::move(rows), std::move(policy), std::move(history)};
}

}  // namespace rppo
