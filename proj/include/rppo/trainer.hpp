#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rppo/config.hpp"
#include "rppo/envs.hpp"
#include "rppo/gmm.hpp"
#include "rppo/prox.hpp"
#include "rppo/surrogate.hpp"

namespace rppo {

struct TrainConfig {
  std::string env = "pointmass";
  int components = 5;
  double beta = 1.0;
  double gamma = 0.99;
  ProximityKind proximity = ProximityKind::kEuclidean;
  int episodes_per_iter = 20;
  int outer_iters = 40;
  int inner_prox_iters = 20;
  std::uint64_t seed = 0;
  // Policy eigenvalue floor. Much larger than the kernel default on purpose:
  // it bounds the conditional action noise away from zero and keeps the
  // importance weights and their gradients on a workable scale.
  double floor = 5e-2;
  std::string out_dir;  // empty: keep results in memory only
  bool timing = true;   // false writes 0 in the seconds column (reproducible CSV)

  void validate() const;
};

TrainConfig train_config_from_kv(const KvDocument& kv);

struct TrainIterRow {
  int iter = 0;
  double mean_reward = 0.0;
  double surrogate = 0.0;  // at the accepted parameters (0 when kept)
  double phi = 0.0;
  double w2_sq = 0.0;  // distance moved this iteration
  bool descent_ok = true;
  double seconds = 0.0;
  // In-memory only, not part of the CSV schema:
  bool accepted = false;
  double objective = 0.0;  // inner objective at the returned point
};

struct TrainResult {
  std::vector<TrainIterRow> rows;
  GmmParams final_policy;
  // Initial policy followed by the policy after each outer iteration;
  // rejected iterations repeat the previous entry verbatim.
  std::vector<GmmParams> policy_history;
};

// The outer loop: collect on-policy episodes, estimate advantages, minimize
// surrogate + proximity with the proximal optimizer, and accept the update
// only when the combined objective beats the zero anchor of the old policy.
TrainResult train(const TrainConfig& cfg);

std::string metrics_to_csv(const std::vector<TrainIterRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<TrainIterRow>& rows);

// Mean and standard deviation of the episode return over `episodes` seeded
// rollouts.
std::pair<double, double> evaluate(const GmmParams& policy, const Env& env, int episodes,
                                   std::uint64_t seed);

// Mixture parameters as a manifold point (components, then free logits) and
// back; the adapters the trainer feeds the optimizer with.
ManifoldPoint gmm_to_point(const GmmParams& g);
GmmParams gmm_from_point(const ManifoldPoint& p, const GmmParams& like);
Tangent gmm_tangent_to_manifold(const GmmTangent& t);

}  // namespace rppo
