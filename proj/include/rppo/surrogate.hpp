#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rppo/gmm.hpp"
#include "rppo/linalg.hpp"

namespace rppo {

struct Transition {
  Vector state;
  Vector action;
  double reward = 0.0;
  Vector next_state;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> steps;
  double total_reward = 0.0;
};

// Pooled on-policy batch. Advantages are centered and scaled per batch; the
// old-policy log densities are cached once so the surrogate denominator never
// drifts.
struct Batch {
  std::vector<Transition> transitions;     // trajectory order preserved
  std::vector<std::size_t> traj_offsets;   // starts, plus an end sentinel
  Vector advantages;
  Vector old_logp;
  double gamma = 0.99;

  std::size_t size() const { return transitions.size(); }
};

// Discounted return-to-go of every transition, per trajectory.
std::vector<Vector> returns_to_go(const std::vector<Trajectory>& trajs, double gamma);

// Returns minus a least-squares baseline on features (1, s, s*s); exposed
// before normalization for testing.
Vector raw_advantages(const std::vector<Trajectory>& trajs, double gamma);

Batch estimate_advantages(const std::vector<Trajectory>& trajs, double gamma);

void attach_old_logp(Batch& batch, const GmmParams& old_policy);

// Tangent in mixture coordinates: one symmetric matrix per augmented
// component plus the K-1 free weight logits.
struct GmmTangent {
  std::vector<Matrix> d_components;
  Vector d_eta;
};

// Importance-weighted surrogate -(1/N) sum ratio_t * advantage_t with
// ratio_t = pi_new(a|s) / pi_old(a|s); exactly zero at theta_new == theta_old
// for a centered batch.
double surrogate_value(const GmmParams& theta_new, const GmmParams& theta_old, const Batch& batch);

GmmTangent surrogate_grad(const GmmParams& theta_new, const GmmParams& theta_old,
                          const Batch& batch);

// Largest |log pi_new - log pi_old| over the usable samples. The importance
// estimate stops meaning anything once a single sample dominates the batch,
// so the trainer rejects candidate steps past a bound on this.
double max_abs_log_ratio(const GmmParams& theta_new, const GmmParams& theta_old,
                         const Batch& batch);

enum class ProximityKind { kEuclidean, kWasserstein };

ProximityKind proximity_from_name(const std::string& name);
const char* proximity_name(ProximityKind kind);

// (beta/2) d^2(theta', theta): squared Frobenius over components and logits,
// or the mixture-embedded squared W2.
double phi_value(const GmmParams& theta_new, const GmmParams& theta_old, double beta,
                 ProximityKind kind);

// Euclidean: beta (S' - S) and beta (eta' - eta). Wasserstein: the optimal
// plan is recomputed, then held fixed while the pairwise costs are
// differentiated through the decoding map.
GmmTangent phi_grad(const GmmParams& theta_new, const GmmParams& theta_old, double beta,
                    ProximityKind kind);

// Wasserstein penalty under an externally fixed plan; the finite-difference
// oracle for phi_grad differentiates this.
double phi_value_fixed_plan(const GmmParams& theta_new, const GmmParams& theta_old, double beta,
                            const Matrix& plan);

struct BoundReport {
  double eps = 0.0;     // sample estimate of max_s |E_{a~pi_tilde} A(s,a)|
  double max_abs_adv = 0.0;  // sample estimate of max |A|
  double btv_new_vs_tilde = 0.0;
  double btv_tilde_vs_old = 0.0;
  double dw2_tilde_vs_old = 0.0;
  double lower_bound = 0.0;
};

// Policy-improvement lower bound diagnostic, assembled from the mixture
// distance bounds and sample maxima. Never gates training.
BoundReport improvement_bound(const GmmParams& pi_new, const GmmParams& pi_tilde,
                              const GmmParams& pi_old, const Batch& batch, double beta,
                              double gamma);

namespace ref {
// Serial reference implementations of the batch kernels, kept for
// equivalence tests and the benchmark.
double surrogate_value(const GmmParams& theta_new, const GmmParams& theta_old, const Batch& batch);
GmmTangent surrogate_grad(const GmmParams& theta_new, const GmmParams& theta_old,
                          const Batch& batch);
}  // namespace ref

}  // namespace rppo
