#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rppo/linalg.hpp"
#include "rppo/rng.hpp"

namespace rppo {

// Point on a product manifold: SPD matrix blocks plus unconstrained vectors.
struct ManifoldPoint {
  std::vector<SpdMatrix> spd_parts;
  std::vector<Vector> vector_parts;
};

// Tangent with the same shape as a point; SPD blocks carry symmetric matrices.
struct Tangent {
  std::vector<Matrix> spd_parts;
  std::vector<Vector> vector_parts;

  static Tangent zeros_like(const ManifoldPoint& p);
  bool all_finite() const;
};

double manifold_distance(const ManifoldPoint& a, const ManifoldPoint& b);

// Objective f = g - h + phi. g is smooth with gradient Lipschitz constant
// lipschitz_L; h (optional) is convex with a subgradient oracle; phi
// (optional) is the proximity penalty, differentiated explicitly. Callables
// must be pure: steps are evaluated speculatively during rejection.
struct ObjectiveSpec {
  std::function<double(const ManifoldPoint&)> g_value;
  std::function<Tangent(const ManifoldPoint&)> g_grad;
  std::function<double(const ManifoldPoint&)> h_value;      // optional
  std::function<Tangent(const ManifoldPoint&)> h_subgrad;   // optional
  std::function<double(const ManifoldPoint&)> phi_value;    // optional
  std::function<Tangent(const ManifoldPoint&)> phi_grad;    // optional
  double lipschitz_L = 1.0;

  double f_value(const ManifoldPoint& p) const;
};

struct IterateRecord {
  int k;
  double f_value;        // objective at iterate k
  double step_distance;  // d(theta_k, theta_{k+1}); 0 on the final record
  double alpha;          // step size used to leave iterate k
};

struct IterateTrace {
  std::vector<IterateRecord> records;

  bool empty() const { return records.empty(); }
  double initial_f() const { return records.front().f_value; }
  double final_f() const { return records.back().f_value; }
  int accepted_steps() const { return static_cast<int>(records.size()) - 1; }
};

struct ProxConfig {
  int max_iters = 100;
  double step_tol = 1e-10;
  double alpha0 = 0.0;  // 0 selects 1 / lipschitz_L
  int max_halvings = 20;
};

struct StalledError : std::runtime_error {
  IterateTrace trace;
  explicit StalledError(IterateTrace t)
      : std::runtime_error("optimize: no descent after halving the step 20 times"),
        trace(std::move(t)) {}
};

struct DivergedGradientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One proximal step: Euclidean step -alpha (grad g - u + grad phi) on every
// block, then eigenvalue-floor retraction on the SPD blocks.
ManifoldPoint prox_step(const ManifoldPoint& p, const ObjectiveSpec& obj, double alpha);

// Iterates prox_step with monotone acceptance: a step that fails to decrease
// f is rejected and alpha halved (max_halvings in a row raises StalledError).
// Stops at max_iters or once the step distance falls under step_tol.
std::pair<ManifoldPoint, IterateTrace> optimize(const ManifoldPoint& p0, const ObjectiveSpec& obj,
                                                const ProxConfig& cfg);

// Per-step sufficient decrease f(k) - f(k+1) >= d^2/(2 alpha_k), slack 1e-9.
bool check_descent(const IterateTrace& trace);

// Accumulated step bound: sum of d^2 <= 2 (f(theta_0) - f_star) / L.
bool check_step_bound(const IterateTrace& trace, double f_star, double lipschitz_L);

// Largest observed gradient-difference ratio over random probe points around
// the given point; a practical stand-in when L is not known analytically.
double estimate_lipschitz(const std::function<Tangent(const ManifoldPoint&)>& grad,
                          const ManifoldPoint& around, Rng& rng, int probes = 20);

}  // namespace rppo
