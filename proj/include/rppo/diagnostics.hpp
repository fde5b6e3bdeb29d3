#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rppo/gmm.hpp"
#include "rppo/linalg.hpp"
#include "rppo/prox.hpp"
#include "rppo/surrogate.hpp"

namespace rppo {

// Central finite differences of a scalar function of a symmetric matrix;
// off-diagonal entries are perturbed in mirrored pairs so the result matches
// the Frobenius-gradient convention.
Matrix fd_gradient_sym(const std::function<double(const Matrix&)>& fn, const Matrix& at, double h);

Vector fd_gradient_vec(const std::function<double(const Vector&)>& fn, const Vector& at, double h);

// Minimum transportation objective by exhaustive enumeration of polytope
// vertices (spanning-tree bases with nonnegative flows). Exponential; meant
// for marginals of length <= 4.
double transport_vertex_enum_min(const Vector& row, const Vector& col, const Matrix& cost);

// Total variation 0.5 * integral |p - q| between two 1-D mixtures by
// trapezoid quadrature over +-10 sigma.
double tv_quadrature_1d(const Vector& w_a, const std::vector<DecodedGaussian>& a,
                        const Vector& w_b, const std::vector<DecodedGaussian>& b,
                        int points = 40001);

// Seeded random instances shared by unit tests, selftest and acceptance.
DecodedGaussian random_gaussian(int dim, Rng& rng);
GmmParams random_gmm(int state_dim, int action_dim, int components, Rng& rng,
                     double floor = kDefaultEigFloor);
Vector random_simplex(int k, Rng& rng);
Batch random_batch(const GmmParams& old_policy, int transitions, Rng& rng);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Convex quadratic battery: g = 0.5 ||theta - T||_F^2 over one SPD block,
// alternating between no penalty and a Euclidean proximity penalty, with the
// closed-form minimizer kept for the step-bound check.
struct QuadraticRun {
  IterateTrace trace;
  double f_star = 0.0;
  double lipschitz = 0.0;
  double final_gap = 0.0;  // Frobenius distance to the known minimizer
};
std::vector<QuadraticRun> quadratic_battery(int instances, std::uint64_t seed);

CheckResult run_quadratic_suite(int instances, std::uint64_t seed);
CheckResult run_gradient_fd_suite(int instances, std::uint64_t seed, bool inject_fault = false);
CheckResult run_transport_suite(int instances, std::uint64_t seed);
CheckResult run_tv_suite(int instances, std::uint64_t seed);

// The four suites behind the CLI selftest; the fault hook corrupts one
// analytic gradient so the finite-difference suite must go red.
std::vector<CheckResult> run_selftest(bool inject_gradient_fault = false);

}  // namespace rppo
