#pragma once

#include <vector>

#include "rppo/gmm.hpp"
#include "rppo/linalg.hpp"

namespace rppo {

struct TransportResult {
  Matrix plan;       // rows follow the first marginal, columns the second
  double objective;  // sum plan(i,j) * cost(i,j) at the optimum
};

// Squared 2-Wasserstein distance between Gaussians: squared mean gap plus the
// Bures term trace(S0 + S1 - 2 (S0^{1/2} S1 S0^{1/2})^{1/2}).
double w2_gaussian_sq(const DecodedGaussian& a, const DecodedGaussian& b);

double bures_trace(const Matrix& s0, const Matrix& s1);

// Exact optimum of the transportation linear program by the transportation
// simplex: northwest-corner start, Bland's entering/leaving rule. Marginals
// below 1e-12 are clamped and renormalized to keep the polytope clean.
TransportResult solve_transport(const Vector& row, const Vector& col, const Matrix& cost);

// Pairwise squared Gaussian W2 costs; entries are independent, assembled in
// parallel.
Matrix build_w2_cost(const std::vector<DecodedGaussian>& a, const std::vector<DecodedGaussian>& b);

Matrix build_tv_cost(const std::vector<DecodedGaussian>& a, const std::vector<DecodedGaussian>& b);

// Mixture-embedded squared W2: optimal coupling of the weights with pairwise
// Gaussian W2 costs on the decoded components.
TransportResult gmm_w2_transport(const Vector& w_a, const std::vector<DecodedGaussian>& a,
                                 const Vector& w_b, const std::vector<DecodedGaussian>& b);
double gmm_w2_sq(const Vector& w_a, const std::vector<DecodedGaussian>& a, const Vector& w_b,
                 const std::vector<DecodedGaussian>& b);
double gmm_w2_sq(const GmmParams& a, const GmmParams& b);
TransportResult gmm_w2_transport(const GmmParams& a, const GmmParams& b);

// Componentwise total-variation bound (3/2) min{1, ||S0^{-1} S1 - I||_F},
// valid for a shared mean; pairs with different means fall back to the
// universal cap 3/2 so the bound stays valid.
double tv_bound_gaussian(const DecodedGaussian& a, const DecodedGaussian& b);

// Mixture total-variation bound: optimal coupling of the weights under the
// componentwise bound as pairwise cost.
double gmm_tv_bound(const Vector& w_a, const std::vector<DecodedGaussian>& a, const Vector& w_b,
                    const std::vector<DecodedGaussian>& b);
double gmm_tv_bound(const GmmParams& a, const GmmParams& b);

// Gradient of the Bures term with respect to its first argument:
// I - S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2}.
Matrix w2_grad_wrt_first(const SpdMatrix& s0, const SpdMatrix& s1);

namespace ref {
// Serial counterparts of the parallel cost assembly, kept for equivalence
// tests and the kernel benchmark.
Matrix build_w2_cost(const std::vector<DecodedGaussian>& a, const std::vector<DecodedGaussian>& b);
}  // namespace ref

}  // namespace rppo
