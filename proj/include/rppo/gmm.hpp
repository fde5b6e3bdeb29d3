#pragma once

#include <functional>
#include <vector>

#include "rppo/linalg.hpp"
#include "rppo/rng.hpp"

namespace rppo {

// Softmax with the last logit pinned to zero; strictly positive, sums to 1.
Vector weights_from_eta(const Vector& eta);

// Inverse map eta_k = log(alpha_k / alpha_K); throws on non-positive weights.
Vector eta_from_weights(const Vector& alpha);

// Free parameters of a K-component mixture over a (ds+da)-dimensional joint
// space in the decoded (mean, covariance) parametrization.
int param_count(int state_dim, int action_dim, int components);

struct DecodedGaussian {
  Vector mean;
  SpdMatrix covariance;

  int dim() const { return static_cast<int>(mean.size()); }
};

// Augmented form [[S + mu mu^T, mu], [mu^T, 1]]; the whole Gaussian lives in
// one SPD matrix of size dim+1.
SpdMatrix encode(const DecodedGaussian& g);

// Inverse of encode, tolerant of bottom-right drift away from 1: with corner
// t, mean = col/t and covariance is the Schur complement. decode(encode(g))
// is the identity; decode itself is a projection.
DecodedGaussian decode(const SpdMatrix& s);

// Mixture over the joint (state, action) space. Weight logits eta (last entry
// fixed at zero) plus one augmented SPD matrix per component.
class GmmParams {
 public:
  GmmParams(int state_dim, int action_dim, Vector eta, std::vector<SpdMatrix> components,
            double floor = kDefaultEigFloor);

  // Means uniform in the given per-dimension bounds, covariance 0.5*I,
  // uniform weights. Broad components so early rollouts explore.
  static GmmParams broad_init(int state_dim, int action_dim, int components,
                              const Vector& state_lo, const Vector& state_hi,
                              const Vector& action_lo, const Vector& action_hi, double floor,
                              Rng& rng);

  // Same recipe with the state means drawn by a caller-supplied sampler, for
  // observation sets that do not fill their bounding box.
  static GmmParams broad_init(int state_dim, int action_dim, int components,
                              const std::function<Vector(Rng&)>& state_sampler,
                              const Vector& action_lo, const Vector& action_hi, double floor,
                              Rng& rng);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  int joint_dim() const { return state_dim_ + action_dim_; }
  int components() const { return static_cast<int>(components_.size()); }
  double floor() const { return floor_; }

  const Vector& eta() const { return eta_; }
  Vector weights() const { return weights_from_eta(eta_); }
  const SpdMatrix& component(int i) const { return components_[i]; }
  DecodedGaussian decoded(int i) const { return decode(components_[i]); }
  std::vector<DecodedGaussian> decoded_all() const;

  double log_density_joint(const Vector& z) const;

 private:
  int state_dim_;
  int action_dim_;
  Vector eta_;
  std::vector<SpdMatrix> components_;
  double floor_;
};

// pi(a | s): mixture over actions only. Covariances are state independent;
// weights and means move with the conditioning state.
struct ConditionalGmm {
  Vector weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  std::vector<Matrix> chol;  // lower Cholesky factors, aligned with covariances

  int action_dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
  int components() const { return static_cast<int>(weights.size()); }
  double log_density(const Vector& action) const;
  DecodedGaussian component(int i) const;
};

// Per-policy conditioning cache. Gains, conditional covariances and state
// marginals do not depend on the query state, so build once per policy.
class GmmConditioner {
 public:
  explicit GmmConditioner(const GmmParams& g);

  ConditionalGmm condition(const Vector& state) const;

 private:
  struct Comp {
    Vector state_mean;
    Vector action_mean;
    Matrix gain;           // Sigma_as * Sigma_ss^{-1}
    Matrix cond_cov;
    Matrix cond_chol;
    Matrix state_cov_inv;
    double state_logdet;
  };
  int state_dim_;
  int action_dim_;
  Vector log_alpha_;
  Vector alpha_;
  std::vector<Comp> comps_;
};

ConditionalGmm condition_on_state(const GmmParams& g, const Vector& state);

Vector sample_action(const ConditionalGmm& c, Rng& rng);

// Joint/state-marginal/conditional log densities of the decoded mixture with
// all factorizations cached, plus the responsibilities and inverse blocks the
// analytic gradients are assembled from.
class GmmDensity {
 public:
  explicit GmmDensity(const GmmParams& g);

  struct Comp {
    Matrix joint_inv;     // inverse of the augmented component matrix
    double joint_logdet;
    Matrix state_inv;     // inverse of the (state,1) principal submatrix
    double state_logdet;
    double corner;        // bottom-right entry t
    double log_alpha;
  };

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  int components() const { return static_cast<int>(comps_.size()); }
  const Comp& comp(int i) const { return comps_[i]; }

  // log N(z; mean_i, cov_i) of the decoded component, evaluated through the
  // augmented matrix: pass y = (z, 1).
  double joint_comp_logpdf(int i, const Vector& y_aug) const;
  // log of the decoded component's state marginal at u = (s, 1).
  double state_comp_logpdf(int i, const Vector& u_aug) const;

  double joint_log_density(const Vector& z) const;
  double state_log_density(const Vector& s) const;
  double cond_log_density(const Vector& s, const Vector& a) const;

  Vector joint_responsibilities(const Vector& z) const;
  Vector state_responsibilities(const Vector& s) const;

 private:
  int state_dim_;
  int action_dim_;
  std::vector<Comp> comps_;
};

// Canonical policy log density log pi(a | s); the trainer caches these values
// at collection time and the surrogate evaluates the same code path, so the
// ratio at identical parameters is exactly one.
double policy_log_density(const GmmParams& g, const Vector& state, const Vector& action);

}  // namespace rppo
