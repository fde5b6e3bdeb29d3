#include "rppo/gmm.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

#include "rppo/errors.hpp"

namespace rppo {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(const Vector& v) {
  const double hi = v.maxCoeff();
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (int i = 0; i < v.size(); ++i) acc += std::exp(v[i] - hi);
  return hi + std::log(acc);
}

Vector softmax(const Vector& v) {
  const double hi = v.maxCoeff();
  Vector w = (v.array() - hi).exp();
  return w / w.sum();
}

struct LltParts {
  Matrix inverse;
  double logdet;
};

LltParts invert_spd(const Matrix& m, const char* who) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw DegenerateMatrixError(std::string(who) + ": Cholesky failed, matrix not SPD");
  }
  LltParts out;
  out.inverse = llt.solve(Matrix::Identity(m.rows(), m.cols()));
  out.inverse = 0.5 * (out.inverse + out.inverse.transpose());
  out.logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return out;
}

// Principal submatrix on (state block, augmented corner).
Matrix state_submatrix(const Matrix& s_aug, int ds) {
  const int d = static_cast<int>(s_aug.rows()) - 1;
  Matrix sub(ds + 1, ds + 1);
  sub.topLeftCorner(ds, ds) = s_aug.topLeftCorner(ds, ds);
  sub.block(0, ds, ds, 1) = s_aug.block(0, d, ds, 1);
  sub.block(ds, 0, 1, ds) = s_aug.block(d, 0, 1, ds);
  sub(ds, ds) = s_aug(d, d);
  return sub;
}

}  // namespace

Vector weights_from_eta(const Vector& eta) {
  const int k = static_cast<int>(eta.size());
  if (k < 1) throw InvalidInputError("weights_from_eta: empty logit vector");
  if (eta[k - 1] != 0.0) throw InvalidInputError("weights_from_eta: last logit must be zero");
  return softmax(eta);
}

Vector eta_from_weights(const Vector& alpha) {
  const int k = static_cast<int>(alpha.size());
  if (k < 1) throw InvalidInputError("eta_from_weights: empty weight vector");
  for (int i = 0; i < k; ++i) {
    if (!(alpha[i] > 0.0)) throw InvalidInputError("eta_from_weights: weights must be positive");
  }
  Vector eta(k);
  for (int i = 0; i < k; ++i) eta[i] = std::log(alpha[i] / alpha[k - 1]);
  eta[k - 1] = 0.0;
  return eta;
}

int param_count(int state_dim, int action_dim, int components) {
  if (state_dim < 1 || action_dim < 1 || components < 1) {
    throw InvalidInputError("param_count: arguments must be positive");
  }
  const int d = state_dim + action_dim;
  return components * (d + d * (d + 1) / 2) + (components - 1);
}

SpdMatrix encode(const DecodedGaussian& g) {
  const int d = g.dim();
  if (g.covariance.dim() != d) throw DimensionMismatchError("encode: mean/covariance mismatch");
  Matrix s(d + 1, d + 1);
  s.topLeftCorner(d, d) = g.covariance.mat() + g.mean * g.mean.transpose();
  s.block(0, d, d, 1) = g.mean;
  s.block(d, 0, 1, d) = g.mean.transpose();
  s(d, d) = 1.0;
  return SpdMatrix(s, 0.0);
}

DecodedGaussian decode(const SpdMatrix& s) {
  const int d = s.dim() - 1;
  if (d < 1) throw InvalidInputError("decode: matrix too small");
  const Matrix& m = s.mat();
  const double t = m(d, d);
  if (!(t > 0.0)) throw DegenerateMatrixError("decode: non-positive corner entry");
  Vector mean = m.block(0, d, d, 1) / t;
  Matrix cov = m.topLeftCorner(d, d) - m.block(0, d, d, 1) * m.block(d, 0, 1, d) / t;
  // Schur complement of an SPD matrix: eigenvalues are no smaller than the
  // parent's, so the parent's floor remains valid.
  return DecodedGaussian{std::move(mean), SpdMatrix::trusted(std::move(cov), s.floor())};
}

GmmParams::GmmParams(int state_dim, int action_dim, Vector eta,
                     std::vector<SpdMatrix> components, double floor)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      eta_(std::move(eta)),
      components_(std::move(components)),
      floor_(floor) {
  if (state_dim_ < 0 || action_dim_ < 1) throw InvalidInputError("GmmParams: bad dimensions");
  const int k = static_cast<int>(components_.size());
  if (k < 1) throw InvalidInputError("GmmParams: need at least one component");
  if (eta_.size() != k) throw DimensionMismatchError("GmmParams: eta size != component count");
  if (eta_[k - 1] != 0.0) throw InvalidInputError("GmmParams: last logit must be zero");
  if (!eta_.allFinite()) throw InvalidInputError("GmmParams: non-finite logits");
  const int want = joint_dim() + 1;
  for (const auto& c : components_) {
    if (c.dim() != want) throw DimensionMismatchError("GmmParams: component dimension mismatch");
  }
}

GmmParams GmmParams::broad_init(int state_dim, int action_dim, int components,
                                const Vector& state_lo, const Vector& state_hi,
                                const Vector& action_lo, const Vector& action_hi, double floor,
                                Rng& rng) {
  auto box_sampler = [&state_lo, &state_hi, state_dim](Rng& r) {
    Vector s(state_dim);
    for (int j = 0; j < state_dim; ++j) s[j] = r.uniform(state_lo[j], state_hi[j]);
    return s;
  };
  return broad_init(state_dim, action_dim, components, box_sampler, action_lo, action_hi, floor,
                    rng);
}

GmmParams GmmParams::broad_init(int state_dim, int action_dim, int components,
                                const std::function<Vector(Rng&)>& state_sampler,
                                const Vector& action_lo, const Vector& action_hi, double floor,
                                Rng& rng) {
  const int d = state_dim + action_dim;
  std::vector<SpdMatrix> comps;
  comps.reserve(components);
  for (int i = 0; i < components; ++i) {
    Vector mean(d);
    mean.head(state_dim) = state_sampler(rng);
    for (int j = 0; j < action_dim; ++j) {
      mean[state_dim + j] = rng.uniform(action_lo[j], action_hi[j]);
    }
    DecodedGaussian g{mean, SpdMatrix(0.5 * Matrix::Identity(d, d), 0.0)};
    // Large means push the smallest eigenvalue of the encoded matrix toward
    // zero; project so any configured floor is feasible at the start.
    comps.push_back(spd_project(SymmetricMatrix(encode(g).mat()), floor));
  }
  return GmmParams(state_dim, action_dim, Vector::Zero(components), std::move(comps), floor);
}

std::vector<DecodedGaussian> GmmParams::decoded_all() const {
  std::vector<DecodedGaussian> out;
  out.reserve(components_.size());
  for (const auto& c : components_) out.push_back(decode(c));
  return out;
}

double GmmParams::log_density_joint(const Vector& z) const {
  return GmmDensity(*this).joint_log_density(z);
}

double ConditionalGmm::log_density(const Vector& action) const {
  const int k = components();
  const int da = action_dim();
  Vector terms(k);
  for (int i = 0; i < k; ++i) {
    const Vector diff = action - means[i];
    const Vector w = chol[i].triangularView<Eigen::Lower>().solve(diff);
    const double logdet = 2.0 * chol[i].diagonal().array().log().sum();
    terms[i] = std::log(weights[i]) - 0.5 * (da * kLog2Pi + logdet + w.squaredNorm());
  }
  return log_sum_exp(terms);
}

DecodedGaussian ConditionalGmm::component(int i) const {
  return DecodedGaussian{means[i], SpdMatrix::trusted(covariances[i], 0.0)};
}

GmmConditioner::GmmConditioner(const GmmParams& g)
    : state_dim_(g.state_dim()), action_dim_(g.action_dim()) {
  alpha_ = g.weights();
  log_alpha_ = alpha_.array().log();
  const int ds = state_dim_;
  const int da = action_dim_;
  comps_.reserve(g.components());
  for (int i = 0; i < g.components(); ++i) {
    const DecodedGaussian dec = g.decoded(i);
    const Matrix& cov = dec.covariance.mat();
    Comp c;
    c.state_mean = dec.mean.head(ds);
    c.action_mean = dec.mean.tail(da);
    if (ds > 0) {
      const Matrix sigma_ss = cov.topLeftCorner(ds, ds);
      const Matrix sigma_as = cov.bottomLeftCorner(da, ds);
      const LltParts ss = invert_spd(sigma_ss, "GmmConditioner");
      c.gain = sigma_as * ss.inverse;
      c.cond_cov = cov.bottomRightCorner(da, da) - c.gain * sigma_as.transpose();
      c.state_cov_inv = ss.inverse;
      c.state_logdet = ss.logdet;
    } else {
      c.gain = Matrix::Zero(da, 0);
      c.cond_cov = cov;
      c.state_cov_inv = Matrix::Zero(0, 0);
      c.state_logdet = 0.0;
    }
    c.cond_cov = 0.5 * (c.cond_cov + c.cond_cov.transpose());
    Eigen::LLT<Matrix> llt(c.cond_cov);
    if (llt.info() != Eigen::Success) {
      throw DegenerateMatrixError("GmmConditioner: conditional covariance not SPD");
    }
    c.cond_chol = llt.matrixL();
    comps_.push_back(std::move(c));
  }
}

ConditionalGmm GmmConditioner::condition(const Vector& state) const {
  if (state.size() != state_dim_) throw DimensionMismatchError("condition: state dimension");
  if (!state.allFinite()) throw InvalidInputError("condition: non-finite state");
  const int k = static_cast<int>(comps_.size());
  ConditionalGmm out;
  out.means.resize(k);
  out.covariances.resize(k);
  out.chol.resize(k);
  Vector logw(k);
  for (int i = 0; i < k; ++i) {
    const Comp& c = comps_[i];
    if (state_dim_ > 0) {
      const Vector diff = state - c.state_mean;
      const double quad = diff.dot(c.state_cov_inv * diff);
      logw[i] = log_alpha_[i] - 0.5 * (state_dim_ * kLog2Pi + c.state_logdet + quad);
      out.means[i] = c.action_mean + c.gain * diff;
    } else {
      logw[i] = log_alpha_[i];
      out.means[i] = c.action_mean;
    }
    out.covariances[i] = c.cond_cov;
    out.chol[i] = c.cond_chol;
  }
  const double hi = logw.maxCoeff();
  if (!std::isfinite(hi)) {
    // Every state marginal underflowed; keep the prior weights.
    std::cerr << "rppo: condition_on_state fell back to prior weights\n";
    out.weights = alpha_;
    return out;
  }
  out.weights = softmax(logw);
  return out;
}

ConditionalGmm condition_on_state(const GmmParams& g, const Vector& state) {
  return GmmConditioner(g).condition(state);
}

Vector sample_action(const ConditionalGmm& c, Rng& rng) {
  const int i = rng.categorical(c.weights);
  const Vector z = rng.gaussian_vector(c.action_dim());
  return c.means[i] + c.chol[i] * z;
}

GmmDensity::GmmDensity(const GmmParams& g)
    : state_dim_(g.state_dim()), action_dim_(g.action_dim()) {
  const Vector alpha = g.weights();
  const int ds = state_dim_;
  comps_.reserve(g.components());
  for (int i = 0; i < g.components(); ++i) {
    const Matrix& s = g.component(i).mat();
    Comp c;
    const LltParts joint = invert_spd(s, "GmmDensity");
    c.joint_inv = joint.inverse;
    c.joint_logdet = joint.logdet;
    const LltParts sub = invert_spd(state_submatrix(s, ds), "GmmDensity");
    c.state_inv = sub.inverse;
    c.state_logdet = sub.logdet;
    c.corner = s(s.rows() - 1, s.cols() - 1);
    c.log_alpha = std::log(alpha[i]);
    comps_.push_back(std::move(c));
  }
}

double GmmDensity::joint_comp_logpdf(int i, const Vector& y_aug) const {
  const Comp& c = comps_[i];
  const int d = state_dim_ + action_dim_;
  const double quad = y_aug.dot(c.joint_inv * y_aug);
  return -0.5 * (d * kLog2Pi + c.joint_logdet - std::log(c.corner) + quad - 1.0 / c.corner);
}

double GmmDensity::state_comp_logpdf(int i, const Vector& u_aug) const {
  const Comp& c = comps_[i];
  const double quad = u_aug.dot(c.state_inv * u_aug);
  return -0.5 *
         (state_dim_ * kLog2Pi + c.state_logdet - std::log(c.corner) + quad - 1.0 / c.corner);
}

namespace {

Vector augment(const Vector& v) {
  Vector y(v.size() + 1);
  y.head(v.size()) = v;
  y[v.size()] = 1.0;
  return y;
}

}  // namespace

double GmmDensity::joint_log_density(const Vector& z) const {
  const Vector y = augment(z);
  Vector terms(components());
  for (int i = 0; i < components(); ++i) terms[i] = comps_[i].log_alpha + joint_comp_logpdf(i, y);
  return log_sum_exp(terms);
}

double GmmDensity::state_log_density(const Vector& s) const {
  const Vector u = augment(s);
  Vector terms(components());
  for (int i = 0; i < components(); ++i) terms[i] = comps_[i].log_alpha + state_comp_logpdf(i, u);
  return log_sum_exp(terms);
}

double GmmDensity::cond_log_density(const Vector& s, const Vector& a) const {
  Vector z(s.size() + a.size());
  z << s, a;
  return joint_log_density(z) - state_log_density(s);
}

Vector GmmDensity::joint_responsibilities(const Vector& z) const {
  const Vector y = augment(z);
  Vector terms(components());
  for (int i = 0; i < components(); ++i) terms[i] = comps_[i].log_alpha + joint_comp_logpdf(i, y);
  return softmax(terms);
}

Vector GmmDensity::state_responsibilities(const Vector& s) const {
  const Vector u = augment(s);
  Vector terms(components());
  for (int i = 0; i < components(); ++i) terms[i] = comps_[i].log_alpha + state_comp_logpdf(i, u);
  return softmax(terms);
}

double policy_log_density(const GmmParams& g, const Vector& state, const Vector& action) {
  return GmmDensity(g).cond_log_density(state, action);
}

}  // namespace rppo
