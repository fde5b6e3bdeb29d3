#include "rppo/surrogate.hpp"

#include <cmath>
#include <iostream>
#include <string>

#include <Eigen/QR>

#include "rppo/errors.hpp"
#include "rppo/ot.hpp"
#include "rppo/parallel.hpp"

namespace rppo {

namespace {

// exp underflows to zero near -745; treat anything below as an unusable
// importance denominator.
constexpr double kOldLogpUnderflow = -700.0;

Vector augment(const Vector& v) {
  Vector y(v.size() + 1);
  y.head(v.size()) = v;
  y[v.size()] = 1.0;
  return y;
}

double log_sum_exp(const Vector& v) {
  const double hi = v.maxCoeff();
  double acc = 0.0;
  for (int i = 0; i < v.size(); ++i) acc += std::exp(v[i] - hi);
  return hi + std::log(acc);
}

}  // namespace

std::vector<Vector> returns_to_go(const std::vector<Trajectory>& trajs, double gamma) {
  std::vector<Vector> out;
  out.reserve(trajs.size());
  for (const auto& traj : trajs) {
    const int len = static_cast<int>(traj.steps.size());
    Vector g(len);
    double acc = 0.0;
    for (int t = len - 1; t >= 0; --t) {
      acc = traj.steps[t].reward + gamma * acc;
      g[t] = acc;
    }
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

std::size_t total_steps(const std::vector<Trajectory>& trajs) {
  std::size_t n = 0;
  for (const auto& t : trajs) n += t.steps.size();
  return n;
}

// Value baseline: least squares of returns on (1, s, s*s).
Vector baseline_predictions(const std::vector<Trajectory>& trajs,
                            const std::vector<Vector>& returns) {
  const std::size_t n = total_steps(trajs);
  const int ds = static_cast<int>(trajs.front().steps.front().state.size());
  const int nf = 1 + 2 * ds;
  Matrix features(n, nf);
  Vector target(n);
  std::size_t row = 0;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    for (std::size_t t = 0; t < trajs[k].steps.size(); ++t, ++row) {
      const Vector& s = trajs[k].steps[t].state;
      features(row, 0) = 1.0;
      features.row(row).segment(1, ds) = s.transpose();
      features.row(row).segment(1 + ds, ds) = s.array().square().matrix().transpose();
      target[row] = returns[k][t];
    }
  }
  const Vector coef = features.colPivHouseholderQr().solve(target);
  return features * coef;
}

}  // namespace

Vector raw_advantages(const std::vector<Trajectory>& trajs, double gamma) {
  if (total_steps(trajs) < 2) {
    throw InsufficientDataError("estimate_advantages: need at least 2 transitions");
  }
  const std::vector<Vector> returns = returns_to_go(trajs, gamma);
  const Vector baseline = baseline_predictions(trajs, returns);
  Vector adv(baseline.size());
  std::size_t row = 0;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    for (std::size_t t = 0; t < trajs[k].steps.size(); ++t, ++row) {
      adv[row] = returns[k][t] - baseline[row];
    }
  }
  return adv;
}

Batch estimate_advantages(const std::vector<Trajectory>& trajs, double gamma) {
  Vector adv = raw_advantages(trajs, gamma);

  Batch batch;
  batch.gamma = gamma;
  batch.transitions.reserve(adv.size());
  for (const auto& traj : trajs) {
    batch.traj_offsets.push_back(batch.transitions.size());
    for (const auto& step : traj.steps) batch.transitions.push_back(step);
  }
  batch.traj_offsets.push_back(batch.transitions.size());

  const double mean = adv.mean();
  adv.array() -= mean;
  const double sd = std::sqrt(adv.squaredNorm() / static_cast<double>(adv.size()));
  if (sd > 1e-12) adv /= sd;
  batch.advantages = std::move(adv);
  return batch;
}

void attach_old_logp(Batch& batch, const GmmParams& old_policy) {
  const GmmDensity density(old_policy);
  batch.old_logp.resize(batch.size());
  parallel_for(batch.size(), [&](std::size_t t) {
    const Transition& tr = batch.transitions[t];
    batch.old_logp[t] = density.cond_log_density(tr.state, tr.action);
  });
}

// ---------------------------------------------------------------------------
// Surrogate value and gradient.
// ---------------------------------------------------------------------------

namespace {

void require_batch(const GmmParams& theta_new, const GmmParams& theta_old, const Batch& batch) {
  if (theta_new.state_dim() != theta_old.state_dim() ||
      theta_new.action_dim() != theta_old.action_dim() ||
      theta_new.components() != theta_old.components()) {
    throw DimensionMismatchError("surrogate: policy shape mismatch");
  }
  if (batch.size() == 0) throw InsufficientDataError("surrogate: empty batch");
  if (batch.old_logp.size() != static_cast<Eigen::Index>(batch.size()) ||
      batch.advantages.size() != static_cast<Eigen::Index>(batch.size())) {
    throw InvalidInputError("surrogate: batch missing advantages or old_logp");
  }
}

struct ValuePartial {
  KahanSum sum;
  long kept = 0;
  long dropped = 0;
};

void check_dropped(long dropped, std::size_t total) {
  if (dropped > 0) {
    std::cerr << "rppo: surrogate dropped " << dropped << " of " << total
              << " samples with underflowed old density\n";
    if (static_cast<double>(dropped) > 0.1 * static_cast<double>(total)) {
      throw DegenerateBatchError("surrogate: more than 10% of samples dropped");
    }
  }
}

struct GradPartial {
  std::vector<Matrix> d_comp;
  Vector d_eta;
  long kept = 0;
  long dropped = 0;
};

// Gradient of the decoded component log density with respect to the augmented
// matrix, assembled from cached inverses:
//   0.5 (-S^-1 + S^-1 y y^T S^-1) + (1/(2t))(1 - 1/t) E_corner
// with the state-marginal analogue subtracted on its principal submatrix.
void accumulate_logpdf_grad(const GmmDensity& density, int comp, double weight, const Vector& y,
                            const Vector& u, double r_joint, double q_state, Matrix& into) {
  const GmmDensity::Comp& c = density.comp(comp);
  const int aug = static_cast<int>(into.rows());
  const int ds = density.state_dim();
  const int corner = aug - 1;
  const double cfac = (0.5 / c.corner) * (1.0 - 1.0 / c.corner);

  if (r_joint != 0.0) {
    const Vector v = c.joint_inv * y;
    const double wr = weight * r_joint;
    into.noalias() += (0.5 * wr) * (v * v.transpose());
    into.noalias() -= (0.5 * wr) * c.joint_inv;
    into(corner, corner) += wr * cfac;
  }
  if (q_state != 0.0) {
    const Vector w = c.state_inv * u;
    const double wq = weight * q_state;
    // Scatter the (state, corner) submatrix gradient into augmented coords.
    Matrix sub = (0.5 * wq) * (w * w.transpose());
    sub.noalias() -= (0.5 * wq) * c.state_inv;
    sub(ds, ds) += wq * cfac;
    into.topLeftCorner(ds, ds) -= sub.topLeftCorner(ds, ds);
    into.block(0, corner, ds, 1) -= sub.block(0, ds, ds, 1);
    into.block(corner, 0, 1, ds) -= sub.block(ds, 0, 1, ds);
    into(corner, corner) -= sub(ds, ds);
  }
}

}  // namespace

double surrogate_value(const GmmParams& theta_new, const GmmParams& theta_old,
                       const Batch& batch) {
  require_batch(theta_new, theta_old, batch);
  const GmmDensity density(theta_new);

  auto chunk = [&](std::size_t lo, std::size_t hi) {
    ValuePartial part;
    for (std::size_t t = lo; t < hi; ++t) {
      const double old_lp = batch.old_logp[t];
      if (old_lp < kOldLogpUnderflow) {
        ++part.dropped;
        continue;
      }
      const Transition& tr = batch.transitions[t];
      const double lp = density.cond_log_density(tr.state, tr.action);
      part.sum.add(std::exp(lp - old_lp) * batch.advantages[t]);
      ++part.kept;
    }
    return part;
  };
  auto combine = [](ValuePartial a, ValuePartial b) {
    a.sum.merge(b.sum);
    a.kept += b.kept;
    a.dropped += b.dropped;
    return a;
  };
  const ValuePartial total = chunked_reduce(batch.size(), ValuePartial{}, chunk, combine);
  check_dropped(total.dropped, batch.size());
  if (total.kept == 0) throw DegenerateBatchError("surrogate: no usable samples");
  return -total.sum.value() / static_cast<double>(total.kept);
}

double ref::surrogate_value(const GmmParams& theta_new, const GmmParams& theta_old,
                            const Batch& batch) {
  require_batch(theta_new, theta_old, batch);
  const GmmDensity density(theta_new);
  KahanSum sum;
  long kept = 0, dropped = 0;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const double old_lp = batch.old_logp[t];
    if (old_lp < kOldLogpUnderflow) {
      ++dropped;
      continue;
    }
    const Transition& tr = batch.transitions[t];
    const double lp = density.cond_log_density(tr.state, tr.action);
    sum.add(std::exp(lp - old_lp) * batch.advantages[t]);
    ++kept;
  }
  check_dropped(dropped, batch.size());
  if (kept == 0) throw DegenerateBatchError("surrogate: no usable samples");
  return -sum.value() / static_cast<double>(kept);
}

namespace {

GradPartial grad_zero(const GmmParams& g) {
  GradPartial part;
  const int aug = g.joint_dim() + 1;
  part.d_comp.assign(g.components(), Matrix::Zero(aug, aug));
  part.d_eta = Vector::Zero(std::max(0, g.components() - 1));
  return part;
}

void grad_accumulate_range(const GmmDensity& density, const Batch& batch, std::size_t lo,
                           std::size_t hi, GradPartial& part) {
  const int k = density.components();
  Vector joint_terms(k), state_terms(k);
  for (std::size_t t = lo; t < hi; ++t) {
    const double old_lp = batch.old_logp[t];
    if (old_lp < kOldLogpUnderflow) {
      ++part.dropped;
      continue;
    }
    const Transition& tr = batch.transitions[t];
    Vector z(tr.state.size() + tr.action.size());
    z << tr.state, tr.action;
    const Vector y = augment(z);
    const Vector u = augment(tr.state);

    for (int i = 0; i < k; ++i) {
      joint_terms[i] = density.comp(i).log_alpha + density.joint_comp_logpdf(i, y);
      state_terms[i] = density.comp(i).log_alpha + density.state_comp_logpdf(i, u);
    }
    const double lp_joint = log_sum_exp(joint_terms);
    const double lp_state = log_sum_exp(state_terms);
    const double ratio = std::exp(lp_joint - lp_state - old_lp);
    const double weight = ratio * batch.advantages[t];
    ++part.kept;
    if (weight == 0.0) continue;

    for (int i = 0; i < k; ++i) {
      const double r = std::exp(joint_terms[i] - lp_joint);
      const double q = std::exp(state_terms[i] - lp_state);
      accumulate_logpdf_grad(density, i, weight, y, u, r, q, part.d_comp[i]);
      if (i < k - 1) part.d_eta[i] += weight * (r - q);
    }
  }
}

GmmTangent grad_finalize(GradPartial total, std::size_t batch_size) {
  check_dropped(total.dropped, batch_size);
  if (total.kept == 0) throw DegenerateBatchError("surrogate: no usable samples");
  const double scale = -1.0 / static_cast<double>(total.kept);
  GmmTangent out;
  out.d_components.reserve(total.d_comp.size());
  for (auto& m : total.d_comp) {
    Matrix g = scale * m;
    out.d_components.push_back(0.5 * (g + g.transpose()));
  }
  out.d_eta = scale * total.d_eta;
  return out;
}

}  // namespace

GmmTangent surrogate_grad(const GmmParams& theta_new, const GmmParams& theta_old,
                          const Batch& batch) {
  require_batch(theta_new, theta_old, batch);
  const GmmDensity density(theta_new);

  auto chunk = [&](std::size_t lo, std::size_t hi) {
    GradPartial part = grad_zero(theta_new);
    grad_accumulate_range(density, batch, lo, hi, part);
    return part;
  };
  auto combine = [](GradPartial a, GradPartial b) {
    for (std::size_t i = 0; i < a.d_comp.size(); ++i) a.d_comp[i] += b.d_comp[i];
    a.d_eta += b.d_eta;
    a.kept += b.kept;
    a.dropped += b.dropped;
    return a;
  };
  GradPartial total = chunked_reduce(batch.size(), grad_zero(theta_new), chunk, combine);
  return grad_finalize(std::move(total), batch.size());
}

GmmTangent ref::surrogate_grad(const GmmParams& theta_new, const GmmParams& theta_old,
                               const Batch& batch) {
  require_batch(theta_new, theta_old, batch);
  const GmmDensity density(theta_new);
  GradPartial total = grad_zero(theta_new);
  grad_accumulate_range(density, batch, 0, batch.size(), total);
  return grad_finalize(std::move(total), batch.size());
}

double max_abs_log_ratio(const GmmParams& theta_new, const GmmParams& theta_old,
                         const Batch& batch) {
  require_batch(theta_new, theta_old, batch);
  const GmmDensity density(theta_new);
  auto chunk = [&](std::size_t lo, std::size_t hi) {
    double worst = 0.0;
    for (std::size_t t = lo; t < hi; ++t) {
      if (batch.old_logp[t] < kOldLogpUnderflow) continue;
      const Transition& tr = batch.transitions[t];
      const double lp = density.cond_log_density(tr.state, tr.action);
      worst = std::max(worst, std::abs(lp - batch.old_logp[t]));
    }
    return worst;
  };
  auto combine = [](double a, double b) { return std::max(a, b); };
  return chunked_reduce(batch.size(), 0.0, chunk, combine);
}

// ---------------------------------------------------------------------------
// Proximity penalty.
// ---------------------------------------------------------------------------

ProximityKind proximity_from_name(const std::string& name) {
  if (name == "euclidean") return ProximityKind::kEuclidean;
  if (name == "wasserstein") return ProximityKind::kWasserstein;
  throw ConfigError("unknown proximity kind '" + name + "'");
}

const char* proximity_name(ProximityKind kind) {
  return kind == ProximityKind::kEuclidean ? "euclidean" : "wasserstein";
}

double phi_value(const GmmParams& theta_new, const GmmParams& theta_old, double beta,
                 ProximityKind kind) {
  if (!(beta > 0.0)) throw InvalidInputError("phi_value: beta must be positive");
  if (kind == ProximityKind::kEuclidean) {
    double sq = (theta_new.eta() - theta_old.eta()).squaredNorm();
    for (int i = 0; i < theta_new.components(); ++i) {
      sq += (theta_new.component(i).mat() - theta_old.component(i).mat()).squaredNorm();
    }
    return 0.5 * beta * sq;
  }
  return 0.5 * beta * gmm_w2_sq(theta_new, theta_old);
}

namespace {

// d/dS of w2_gaussian_sq(decode(S), other): Bures and mean-gap gradients in
// decoded coordinates chained through mean = m/t, cov = P - m m^T / t.
Matrix w2_pair_grad_augmented(const SpdMatrix& s_new, const DecodedGaussian& other) {
  const DecodedGaussian dec = decode(s_new);
  const int d = dec.dim();
  const Matrix g_sigma = w2_grad_wrt_first(dec.covariance, other.covariance);
  const Vector g_mu = 2.0 * (dec.mean - other.mean);

  const Matrix& s = s_new.mat();
  const Vector m = s.col(d).head(d);
  const double t = s(d, d);

  Matrix out(d + 1, d + 1);
  out.topLeftCorner(d, d) = g_sigma;
  const Vector g_m = -(g_sigma * m) / t + g_mu / (2.0 * t);
  out.block(0, d, d, 1) = g_m;
  out.block(d, 0, 1, d) = g_m.transpose();
  out(d, d) = (m.dot(g_sigma * m) - g_mu.dot(m)) / (t * t);
  return out;
}

}  // namespace

GmmTangent phi_grad(const GmmParams& theta_new, const GmmParams& theta_old, double beta,
                    ProximityKind kind) {
  if (!(beta > 0.0)) throw InvalidInputError("phi_grad: beta must be positive");
  const int k = theta_new.components();
  GmmTangent out;
  out.d_components.reserve(k);
  if (kind == ProximityKind::kEuclidean) {
    for (int i = 0; i < k; ++i) {
      out.d_components.push_back(beta *
                                 (theta_new.component(i).mat() - theta_old.component(i).mat()));
    }
    out.d_eta = beta * (theta_new.eta() - theta_old.eta()).head(std::max(0, k - 1));
    return out;
  }

  const TransportResult trans = gmm_w2_transport(theta_new, theta_old);
  const std::vector<DecodedGaussian> old_dec = theta_old.decoded_all();
  for (int i = 0; i < k; ++i) {
    Matrix g = Matrix::Zero(theta_new.joint_dim() + 1, theta_new.joint_dim() + 1);
    for (int j = 0; j < theta_old.components(); ++j) {
      const double mass = trans.plan(i, j);
      if (mass > 0.0) {
        g += mass * w2_pair_grad_augmented(theta_new.component(i), old_dec[j]);
      }
    }
    g *= 0.5 * beta;
    out.d_components.push_back(0.5 * (g + g.transpose()));
  }
  // Fixed-plan convention: the coupling carries the weight dependence, so the
  // free logits see no gradient from the penalty.
  out.d_eta = Vector::Zero(std::max(0, k - 1));
  return out;
}

double phi_value_fixed_plan(const GmmParams& theta_new, const GmmParams& theta_old, double beta,
                            const Matrix& plan) {
  const std::vector<DecodedGaussian> a = theta_new.decoded_all();
  const std::vector<DecodedGaussian> b = theta_old.decoded_all();
  double total = 0.0;
  for (int i = 0; i < plan.rows(); ++i) {
    for (int j = 0; j < plan.cols(); ++j) {
      if (plan(i, j) > 0.0) total += plan(i, j) * w2_gaussian_sq(a[i], b[j]);
    }
  }
  return 0.5 * beta * total;
}

// ---------------------------------------------------------------------------
// Improvement bound diagnostic.
// ---------------------------------------------------------------------------

BoundReport improvement_bound(const GmmParams& pi_new, const GmmParams& pi_tilde,
                              const GmmParams& pi_old, const Batch& batch, double beta,
                              double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInputError("improvement_bound: gamma in (0,1)");
  require_batch(pi_tilde, pi_old, batch);
  const GmmDensity tilde_density(pi_tilde);

  BoundReport rep;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    if (batch.old_logp[t] < kOldLogpUnderflow) continue;
    const Transition& tr = batch.transitions[t];
    const double lp = tilde_density.cond_log_density(tr.state, tr.action);
    const double ratio = std::exp(lp - batch.old_logp[t]);
    rep.eps = std::max(rep.eps, std::abs(ratio * batch.advantages[t]));
    rep.max_abs_adv = std::max(rep.max_abs_adv, std::abs(batch.advantages[t]));
  }
  rep.btv_new_vs_tilde = gmm_tv_bound(pi_new, pi_tilde);
  rep.btv_tilde_vs_old = gmm_tv_bound(pi_tilde, pi_old);
  rep.dw2_tilde_vs_old = gmm_w2_sq(pi_tilde, pi_old);
  rep.lower_bound = -2.0 * rep.btv_new_vs_tilde * rep.max_abs_adv +
                    rep.dw2_tilde_vs_old / beta -
                    (2.0 * gamma * rep.eps / (1.0 - gamma)) * rep.btv_tilde_vs_old;
  return rep;
}

}  // namespace rppo
