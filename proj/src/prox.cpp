#include "rppo/prox.hpp"

#include <cmath>
#include <limits>

#include "rppo/errors.hpp"

namespace rppo {

Tangent Tangent::zeros_like(const ManifoldPoint& p) {
  Tangent t;
  t.spd_parts.reserve(p.spd_parts.size());
  for (const auto& s : p.spd_parts) t.spd_parts.push_back(Matrix::Zero(s.dim(), s.dim()));
  t.vector_parts.reserve(p.vector_parts.size());
  for (const auto& v : p.vector_parts) t.vector_parts.push_back(Vector::Zero(v.size()));
  return t;
}

bool Tangent::all_finite() const {
  for (const auto& m : spd_parts) {
    if (!m.allFinite()) return false;
  }
  for (const auto& v : vector_parts) {
    if (!v.allFinite()) return false;
  }
  return true;
}

double manifold_distance(const ManifoldPoint& a, const ManifoldPoint& b) {
  if (a.spd_parts.size() != b.spd_parts.size() ||
      a.vector_parts.size() != b.vector_parts.size()) {
    throw DimensionMismatchError("manifold_distance: shape mismatch");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.spd_parts.size(); ++i) {
    sq += (a.spd_parts[i].mat() - b.spd_parts[i].mat()).squaredNorm();
  }
  for (std::size_t i = 0; i < a.vector_parts.size(); ++i) {
    sq += (a.vector_parts[i] - b.vector_parts[i]).squaredNorm();
  }
  return std::sqrt(sq);
}

double ObjectiveSpec::f_value(const ManifoldPoint& p) const {
  double f = g_value(p);
  if (h_value) f -= h_value(p);
  if (phi_value) f += phi_value(p);
  return f;
}

ManifoldPoint prox_step(const ManifoldPoint& p, const ObjectiveSpec& obj, double alpha) {
  Tangent grad = obj.g_grad(p);
  if (obj.h_subgrad) {
    const Tangent u = obj.h_subgrad(p);
    for (std::size_t i = 0; i < grad.spd_parts.size(); ++i) grad.spd_parts[i] -= u.spd_parts[i];
    for (std::size_t i = 0; i < grad.vector_parts.size(); ++i) {
      grad.vector_parts[i] -= u.vector_parts[i];
    }
  }
  if (obj.phi_grad) {
    const Tangent v = obj.phi_grad(p);
    for (std::size_t i = 0; i < grad.spd_parts.size(); ++i) grad.spd_parts[i] += v.spd_parts[i];
    for (std::size_t i = 0; i < grad.vector_parts.size(); ++i) {
      grad.vector_parts[i] += v.vector_parts[i];
    }
  }
  if (!grad.all_finite()) throw DivergedGradientError("prox_step: non-finite gradient");

  ManifoldPoint next;
  next.spd_parts.reserve(p.spd_parts.size());
  for (std::size_t i = 0; i < p.spd_parts.size(); ++i) {
    const SpdMatrix& s = p.spd_parts[i];
    SymmetricMatrix moved(s.mat() - alpha * grad.spd_parts[i]);
    next.spd_parts.push_back(spd_project(moved, s.floor()));
  }
  next.vector_parts.reserve(p.vector_parts.size());
  for (std::size_t i = 0; i < p.vector_parts.size(); ++i) {
    next.vector_parts.push_back(p.vector_parts[i] - alpha * grad.vector_parts[i]);
  }
  return next;
}

std::pair<ManifoldPoint, IterateTrace> optimize(const ManifoldPoint& p0, const ObjectiveSpec& obj,
                                                const ProxConfig& cfg) {
  ManifoldPoint p = p0;
  IterateTrace trace;
  const double alpha0 = cfg.alpha0 > 0.0 ? cfg.alpha0 : 1.0 / std::max(obj.lipschitz_L, 1e-12);
  double alpha = alpha0;
  double f_cur = obj.f_value(p);

  int k = 0;
  for (; k < cfg.max_iters; ++k) {
    // Backtracking restarts every iteration near the last productive scale,
    // never above the caller's alpha0.
    alpha = std::min(2.0 * alpha, alpha0);
    bool accepted = false;
    int halvings = 0;
    while (!accepted) {
      const ManifoldPoint cand = prox_step(p, obj, alpha);
      const double dist = manifold_distance(p, cand);
      if (dist < cfg.step_tol) {
        trace.records.push_back({k, f_cur, 0.0, alpha});
        return {p, trace};
      }
      // A speculative candidate may be numerically unusable (near-singular
      // blocks); treat that exactly like an increase and back off.
      double f_new;
      try {
        f_new = obj.f_value(cand);
      } catch (const std::exception&) {
        f_new = std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(f_new) && f_new < f_cur) {
        trace.records.push_back({k, f_cur, dist, alpha});
        p = cand;
        f_cur = f_new;
        accepted = true;
      } else {
        alpha *= 0.5;
        if (++halvings >= cfg.max_halvings) {
          trace.records.push_back({k, f_cur, 0.0, alpha});
          throw StalledError(std::move(trace));
        }
      }
    }
  }
  trace.records.push_back({k, f_cur, 0.0, alpha});
  return {p, trace};
}

bool check_descent(const IterateTrace& trace) {
  if (trace.empty()) throw InvalidInputError("check_descent: empty trace");
  constexpr double slack = 1e-9;
  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
    const IterateRecord& cur = trace.records[i];
    const IterateRecord& nxt = trace.records[i + 1];
    const double decrease = cur.f_value - nxt.f_value;
    const double need = cur.step_distance * cur.step_distance / (2.0 * cur.alpha);
    if (decrease < need - slack) return false;
  }
  return true;
}

bool check_step_bound(const IterateTrace& trace, double f_star, double lipschitz_L) {
  if (trace.empty()) throw InvalidInputError("check_step_bound: empty trace");
  double sum_sq = 0.0;
  for (const auto& rec : trace.records) sum_sq += rec.step_distance * rec.step_distance;
  const double budget = 2.0 * (trace.initial_f() - f_star) / lipschitz_L;
  return sum_sq <= budget * (1.0 + 1e-9) + 1e-15;
}

double estimate_lipschitz(const std::function<Tangent(const ManifoldPoint&)>& grad,
                          const ManifoldPoint& around, Rng& rng, int probes) {
  const Tangent g0 = grad(around);
  double scale = 0.0;
  for (const auto& s : around.spd_parts) scale += s.mat().squaredNorm();
  for (const auto& v : around.vector_parts) scale += v.squaredNorm();
  // Small radius: measures the local gradient Lipschitz constant rather than
  // the blowup at the cone boundary; boundary steps are handled by rejection.
  const double radius = 1e-4 * (1.0 + std::sqrt(scale));

  double best = 0.0;
  for (int probe = 0; probe < probes; ++probe) {
    ManifoldPoint q = around;
    for (auto& s : q.spd_parts) {
      const int n = s.dim();
      Matrix dir(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
          dir(i, j) = rng.gaussian();
          dir(j, i) = dir(i, j);
        }
      }
      dir *= radius / std::max(dir.norm(), 1e-12);
      // Project back so probes stay valid even at the eigenvalue floor.
      s = spd_project(SymmetricMatrix(s.mat() + dir), s.floor());
    }
    for (auto& v : q.vector_parts) {
      if (v.size() == 0) continue;
      Vector dir = rng.gaussian_vector(static_cast<int>(v.size()));
      dir *= radius / std::max(dir.norm(), 1e-12);
      v += dir;
    }
    const double dist = manifold_distance(around, q);
    if (dist < 1e-12) continue;
    const double dist_sq = dist * dist;
    const Tangent gq = grad(q);
    double diff_sq = 0.0;
    for (std::size_t i = 0; i < g0.spd_parts.size(); ++i) {
      diff_sq += (gq.spd_parts[i] - g0.spd_parts[i]).squaredNorm();
    }
    for (std::size_t i = 0; i < g0.vector_parts.size(); ++i) {
      diff_sq += (gq.vector_parts[i] - g0.vector_parts[i]).squaredNorm();
    }
    best = std::max(best, std::sqrt(diff_sq / dist_sq));
  }
  return best;
}

}  // namespace rppo
