#include "rppo/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/QR>

#include "rppo/errors.hpp"
#include "rppo/ot.hpp"

namespace rppo {

Matrix fd_gradient_sym(const std::function<double(const Matrix&)>& fn, const Matrix& at,
                       double h) {
  const int n = static_cast<int>(at.rows());
  Matrix grad(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      Matrix pert = Matrix::Zero(n, n);
      pert(i, j) = h;
      pert(j, i) = h;
      const double slope = (fn(at + pert) - fn(at - pert)) / (2.0 * h);
      if (i == j) {
        grad(i, i) = slope;
      } else {
        grad(i, j) = 0.5 * slope;
        grad(j, i) = 0.5 * slope;
      }
    }
  }
  return grad;
}

Vector fd_gradient_vec(const std::function<double(const Vector&)>& fn, const Vector& at,
                       double h) {
  Vector grad(at.size());
  for (int i = 0; i < at.size(); ++i) {
    Vector plus = at, minus = at;
    plus[i] += h;
    minus[i] -= h;
    grad[i] = (fn(plus) - fn(minus)) / (2.0 * h);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Transportation polytope vertex enumeration.
// ---------------------------------------------------------------------------

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  bool join(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

// Solve the flows of a spanning-tree basis by leaf peeling; returns false if
// any flow would be meaningfully negative.
bool tree_flows(const std::vector<std::pair<int, int>>& cells, Vector a, Vector b,
                std::vector<double>& flows) {
  const int m = static_cast<int>(a.size());
  const int n = static_cast<int>(b.size());
  const int cells_n = static_cast<int>(cells.size());
  std::vector<int> degree(m + n, 0);
  for (const auto& [i, j] : cells) {
    ++degree[i];
    ++degree[m + j];
  }
  flows.assign(cells_n, 0.0);
  std::vector<char> used(cells_n, 0);
  for (int round = 0; round < cells_n; ++round) {
    int pick = -1;
    for (int c = 0; c < cells_n; ++c) {
      if (used[c]) continue;
      const auto& [i, j] = cells[c];
      if (degree[i] == 1 || degree[m + j] == 1) {
        pick = c;
        break;
      }
    }
    if (pick < 0) return false;  // cycle; not a tree
    const auto& [i, j] = cells[pick];
    const double flow = degree[i] == 1 ? a[i] : b[j];
    if (flow < -1e-10) return false;
    flows[pick] = flow;
    a[i] -= flow;
    b[j] -= flow;
    --degree[i];
    --degree[m + j];
    used[pick] = 1;
  }
  return true;
}

}  // namespace

double transport_vertex_enum_min(const Vector& row, const Vector& col, const Matrix& cost) {
  const int m = static_cast<int>(row.size());
  const int n = static_cast<int>(col.size());
  const int total = m * n;
  const int basis = m + n - 1;
  double best = std::numeric_limits<double>::infinity();

  std::vector<int> pick(basis);
  std::function<void(int, int)> recurse = [&](int start, int depth) {
    if (depth == basis) {
      std::vector<std::pair<int, int>> cells;
      UnionFind uf(m + n);
      for (int c = 0; c < basis; ++c) {
        const int i = pick[c] / n;
        const int j = pick[c] % n;
        if (!uf.join(i, m + j)) return;  // cycle
        cells.emplace_back(i, j);
      }
      std::vector<double> flows;
      if (!tree_flows(cells, row, col, flows)) return;
      double obj = 0.0;
      for (int c = 0; c < basis; ++c) {
        obj += std::max(0.0, flows[c]) * cost(cells[c].first, cells[c].second);
      }
      best = std::min(best, obj);
      return;
    }
    for (int v = start; v <= total - (basis - depth); ++v) {
      pick[depth] = v;
      recurse(v + 1, depth + 1);
    }
  };
  recurse(0, 0);
  return best;
}

// ---------------------------------------------------------------------------
// Quadrature total variation.
// ---------------------------------------------------------------------------

namespace {

double mixture_pdf_1d(double x, const Vector& w, const std::vector<DecodedGaussian>& comps) {
  double p = 0.0;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const double mu = comps[i].mean[0];
    const double var = comps[i].covariance.mat()(0, 0);
    p += w[i] * std::exp(-0.5 * (x - mu) * (x - mu) / var) / std::sqrt(2.0 * std::numbers::pi * var);
  }
  return p;
}

}  // namespace

double tv_quadrature_1d(const Vector& w_a, const std::vector<DecodedGaussian>& a,
                        const Vector& w_b, const std::vector<DecodedGaussian>& b, int points) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  auto widen = [&](const std::vector<DecodedGaussian>& comps) {
    for (const auto& c : comps) {
      const double sigma = std::sqrt(c.covariance.mat()(0, 0));
      lo = std::min(lo, c.mean[0] - 10.0 * sigma);
      hi = std::max(hi, c.mean[0] + 10.0 * sigma);
    }
  };
  widen(a);
  widen(b);
  const double dx = (hi - lo) / (points - 1);
  double sum = 0.0;
  for (int i = 0; i < points; ++i) {
    const double x = lo + i * dx;
    const double gap = std::abs(mixture_pdf_1d(x, w_a, a) - mixture_pdf_1d(x, w_b, b));
    sum += (i == 0 || i == points - 1) ? 0.5 * gap : gap;
  }
  return 0.5 * sum * dx;
}

// ---------------------------------------------------------------------------
// Random instances.
// ---------------------------------------------------------------------------

DecodedGaussian random_gaussian(int dim, Rng& rng) {
  Vector mean(dim);
  for (int i = 0; i < dim; ++i) mean[i] = rng.uniform(-2.0, 2.0);
  Matrix w(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) w(i, j) = rng.gaussian();
  }
  Matrix cov = 0.3 * Matrix::Identity(dim, dim) + (w * w.transpose()) / (2.0 * dim);
  return DecodedGaussian{mean, SpdMatrix(cov, 0.0)};
}

Vector random_simplex(int k, Rng& rng) {
  Vector w(k);
  for (int i = 0; i < k; ++i) w[i] = -std::log(std::max(rng.uniform(), 1e-300));
  return w / w.sum();
}

GmmParams random_gmm(int state_dim, int action_dim, int components, Rng& rng, double floor) {
  const int d = state_dim + action_dim;
  std::vector<SpdMatrix> comps;
  comps.reserve(components);
  for (int i = 0; i < components; ++i) {
    const DecodedGaussian g = random_gaussian(d, rng);
    comps.push_back(SpdMatrix(encode(g).mat(), floor));
  }
  Vector eta(components);
  for (int i = 0; i < components; ++i) eta[i] = rng.uniform(-1.0, 1.0);
  eta[components - 1] = 0.0;
  return GmmParams(state_dim, action_dim, std::move(eta), std::move(comps), floor);
}

Batch random_batch(const GmmParams& old_policy, int transitions, Rng& rng) {
  Batch batch;
  batch.gamma = 0.99;
  batch.traj_offsets = {0, static_cast<std::size_t>(transitions)};
  batch.transitions.reserve(transitions);
  Vector adv(transitions);
  for (int t = 0; t < transitions; ++t) {
    Transition tr;
    tr.state = rng.gaussian_vector(old_policy.state_dim());
    tr.action = rng.gaussian_vector(old_policy.action_dim());
    tr.reward = rng.gaussian();
    tr.next_state = tr.state;
    tr.done = t + 1 == transitions;
    batch.transitions.push_back(std::move(tr));
    adv[t] = rng.gaussian();
  }
  adv.array() -= adv.mean();
  const double sd = std::sqrt(adv.squaredNorm() / transitions);
  if (sd > 1e-12) adv /= sd;
  batch.advantages = std::move(adv);
  attach_old_logp(batch, old_policy);
  return batch;
}

// ---------------------------------------------------------------------------
// Suites.
// ---------------------------------------------------------------------------

namespace {

Matrix random_spd_in(double lo, double hi, int n, Rng& rng) {
  Matrix w(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) w(i, j) = rng.gaussian();
  }
  const Eigen::HouseholderQR<Matrix> qr(w);
  const Matrix q = qr.householderQ();
  Vector eigs(n);
  for (int i = 0; i < n; ++i) eigs[i] = rng.uniform(lo, hi);
  Matrix m = q * eigs.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

}  // namespace

std::vector<QuadraticRun> quadratic_battery(int instances, std::uint64_t seed) {
  std::vector<QuadraticRun> runs;
  runs.reserve(instances);
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, inst));
    const int n = 1 + inst % 4;
    const Matrix target = random_spd_in(0.5, 2.5, n, rng);
    const Matrix start = random_spd_in(0.5, 2.5, n, rng);
    const bool with_penalty = inst % 2 == 1;
    const double beta = 0.75;
    const double lipschitz = with_penalty ? 1.0 + beta : 1.0;

    ObjectiveSpec obj;
    obj.g_value = [target](const ManifoldPoint& p) {
      return 0.5 * (p.spd_parts[0].mat() - target).squaredNorm();
    };
    obj.g_grad = [target](const ManifoldPoint& p) {
      Tangent t;
      t.spd_parts.push_back(p.spd_parts[0].mat() - target);
      return t;
    };
    if (with_penalty) {
      obj.phi_value = [start, beta](const ManifoldPoint& p) {
        return 0.5 * beta * (p.spd_parts[0].mat() - start).squaredNorm();
      };
      obj.phi_grad = [start, beta](const ManifoldPoint& p) {
        Tangent t;
        t.spd_parts.push_back(beta * (p.spd_parts[0].mat() - start));
        return t;
      };
    }
    obj.lipschitz_L = lipschitz;

    const Matrix minimizer = with_penalty ? ((target + beta * start) / (1.0 + beta)).eval() : target;
    ManifoldPoint star;
    star.spd_parts.push_back(SpdMatrix(minimizer, kDefaultEigFloor));

    ProxConfig cfg;
    cfg.max_iters = 500;
    cfg.step_tol = 1e-12;
    // Vary the step size across the admissible range (0, 1/L].
    cfg.alpha0 = (1.0 / lipschitz) / (1.0 + inst % 3);

    ManifoldPoint p0;
    p0.spd_parts.push_back(SpdMatrix(start, kDefaultEigFloor));
    auto [result, trace] = optimize(p0, obj, cfg);

    QuadraticRun run;
    run.trace = std::move(trace);
    run.f_star = obj.f_value(star);
    run.lipschitz = lipschitz;
    run.final_gap = (result.spd_parts[0].mat() - minimizer).norm();
    runs.push_back(std::move(run));
  }
  return runs;
}

CheckResult run_quadratic_suite(int instances, std::uint64_t seed) {
  CheckResult res{"quadratic descent/step-bound", true, ""};
  const auto runs = quadratic_battery(instances, seed);
  int idx = 0;
  for (const auto& run : runs) {
    const bool descent = check_descent(run.trace);
    const bool bound = check_step_bound(run.trace, run.f_star, run.lipschitz);
    const bool conv = run.final_gap <= 1e-6;
    if (!descent || !bound || !conv) {
      res.pass = false;
      std::ostringstream msg;
      msg << "instance " << idx << ": descent=" << descent << " bound=" << bound
          << " gap=" << run.final_gap;
      res.detail = msg.str();
      return res;
    }
    ++idx;
  }
  res.detail = std::to_string(instances) + " instances";
  return res;
}

namespace {

double stacked_rel_error(const GmmTangent& analytic, const GmmTangent& fd) {
  double diff_sq = 0.0, ref_sq = 0.0;
  for (std::size_t i = 0; i < analytic.d_components.size(); ++i) {
    diff_sq += (analytic.d_components[i] - fd.d_components[i]).squaredNorm();
    ref_sq += fd.d_components[i].squaredNorm();
  }
  diff_sq += (analytic.d_eta - fd.d_eta).squaredNorm();
  ref_sq += fd.d_eta.squaredNorm();
  return std::sqrt(diff_sq) / std::max(std::sqrt(ref_sq), 1e-8);
}

GmmParams replace_component(const GmmParams& g, int comp, const Matrix& m) {
  std::vector<SpdMatrix> comps;
  comps.reserve(g.components());
  for (int i = 0; i < g.components(); ++i) {
    comps.push_back(i == comp ? SpdMatrix::trusted(m, g.floor()) : g.component(i));
  }
  return GmmParams(g.state_dim(), g.action_dim(), g.eta(), std::move(comps), g.floor());
}

GmmParams replace_eta(const GmmParams& g, const Vector& free_eta) {
  Vector eta = Vector::Zero(g.components());
  eta.head(g.components() - 1) = free_eta;
  std::vector<SpdMatrix> comps;
  for (int i = 0; i < g.components(); ++i) comps.push_back(g.component(i));
  return GmmParams(g.state_dim(), g.action_dim(), std::move(eta), std::move(comps), g.floor());
}

// Finite differences of a scalar function of the whole mixture, stacked into
// a GmmTangent.
GmmTangent fd_gmm_gradient(const std::function<double(const GmmParams&)>& fn, const GmmParams& at,
                           double h) {
  GmmTangent out;
  for (int c = 0; c < at.components(); ++c) {
    out.d_components.push_back(fd_gradient_sym(
        [&](const Matrix& m) { return fn(replace_component(at, c, m)); },
        at.component(c).mat(), h));
  }
  const int free = std::max(0, at.components() - 1);
  out.d_eta = fd_gradient_vec(
      [&](const Vector& v) { return fn(replace_eta(at, v)); },
      at.eta().head(free), h);
  return out;
}

}  // namespace

CheckResult run_gradient_fd_suite(int instances, std::uint64_t seed, bool inject_fault) {
  CheckResult res{"gradient finite differences", true, ""};
  constexpr double kStep = 1e-5;
  double worst_surrogate = 0.0, worst_phi_e = 0.0, worst_phi_w = 0.0, worst_bures = 0.0;

  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, 7000 + inst));
    const int ds = 1 + static_cast<int>(rng.raw() % 3);
    const int da = 1 + static_cast<int>(rng.raw() % 2);
    const int k = 1 + static_cast<int>(rng.raw() % 3);
    const GmmParams theta_old = random_gmm(ds, da, k, rng);
    const GmmParams theta_new = random_gmm(ds, da, k, rng);
    const Batch batch = random_batch(theta_old, 48, rng);
    const double beta = 0.8;

    GmmTangent grad = surrogate_grad(theta_new, theta_old, batch);
    if (inject_fault) grad.d_components[0](0, 0) += 1e-2;
    const GmmTangent fd = fd_gmm_gradient(
        [&](const GmmParams& g) { return surrogate_value(g, theta_old, batch); }, theta_new,
        kStep);
    worst_surrogate = std::max(worst_surrogate, stacked_rel_error(grad, fd));

    const GmmTangent grad_e = phi_grad(theta_new, theta_old, beta, ProximityKind::kEuclidean);
    const GmmTangent fd_e = fd_gmm_gradient(
        [&](const GmmParams& g) { return phi_value(g, theta_old, beta, ProximityKind::kEuclidean); },
        theta_new, kStep);
    worst_phi_e = std::max(worst_phi_e, stacked_rel_error(grad_e, fd_e));

    const Matrix plan = gmm_w2_transport(theta_new, theta_old).plan;
    const GmmTangent grad_w = phi_grad(theta_new, theta_old, beta, ProximityKind::kWasserstein);
    const GmmTangent fd_w = fd_gmm_gradient(
        [&](const GmmParams& g) { return phi_value_fixed_plan(g, theta_old, beta, plan); },
        theta_new, kStep);
    worst_phi_w = std::max(worst_phi_w, stacked_rel_error(grad_w, fd_w));

    const int n = 1 + static_cast<int>(rng.raw() % 4);
    const SpdMatrix s0(random_spd_in(0.4, 2.5, n, rng), 0.0);
    const SpdMatrix s1(random_spd_in(0.4, 2.5, n, rng), 0.0);
    const Matrix bures_grad = w2_grad_wrt_first(s0, s1);
    const Matrix bures_fd = fd_gradient_sym(
        [&](const Matrix& m) { return bures_trace(m, s1.mat()); }, s0.mat(), kStep);
    worst_bures = std::max(
        worst_bures, (bures_grad - bures_fd).norm() / std::max(bures_fd.norm(), 1e-8));
  }

  std::ostringstream msg;
  msg << "surrogate " << worst_surrogate << ", phi_e " << worst_phi_e << ", phi_w " << worst_phi_w
      << ", bures " << worst_bures << " over " << instances << " instances";
  res.detail = msg.str();
  res.pass = worst_surrogate <= 1e-4 && worst_phi_e <= 1e-4 && worst_phi_w <= 1e-3 &&
             worst_bures <= 1e-5;
  return res;
}

CheckResult run_transport_suite(int instances, std::uint64_t seed) {
  CheckResult res{"transport vs vertex enumeration", true, ""};
  double worst = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, 5000 + inst));
    const int k = 1 + static_cast<int>(rng.raw() % 3);
    const GmmParams a = random_gmm(1, 1, k, rng);
    const GmmParams b = random_gmm(1, 1, k, rng);
    const double solved = gmm_w2_sq(a, b);
    const double enumerated =
        transport_vertex_enum_min(a.weights(), b.weights(), build_w2_cost(a.decoded_all(), b.decoded_all()));
    worst = std::max(worst, std::abs(solved - enumerated));
  }
  res.pass = worst <= 1e-8;
  res.detail = "max gap " + std::to_string(worst) + " over " + std::to_string(instances) +
               " instances";
  return res;
}

CheckResult run_tv_suite(int instances, std::uint64_t seed) {
  CheckResult res{"TV bound vs quadrature", true, ""};
  double worst_violation = -1.0;
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, 9000 + inst));
    const int ka = 1 + static_cast<int>(rng.raw() % 3);
    const int kb = 1 + static_cast<int>(rng.raw() % 3);
    std::vector<DecodedGaussian> a, b;
    for (int i = 0; i < ka; ++i) a.push_back(random_gaussian(1, rng));
    for (int i = 0; i < kb; ++i) b.push_back(random_gaussian(1, rng));
    const Vector wa = random_simplex(ka, rng);
    const Vector wb = random_simplex(kb, rng);
    const double bound = gmm_tv_bound(wa, a, wb, b);
    const double truth = tv_quadrature_1d(wa, a, wb, b);
    worst_violation = std::max(worst_violation, truth - bound);
  }
  res.pass = worst_violation <= 1e-3;
  res.detail = "max (true TV - bound) = " + std::to_string(worst_violation) + " over " +
               std::to_string(instances) + " instances";
  return res;
}

std::vector<CheckResult> run_selftest(bool inject_gradient_fault) {
  std::vector<CheckResult> results;
  results.push_back(run_quadratic_suite(10, 11));
  results.push_back(run_gradient_fd_suite(8, 22, inject_gradient_fault));
  results.push_back(run_transport_suite(20, 33));
  results.push_back(run_tv_suite(20, 44));
  return results;
}

}  // namespace rppo
