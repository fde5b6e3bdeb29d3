#include "rppo/ot.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "rppo/errors.hpp"
#include "rppo/parallel.hpp"

namespace rppo {

namespace {

// Symmetric square root with negative dust clipped at zero.
Matrix sym_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Vector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Matrix r = es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

}  // namespace

double bures_trace(const Matrix& s0, const Matrix& s1) {
  const Matrix root0 = sym_sqrt(s0);
  const Matrix cross = sym_sqrt(root0 * s1 * root0);
  return s0.trace() + s1.trace() - 2.0 * cross.trace();
}

double w2_gaussian_sq(const DecodedGaussian& a, const DecodedGaussian& b) {
  if (a.dim() != b.dim()) throw DimensionMismatchError("w2_gaussian_sq: dimension mismatch");
  const double mean_term = (a.mean - b.mean).squaredNorm();
  return std::max(0.0, mean_term + bures_trace(a.covariance.mat(), b.covariance.mat()));
}

// ---------------------------------------------------------------------------
// Transportation simplex.
// ---------------------------------------------------------------------------

namespace {

struct SimplexState {
  int m, n;
  Matrix flow;
  std::vector<char> basic;  // m*n flags

  int idx(int i, int j) const { return i * n + j; }
};

void northwest_corner(SimplexState& st, Vector a, Vector b) {
  int i = 0, j = 0;
  for (int step = 0; step < st.m + st.n - 1; ++step) {
    const double x = std::max(0.0, std::min(a[i], b[j]));
    st.flow(i, j) = x;
    st.basic[st.idx(i, j)] = 1;
    a[i] -= x;
    b[j] -= x;
    if (i == st.m - 1) {
      ++j;
    } else if (j == st.n - 1) {
      ++i;
    } else if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
}

// Duals from u[0] = 0 over the spanning tree of basic cells.
void solve_duals(const SimplexState& st, const Matrix& cost, Vector& u, Vector& v) {
  const int m = st.m, n = st.n;
  std::vector<char> u_set(m, 0), v_set(n, 0);
  u[0] = 0.0;
  u_set[0] = 1;
  std::deque<int> queue;  // rows as i, cols as m+j
  queue.push_back(0);
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    if (node < m) {
      const int i = node;
      for (int j = 0; j < n; ++j) {
        if (st.basic[st.idx(i, j)] && !v_set[j]) {
          v[j] = cost(i, j) - u[i];
          v_set[j] = 1;
          queue.push_back(m + j);
        }
      }
    } else {
      const int j = node - m;
      for (int i = 0; i < m; ++i) {
        if (st.basic[st.idx(i, j)] && !u_set[i]) {
          u[i] = cost(i, j) - v[j];
          u_set[i] = 1;
          queue.push_back(i);
        }
      }
    }
  }
}

// Alternating path between row i0 and col j0 through the basis tree; returns
// the cells of the cycle excluding the entering cell, signs alternating
// starting with minus.
std::vector<std::pair<int, int>> find_cycle_path(const SimplexState& st, int i0, int j0) {
  const int m = st.m, n = st.n;
  const int start = i0;
  const int goal = m + j0;
  std::vector<int> parent(m + n, -1);
  std::vector<char> seen(m + n, 0);
  seen[start] = 1;
  std::deque<int> queue{start};
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    if (node == goal) break;
    if (node < m) {
      for (int j = 0; j < n; ++j) {
        if (st.basic[st.idx(node, j)] && !seen[m + j]) {
          seen[m + j] = 1;
          parent[m + j] = node;
          queue.push_back(m + j);
        }
      }
    } else {
      const int j = node - m;
      for (int i = 0; i < m; ++i) {
        if (st.basic[st.idx(i, j)] && !seen[i]) {
          seen[i] = 1;
          parent[i] = m + j;
          queue.push_back(i);
        }
      }
    }
  }
  if (!seen[goal]) throw std::runtime_error("solve_transport: basis lost connectivity");
  std::vector<int> nodes;
  for (int node = goal; node != -1; node = parent[node]) nodes.push_back(node);
  // nodes run goal -> start; reverse so edges leave the entering row first.
  std::vector<std::pair<int, int>> cells;
  for (std::size_t p = nodes.size() - 1; p > 0; --p) {
    const int x = nodes[p], y = nodes[p - 1];
    const int row = x < m ? x : y;
    const int col = x < m ? y - m : x - m;
    cells.emplace_back(row, col);
  }
  return cells;
}

}  // namespace

TransportResult solve_transport(const Vector& row, const Vector& col, const Matrix& cost) {
  const int m = static_cast<int>(row.size());
  const int n = static_cast<int>(col.size());
  if (m < 1 || n < 1) throw InvalidInputError("solve_transport: empty marginal");
  if (cost.rows() != m || cost.cols() != n) {
    throw DimensionMismatchError("solve_transport: cost shape mismatch");
  }
  if (!cost.allFinite()) throw InvalidInputError("solve_transport: non-finite cost");
  if (row.minCoeff() < 0.0 || col.minCoeff() < 0.0) {
    throw InvalidInputError("solve_transport: negative marginal entry");
  }
  if (std::abs(row.sum() - col.sum()) > 1e-9) {
    throw InvalidInputError("solve_transport: marginal sums differ");
  }

  // Clamp vanishing weights and renormalize; keeps the polytope nondegenerate
  // without measurably moving the objective.
  Vector a = row.cwiseMax(1e-12);
  Vector b = col.cwiseMax(1e-12);
  a *= row.sum() > 0 ? row.sum() / a.sum() : 1.0 / a.sum();
  b *= col.sum() > 0 ? row.sum() / b.sum() : 1.0 / b.sum();

  SimplexState st;
  st.m = m;
  st.n = n;
  st.flow = Matrix::Zero(m, n);
  st.basic.assign(m * n, 0);
  northwest_corner(st, a, b);

  Vector u(m), v(n);
  const int max_pivots = 200 * (m + n) * (m + n) + 1000;
  for (int pivot = 0; pivot < max_pivots; ++pivot) {
    solve_duals(st, cost, u, v);

    // Bland: first improving cell in row-major order.
    int ei = -1, ej = -1;
    for (int i = 0; i < m && ei < 0; ++i) {
      for (int j = 0; j < n; ++j) {
        if (!st.basic[st.idx(i, j)] && cost(i, j) - u[i] - v[j] < -1e-11) {
          ei = i;
          ej = j;
          break;
        }
      }
    }
    if (ei < 0) break;  // optimal

    const auto path = find_cycle_path(st, ei, ej);
    // Path cells alternate -, +, -, ... after the entering (+) cell.
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < path.size(); p += 2) {
      theta = std::min(theta, st.flow(path[p].first, path[p].second));
    }
    // Leaving cell: smallest index among minus cells attaining theta.
    int leave = -1;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const auto [i, j] = path[p];
      if (st.flow(i, j) <= theta) {
        const int id = st.idx(i, j);
        if (leave < 0 || id < leave) leave = id;
      }
    }
    st.flow(ei, ej) = theta;
    st.basic[st.idx(ei, ej)] = 1;
    for (std::size_t p = 0; p < path.size(); ++p) {
      const auto [i, j] = path[p];
      if (p % 2 == 0) {
        st.flow(i, j) = std::max(0.0, st.flow(i, j) - theta);
      } else {
        st.flow(i, j) += theta;
      }
    }
    st.flow(leave / n, leave % n) = 0.0;
    st.basic[leave] = 0;
    if (pivot == max_pivots - 1) {
      throw std::runtime_error("solve_transport: pivot limit exceeded");
    }
  }

  TransportResult out;
  out.plan = st.flow.cwiseMax(0.0);
  out.objective = (out.plan.array() * cost.array()).sum();
  return out;
}

// ---------------------------------------------------------------------------
// Mixture distances.
// ---------------------------------------------------------------------------

Matrix build_w2_cost(const std::vector<DecodedGaussian>& a, const std::vector<DecodedGaussian>& b) {
  const int ka = static_cast<int>(a.size());
  const int kb = static_cast<int>(b.size());
  Matrix cost(ka, kb);
  parallel_for(static_cast<std::size_t>(ka) * kb, [&](std::size_t p) {
    const int i = static_cast<int>(p) / kb;
    const int j = static_cast<int>(p) % kb;
    cost(i, j) = w2_gaussian_sq(a[i], b[j]);
  });
  return cost;
}

Matrix ref::build_w2_cost(const std::vector<DecodedGaussian>& a,
                          const std::vector<DecodedGaussian>& b) {
  Matrix cost(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      cost(i, j) = w2_gaussian_sq(a[i], b[j]);
    }
  }
  return cost;
}

Matrix build_tv_cost(const std::vector<DecodedGaussian>& a, const std::vector<DecodedGaussian>& b) {
  const int ka = static_cast<int>(a.size());
  const int kb = static_cast<int>(b.size());
  Matrix cost(ka, kb);
  parallel_for(static_cast<std::size_t>(ka) * kb, [&](std::size_t p) {
    const int i = static_cast<int>(p) / kb;
    const int j = static_cast<int>(p) % kb;
    cost(i, j) = tv_bound_gaussian(a[i], b[j]);
  });
  return cost;
}

TransportResult gmm_w2_transport(const Vector& w_a, const std::vector<DecodedGaussian>& a,
                                 const Vector& w_b, const std::vector<DecodedGaussian>& b) {
  return solve_transport(w_a, w_b, build_w2_cost(a, b));
}

double gmm_w2_sq(const Vector& w_a, const std::vector<DecodedGaussian>& a, const Vector& w_b,
                 const std::vector<DecodedGaussian>& b) {
  return gmm_w2_transport(w_a, a, w_b, b).objective;
}

TransportResult gmm_w2_transport(const GmmParams& a, const GmmParams& b) {
  if (a.joint_dim() != b.joint_dim()) {
    throw DimensionMismatchError("gmm_w2_transport: joint dimension mismatch");
  }
  return gmm_w2_transport(a.weights(), a.decoded_all(), b.weights(), b.decoded_all());
}

double gmm_w2_sq(const GmmParams& a, const GmmParams& b) {
  return gmm_w2_transport(a, b).objective;
}

double tv_bound_gaussian(const DecodedGaussian& a, const DecodedGaussian& b) {
  if (a.dim() != b.dim()) throw DimensionMismatchError("tv_bound_gaussian: dimension mismatch");
  const double mean_scale = std::max({1.0, a.mean.norm(), b.mean.norm()});
  if ((a.mean - b.mean).norm() > 1e-9 * mean_scale) {
    // The componentwise bound needs a shared mean; total variation never
    // exceeds 1, so the universal cap keeps the bound valid.
    return 1.5;
  }
  const Matrix inv0 = spd_inverse(a.covariance).mat();
  const double gap = (inv0 * b.covariance.mat() - Matrix::Identity(a.dim(), a.dim())).norm();
  return 1.5 * std::min(1.0, gap);
}

double gmm_tv_bound(const Vector& w_a, const std::vector<DecodedGaussian>& a, const Vector& w_b,
                    const std::vector<DecodedGaussian>& b) {
  return solve_transport(w_a, w_b, build_tv_cost(a, b)).objective;
}

double gmm_tv_bound(const GmmParams& a, const GmmParams& b) {
  if (a.joint_dim() != b.joint_dim()) {
    throw DimensionMismatchError("gmm_tv_bound: joint dimension mismatch");
  }
  return gmm_tv_bound(a.weights(), a.decoded_all(), b.weights(), b.decoded_all());
}

Matrix w2_grad_wrt_first(const SpdMatrix& s0, const SpdMatrix& s1) {
  if (s0.dim() != s1.dim()) throw DimensionMismatchError("w2_grad_wrt_first: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> es(s0.mat());
  const Vector eigs = es.eigenvalues();
  if (!(eigs.minCoeff() > 0.0) || eigs.maxCoeff() / eigs.minCoeff() > 1e12) {
    throw IllConditionedError("w2_grad_wrt_first: first argument ill-conditioned");
  }
  const Matrix root = es.eigenvectors() * eigs.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  const Matrix inv_root =
      es.eigenvectors() * eigs.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  const Matrix cross = sym_sqrt(root * s1.mat() * root);
  Matrix g = Matrix::Identity(s0.dim(), s0.dim()) - inv_root * cross * inv_root;
  return 0.5 * (g + g.transpose());
}

}  // namespace rppo
