#include "rppo/linalg.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "rppo/errors.hpp"

namespace rppo {

namespace {

void require_square_finite(const Matrix& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw InvalidInputError(std::string(who) + ": matrix must be square and non-empty");
  }
  if (!m.allFinite()) {
    throw InvalidInputError(std::string(who) + ": non-finite entries");
  }
}

// Eigen returns ascending eigenvalues; flip both factors to descending.
EigenDecomposition eigh_raw(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw InvalidInputError("eigh: eigendecomposition failed to converge");
  }
  const int n = static_cast<int>(sym.rows());
  EigenDecomposition out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors.resize(n, n);
  for (int i = 0; i < n; ++i) out.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  return out;
}

Matrix rebuild(const EigenDecomposition& ed, const Vector& new_eigs) {
  Matrix m = ed.eigenvectors * new_eigs.asDiagonal() * ed.eigenvectors.transpose();
  return 0.5 * (m + m.transpose());
}

}  // namespace

SymmetricMatrix::SymmetricMatrix(Matrix m) {
  require_square_finite(m, "SymmetricMatrix");
  m_ = 0.5 * (m + m.transpose());
}

SpdMatrix::SpdMatrix(Matrix m, double floor) {
  require_square_finite(m, "SpdMatrix");
  m_ = 0.5 * (m + m.transpose());
  floor_ = floor;
  const EigenDecomposition ed = eigh_raw(m_);
  const double lo = ed.eigenvalues[ed.eigenvalues.size() - 1];
  const double tol = 1e-9 * std::max(1.0, m_.norm());
  if (lo < floor - tol) {
    throw DegenerateMatrixError("SpdMatrix: eigenvalue " + std::to_string(lo) +
                                " below floor " + std::to_string(floor));
  }
}

SpdMatrix SpdMatrix::trusted(Matrix m, double floor) {
  SpdMatrix out;
  out.m_ = 0.5 * (m + m.transpose());
  out.floor_ = floor;
  return out;
}

Matrix EigenDecomposition::reconstruct() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

EigenDecomposition eigh(const SymmetricMatrix& m) { return eigh_raw(m.mat()); }

SpdMatrix spd_sqrt(const SpdMatrix& m) {
  const EigenDecomposition ed = eigh_raw(m.mat());
  const double lo = ed.eigenvalues[ed.eigenvalues.size() - 1];
  if (lo < m.floor() - 1e-9 * std::max(1.0, m.mat().norm())) {
    throw DegenerateMatrixError("spd_sqrt: eigenvalue below floor");
  }
  Vector roots = ed.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return SpdMatrix::trusted(rebuild(ed, roots), 0.0);
}

SpdMatrix spd_inverse(const SpdMatrix& m) {
  const EigenDecomposition ed = eigh_raw(m.mat());
  const int n = m.dim();
  const double hi = ed.eigenvalues[0];
  const double lo = ed.eigenvalues[n - 1];
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw IllConditionedError("spd_inverse: condition number above 1e12");
  }
  Vector inv = ed.eigenvalues.cwiseInverse();
  return SpdMatrix::trusted(rebuild(ed, inv), 0.0);
}

SpdMatrix spd_project(const SymmetricMatrix& m, double floor) {
  if (!(floor > 0.0)) throw InvalidInputError("spd_project: floor must be positive");
  const EigenDecomposition ed = eigh_raw(m.mat());
  Vector clipped = ed.eigenvalues.cwiseMax(floor);
  return SpdMatrix::trusted(rebuild(ed, clipped), floor);
}

double frobenius_distance(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  return frobenius_distance(a.mat(), b.mat());
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatchError("frobenius_distance: dimension mismatch");
  }
  return (a - b).norm();
}

}  // namespace rppo
