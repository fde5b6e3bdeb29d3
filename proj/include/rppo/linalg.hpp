#pragma once

#include <Eigen/Core>

namespace rppo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultEigFloor = 1e-8;

// Dense real symmetric matrix; entries are symmetrized on construction so
// entries(i,j) == entries(j,i) holds exactly.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Matrix m);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& mat() const { return m_; }

 private:
  Matrix m_;
};

// Symmetric positive definite matrix with a smallest admissible eigenvalue.
// The checked constructor verifies the spectrum; trusted() skips the check
// for matrices that are SPD by construction (projections, Schur complements).
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix m, double floor = kDefaultEigFloor);

  static SpdMatrix trusted(Matrix m, double floor);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& mat() const { return m_; }
  double floor() const { return floor_; }

  SymmetricMatrix as_symmetric() const { return SymmetricMatrix(m_); }

 private:
  SpdMatrix() = default;
  Matrix m_;
  double floor_ = 0.0;
};

struct EigenDecomposition {
  Vector eigenvalues;   // sorted descending
  Matrix eigenvectors;  // orthonormal columns, aligned with eigenvalues

  Matrix reconstruct() const;
};

EigenDecomposition eigh(const SymmetricMatrix& m);

// Principal matrix square root; result * result == m.
SpdMatrix spd_sqrt(const SpdMatrix& m);

// Inverse through the eigendecomposition; refuses condition numbers > 1e12.
SpdMatrix spd_inverse(const SpdMatrix& m);

// Frobenius-nearest matrix with all eigenvalues >= floor: eigenvectors are
// kept and each eigenvalue is replaced by max(eigenvalue, floor).
SpdMatrix spd_project(const SymmetricMatrix& m, double floor);

double frobenius_distance(const SymmetricMatrix& a, const SymmetricMatrix& b);
double frobenius_distance(const Matrix& a, const Matrix& b);

}  // namespace rppo
