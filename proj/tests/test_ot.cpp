#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rppo/diagnostics.hpp"
#include "rppo/errors.hpp"
#include "rppo/ot.hpp"

using namespace rppo;

TEST_CASE("gaussian W2 closed forms") {
  Rng rng(2);
  const DecodedGaussian g = random_gaussian(3, rng);
  CHECK(w2_gaussian_sq(g, g) <= 1e-10);

  for (int d = 1; d <= 10; ++d) {
    DecodedGaussian a{Vector::Zero(d), SpdMatrix(Matrix::Identity(d, d), 0.0)};
    DecodedGaussian b{Vector::Zero(d), SpdMatrix(4.0 * Matrix::Identity(d, d), 0.0)};
    CHECK(std::abs(w2_gaussian_sq(a, b) - d) <= 1e-8);
  }

  Vector m0(1), m3(1);
  m0 << 0.0;
  m3 << 3.0;
  DecodedGaussian n01{m0, SpdMatrix(Matrix::Identity(1, 1), 0.0)};
  DecodedGaussian n31{m3, SpdMatrix(Matrix::Identity(1, 1), 0.0)};
  CHECK(w2_gaussian_sq(n01, n31) == doctest::Approx(9.0).epsilon(1e-12));

  for (int rep = 0; rep < 30; ++rep) {
    const DecodedGaussian x = random_gaussian(3, rng);
    const DecodedGaussian y = random_gaussian(3, rng);
    CHECK(std::abs(w2_gaussian_sq(x, y) - w2_gaussian_sq(y, x)) <= 1e-9);
    CHECK(w2_gaussian_sq(x, y) >= 0.0);
  }

  CHECK_THROWS_AS(w2_gaussian_sq(random_gaussian(2, rng), random_gaussian(3, rng)),
                  DimensionMismatchError);
}

TEST_CASE("transport solver basics") {
  {
    Vector one(1);
    one << 1.0;
    Matrix cost(1, 1);
    cost << 3.5;
    const TransportResult res = solve_transport(one, one, cost);
    CHECK(res.plan(0, 0) == doctest::Approx(1.0));
    CHECK(res.objective == doctest::Approx(3.5));
  }
  {
    // Identity coupling is optimal for a zero-diagonal cost.
    Vector w(3);
    w << 0.2, 0.5, 0.3;
    Matrix cost(3, 3);
    cost << 0, 1, 2, 1, 0, 1, 2, 1, 0;
    const TransportResult res = solve_transport(w, w, cost);
    CHECK(res.objective <= 1e-12);
    for (int i = 0; i < 3; ++i) CHECK(res.plan(i, i) == doctest::Approx(w[i]));
  }
  {
    Vector a(2), b(2);
    a << 0.7, 0.3;
    b << 0.5, 0.4;  // sums differ
    Matrix cost = Matrix::Ones(2, 2);
    CHECK_THROWS_AS(solve_transport(a, b, cost), InvalidInputError);
  }
}

TEST_CASE("transport optimum matches vertex enumeration") {
  Rng rng(77);
  for (int rep = 0; rep < 30; ++rep) {
    const int m = 1 + static_cast<int>(rng.raw() % 3);
    const int n = 1 + static_cast<int>(rng.raw() % 3);
    const Vector a = random_simplex(m, rng);
    const Vector b = random_simplex(n, rng);
    Matrix cost(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) cost(i, j) = rng.uniform(0.0, 5.0);
    }
    const TransportResult res = solve_transport(a, b, cost);
    const double truth = transport_vertex_enum_min(a, b, cost);
    CHECK(std::abs(res.objective - truth) <= 1e-8);

    // Plan marginals and mass.
    for (int i = 0; i < m; ++i) CHECK(res.plan.row(i).sum() == doctest::Approx(a[i]).epsilon(1e-9));
    for (int j = 0; j < n; ++j) CHECK(res.plan.col(j).sum() == doctest::Approx(b[j]).epsilon(1e-9));
    CHECK(res.plan.minCoeff() >= 0.0);

    // Never worse than the independent coupling.
    const double indep = a.transpose() * cost * b;
    CHECK(res.objective <= indep + 1e-12);
  }
}

TEST_CASE("mixture W2 reductions and metric behaviour") {
  Rng rng(12);
  const GmmParams g = random_gmm(1, 1, 3, rng);
  CHECK(gmm_w2_sq(g, g) <= 1e-9);

  // Component permutation keeps the distance at zero.
  Vector eta_perm(3);
  eta_perm << g.eta()[1], g.eta()[0], 0.0;
  // Renormalize so weights match the permuted components.
  const Vector w = g.weights();
  Vector w_perm(3);
  w_perm << w[1], w[0], w[2];
  GmmParams permuted(1, 1, eta_from_weights(w_perm), {g.component(1), g.component(0), g.component(2)},
                     g.floor());
  CHECK(gmm_w2_sq(g, permuted) <= 1e-9);

  // K=1 reduces to the single-pair distance.
  const GmmParams a1 = random_gmm(1, 1, 1, rng);
  const GmmParams b1 = random_gmm(1, 1, 1, rng);
  CHECK(gmm_w2_sq(a1, b1) ==
        doctest::Approx(w2_gaussian_sq(a1.decoded(0), b1.decoded(0))).epsilon(1e-12));

  // sqrt(W2^2) behaves like a metric on random triples.
  for (int rep = 0; rep < 15; ++rep) {
    const GmmParams x = random_gmm(1, 1, 2, rng);
    const GmmParams y = random_gmm(1, 1, 2, rng);
    const GmmParams z = random_gmm(1, 1, 2, rng);
    const double dxy = std::sqrt(gmm_w2_sq(x, y));
    const double dyz = std::sqrt(gmm_w2_sq(y, z));
    const double dxz = std::sqrt(gmm_w2_sq(x, z));
    CHECK(dxz <= dxy + dyz + 1e-7);
    CHECK(std::abs(gmm_w2_sq(x, y) - gmm_w2_sq(y, x)) <= 1e-9);
  }
}

TEST_CASE("componentwise TV bound") {
  Rng rng(18);
  const DecodedGaussian g = random_gaussian(2, rng);
  CHECK(tv_bound_gaussian(g, g) == doctest::Approx(0.0));

  // Same mean, covariance gap past the clamp.
  DecodedGaussian a{Vector::Zero(1), SpdMatrix(Matrix::Identity(1, 1), 0.0)};
  DecodedGaussian wide{Vector::Zero(1), SpdMatrix(5.0 * Matrix::Identity(1, 1), 0.0)};
  CHECK(tv_bound_gaussian(a, wide) == doctest::Approx(1.5));

  DecodedGaussian b{Vector::Zero(1), SpdMatrix(1.5 * Matrix::Identity(1, 1), 0.0)};
  CHECK(tv_bound_gaussian(a, b) == doctest::Approx(0.75));

  // Different means fall back to the universal cap.
  Vector m(1);
  m << 0.5;
  DecodedGaussian shifted{m, SpdMatrix(Matrix::Identity(1, 1), 0.0)};
  CHECK(tv_bound_gaussian(a, shifted) == doctest::Approx(1.5));

  Matrix skewed = Matrix::Identity(2, 2);
  skewed(1, 1) = 1e-14;
  DecodedGaussian sing{Vector::Zero(2), SpdMatrix::trusted(skewed, 0.0)};
  DecodedGaussian other{Vector::Zero(2), SpdMatrix(Matrix::Identity(2, 2), 0.0)};
  CHECK_THROWS_AS(tv_bound_gaussian(sing, other), IllConditionedError);
}

TEST_CASE("mixture TV bound dominates quadrature truth") {
  Rng rng(19);
  const GmmParams g = random_gmm(1, 1, 2, rng);
  CHECK(gmm_tv_bound(g, g) <= 1e-12);

  const GmmParams a1 = random_gmm(1, 1, 1, rng);
  const GmmParams b1 = random_gmm(1, 1, 1, rng);
  CHECK(gmm_tv_bound(a1, b1) ==
        doctest::Approx(tv_bound_gaussian(a1.decoded(0), b1.decoded(0))).epsilon(1e-12));

  for (int rep = 0; rep < 25; ++rep) {
    const int ka = 1 + static_cast<int>(rng.raw() % 3);
    const int kb = 1 + static_cast<int>(rng.raw() % 3);
    std::vector<DecodedGaussian> a, b;
    for (int i = 0; i < ka; ++i) a.push_back(random_gaussian(1, rng));
    for (int i = 0; i < kb; ++i) b.push_back(random_gaussian(1, rng));
    const Vector wa = random_simplex(ka, rng);
    const Vector wb = random_simplex(kb, rng);
    const double bound = gmm_tv_bound(wa, a, wb, b);
    CHECK(bound >= -1e-12);
    CHECK(bound <= 1.5 + 1e-12);
    CHECK(tv_quadrature_1d(wa, a, wb, b) <= bound + 1e-3);
  }
}

TEST_CASE("Bures gradient") {
  Rng rng(29);
  const SpdMatrix same(Matrix::Identity(3, 3) * 1.3, 0.0);
  CHECK(w2_grad_wrt_first(same, same).norm() <= 1e-10);

  const SpdMatrix one(Matrix::Identity(1, 1), 0.0);
  const SpdMatrix four(4.0 * Matrix::Identity(1, 1), 0.0);
  CHECK(w2_grad_wrt_first(one, four)(0, 0) == doctest::Approx(-1.0));

  for (int rep = 0; rep < 10; ++rep) {
    const int n = 1 + static_cast<int>(rng.raw() % 4);
    Matrix w0(n, n), w1(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        w0(i, j) = rng.gaussian();
        w1(i, j) = rng.gaussian();
      }
    }
    const SpdMatrix s0(w0 * w0.transpose() / n + 0.5 * Matrix::Identity(n, n), 0.0);
    const SpdMatrix s1(w1 * w1.transpose() / n + 0.5 * Matrix::Identity(n, n), 0.0);
    const Matrix grad = w2_grad_wrt_first(s0, s1);
    CHECK((grad - grad.transpose()).norm() <= 1e-12);
    const Matrix fd = fd_gradient_sym(
        [&](const Matrix& m) { return bures_trace(m, s1.mat()); }, s0.mat(), 1e-5);
    CHECK((grad - fd).norm() / std::max(fd.norm(), 1e-8) <= 1e-5);
  }
}

TEST_CASE("parallel cost assembly equals the serial reference") {
  Rng rng(33);
  std::vector<DecodedGaussian> a, b;
  for (int i = 0; i < 8; ++i) a.push_back(random_gaussian(3, rng));
  for (int i = 0; i < 8; ++i) b.push_back(random_gaussian(3, rng));
  CHECK((build_w2_cost(a, b) - ref::build_w2_cost(a, b)).norm() == 0.0);
}
