#include <doctest.h>

#include <cmath>

#include "mispred/errors.hpp"
#include "mispred/linalg.hpp"

using namespace mispred;

TEST_CASE("cholesky of a hand-factored 2x2") {
  Matrix a(2, 2);
  a << 4, 2, 2, 3;
  const Matrix l = cholesky(a);
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(1, 0) == doctest::Approx(1.0));
  CHECK(l(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(l(0, 1) == 0.0);
}

TEST_CASE("cholesky rejects indefinite and singular input") {
  Matrix a(2, 2);
  a << 1, 2, 2, 1;
  CHECK_THROWS_AS(cholesky(a), NotPositiveDefinite);
  Matrix s = Matrix::Ones(3, 3);
  CHECK_THROWS_AS(cholesky(s), NotPositiveDefinite);
}

TEST_CASE("SpdMatrix rejects asymmetric input") {
  Matrix a(2, 2);
  a << 2, 1, 0.5, 2;
  CHECK_THROWS_AS(SpdMatrix{a}, NotPositiveDefinite);
}

TEST_CASE("SpdMatrix solve and log-determinant") {
  Matrix b = Matrix::Random(5, 5);
  Matrix a = b * b.transpose() + Matrix::Identity(5, 5);
  a = 0.5 * (a + a.transpose()).eval();
  const SpdMatrix spd(a);
  const Vector rhs = Vector::LinSpaced(5, -1.0, 2.0);
  CHECK((a * spd.solve(rhs) - rhs).norm() < 1e-10);
  const Matrix rhs_m = Matrix::Random(5, 3);
  CHECK((a * spd.solve(rhs_m) - rhs_m).norm() < 1e-10);
  // Oracle: sum of log-eigenvalues.
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  CHECK(spd.log_det() == doctest::Approx(es.eigenvalues().array().log().sum()).epsilon(1e-12));
}

TEST_CASE("sym_sqrt squares back") {
  Matrix b = Matrix::Random(4, 4);
  const Matrix a = b * b.transpose() + 0.1 * Matrix::Identity(4, 4);
  const Matrix s = sym_sqrt(a);
  CHECK((s * s - a).norm() < 1e-10);
  CHECK((s - s.transpose()).norm() < 1e-12);
}

TEST_CASE("least_squares returns the minimum-norm solution") {
  // Two identical columns: any split of the coefficient fits; min-norm splits evenly.
  Matrix d(4, 2);
  d << 1, 1, 2, 2, 3, 3, 4, 4;
  Vector t(4);
  t << 2, 4, 6, 8;
  const Vector x = least_squares(d, t);
  CHECK(x(0) == doctest::Approx(1.0));
  CHECK(x(1) == doctest::Approx(1.0));
}

TEST_CASE("least_squares reproduces an exact linear fit") {
  Matrix d(5, 3);
  d << 1, 0, 1, 1, 1, 0, 1, 2, 3, 1, 3, 1, 1, 4, 4;
  const Vector truth = (Vector(3) << 0.5, -2.0, 3.0).finished();
  const Vector x = least_squares(d, d * truth);
  CHECK((x - truth).norm() < 1e-12);
}

TEST_CASE("ridge_solve matches the penalized normal equations") {
  Matrix d = Matrix::Random(30, 4);
  d.col(0).setOnes();
  const Vector t = Vector::Random(30);
  const double lambda = 0.7;
  Matrix p = Matrix::Identity(4, 4);
  p(0, 0) = 0.0;
  const Vector oracle = (d.transpose() * d + lambda * p).fullPivLu().solve(d.transpose() * t);
  CHECK((ridge_solve(d, t, lambda, false) - oracle).norm() < 1e-10);
  const Vector oracle_all = (d.transpose() * d + lambda * Matrix::Identity(4, 4)).fullPivLu().solve(d.transpose() * t);
  CHECK((ridge_solve(d, t, lambda, true) - oracle_all).norm() < 1e-10);
  CHECK((ridge_solve(d, t, 0.0, false) - least_squares(d, t)).norm() < 1e-10);
}

TEST_CASE("std_normal_cdf reference values") {
  CHECK(std_normal_cdf(0.0) == 0.5);
  CHECK(std_normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-14));
  CHECK(std_normal_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-14));
  CHECK(std_normal_cdf(-8.0) == doctest::Approx(6.22096057427178e-16).epsilon(1e-10));
  CHECK(std_normal_cdf(3.0) + std_normal_cdf(-3.0) == doctest::Approx(1.0));
}

TEST_CASE("all_finite") {
  Matrix m = Matrix::Zero(2, 2);
  CHECK(all_finite(m));
  m(1, 0) = std::nan("");
  CHECK_FALSE(all_finite(m));
}
