#include "mispred/linalg.hpp"

#include <cmath>
#include <fmt/format.h>

#include "mispred/errors.hpp"

namespace mispred {

namespace {

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw InvalidArgument(
        fmt::format("{}: matrix is {}x{}, expected square", what, a.rows(), a.cols()));
  }
}

}  // namespace

Matrix cholesky(const Matrix& a) {
  require_square(a, "cholesky");
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0)) {
      throw NotPositiveDefinite(
          fmt::format("cholesky: pivot {} at index {} is not positive", pivot, j));
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

SpdMatrix::SpdMatrix(Matrix a) : a_(std::move(a)) {
  require_square(a_, "SpdMatrix");
  const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
  if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NotPositiveDefinite("SpdMatrix: input is not symmetric");
  }
  l_ = cholesky(a_);
}

Vector SpdMatrix::solve(const Vector& b) const {
  const auto l = l_.triangularView<Eigen::Lower>();
  Vector y = l.solve(b);
  return l.transpose().solve(y);
}

Matrix SpdMatrix::solve(const Matrix& b) const {
  const auto l = l_.triangularView<Eigen::Lower>();
  Matrix y = l.solve(b);
  return l.transpose().solve(y);
}

double SpdMatrix::log_det() const {
  return 2.0 * l_.diagonal().array().log().sum();
}

Vector spd_solve(const Matrix& a, const Vector& b) {
  if (a.rows() != b.size()) {
    throw InvalidArgument("spd_solve: dimension mismatch");
  }
  return SpdMatrix(a).solve(b);
}

Matrix sym_sqrt(const Matrix& a) {
  require_square(a, "sym_sqrt");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
    throw NotPositiveDefinite("sym_sqrt: matrix is not positive definite");
  }
  const Vector root = eig.eigenvalues().cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

Vector least_squares(const Matrix& design, const Vector& target) {
  if (design.rows() != target.size() || design.rows() < 1) {
    throw InvalidArgument("least_squares: design/target size mismatch");
  }
  if (design.cols() == 0) return Vector(0);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(design);
  return cod.solve(target);
}

Vector ridge_solve(const Matrix& design, const Vector& target, double lambda,
                   bool penalize_intercept) {
  if (lambda < 0.0) throw InvalidArgument("ridge_solve: lambda must be >= 0");
  if (lambda == 0.0) return least_squares(design, target);
  const Eigen::Index p = design.cols();
  Matrix normal = design.transpose() * design;
  for (Eigen::Index j = penalize_intercept ? 0 : 1; j < p; ++j) normal(j, j) += lambda;
  const Vector rhs = design.transpose() * target;
  // With an unpenalized intercept the system can still be singular (e.g. an
  // all-zero design), so fall back to the minimum-norm solve.
  Eigen::LDLT<Matrix> ldlt(normal);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      ldlt.vectorD().minCoeff() > 1e-12 * std::max(1.0, normal.diagonal().maxCoeff())) {
    return ldlt.solve(rhs);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(normal);
  return cod.solve(rhs);
}

double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace mispred
