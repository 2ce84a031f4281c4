#pragma once

// Dense kernels shared by the whole library. Dimensions stay small (d <= ~14
// in every experiment), so everything operates on dense Eigen storage.

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace mispred {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<int>;

/// Symmetric positive-definite matrix. Construction validates symmetry
/// (1e-12 relative) and that a Cholesky factorization exists; the factor is
/// kept so repeated solves are cheap.
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix a);

  const Matrix& matrix() const { return a_; }
  const Matrix& lower() const { return l_; }
  Eigen::Index dim() const { return a_.rows(); }

  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  double log_det() const;

 private:
  Matrix a_;
  Matrix l_;
};

/// Lower-triangular L with L * L^T = a. Throws NotPositiveDefinite on a
/// non-positive pivot.
Matrix cholesky(const Matrix& a);

Vector spd_solve(const Matrix& a, const Vector& b);

/// Symmetric square root via eigendecomposition.
Matrix sym_sqrt(const Matrix& a);

/// Minimum-norm least-squares solution (complete orthogonal decomposition).
Vector least_squares(const Matrix& design, const Vector& target);

/// argmin ||D x - t||^2 + lambda ||P x||^2 where P drops the first column
/// when penalize_intercept is false.
Vector ridge_solve(const Matrix& design, const Vector& target, double lambda,
                   bool penalize_intercept);

double std_normal_cdf(double x);

bool all_finite(const Matrix& m);

}  // namespace mispred
