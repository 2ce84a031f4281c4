#include <fmt/format.h>

#include "mispred/errors.hpp"
#include "mispred/estimators.hpp"

namespace mispred {

namespace {

// Prediction of feature j from the other columns of `x`.
Vector regress_column(const Matrix& x, const Vector& coef) {
  return (x * coef.tail(x.cols())).array() + coef(0);
}

}  // namespace

IterImputeLR::IterImputeLR(Vector initial_fill, std::vector<std::vector<Vector>> regressions,
                           double intercept, Vector slopes)
    : initial_fill_(std::move(initial_fill)),
      regressions_(std::move(regressions)),
      intercept_(intercept),
      slopes_(std::move(slopes)) {
  for (const auto& sweep : regressions_) {
    if (static_cast<Eigen::Index>(sweep.size()) != initial_fill_.size()) {
      throw InvalidArgument("IterImputeLR: one regression slot per feature expected");
    }
  }
}

Matrix IterImputeLR::impute(const MaskedMatrix& data) const {
  const Eigen::Index d = initial_fill_.size();
  if (data.cols() != d) throw InvalidArgument("IterImputeLR: data dimension mismatch");
  Matrix x = data.values();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (data.mask()(i, j) == 1.0) x(i, j) = initial_fill_(j);
  for (const auto& sweep : regressions_) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const Vector& coef = sweep[static_cast<std::size_t>(j)];
      if (coef.size() == 0) continue;
      const Vector pred = regress_column(x, coef);
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (data.mask()(i, j) == 1.0) x(i, j) = pred(i);
    }
  }
  return x;
}

Vector IterImputeLR::predict(const MaskedMatrix& data) const {
  Vector out = (impute(data) * slopes_).array() + intercept_;
  return out;
}

double IterImputeLR::predict(const MaskedRow& z) const {
  const Eigen::Index d = z.values.size();
  Matrix values = z.values.transpose();
  Matrix mask(1, d);
  for (Eigen::Index j = 0; j < d; ++j) mask(0, j) = z.pattern.missing(static_cast<int>(j)) ? 1.0 : 0.0;
  return predict(MaskedMatrix(std::move(values), std::move(mask)))(0);
}

std::string IterImputeLR::descriptor() const {
  return fmt::format("IterImputeLR(d={}, sweeps={})", initial_fill_.size(), sweeps());
}

std::size_t IterImputeLR::param_count() const {
  return static_cast<std::size_t>(slopes_.size()) + 1;
}

IterImputeLR fit_iter_impute(const MaskedMatrix& data, const Vector& y, int sweeps) {
  if (sweeps < 1) throw InvalidArgument("fit_iter_impute: sweeps must be >= 1");
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (y.size() != n || n < 1) throw InvalidArgument("fit_iter_impute: bad shapes");

  Vector fill = Vector::Zero(d);
  std::vector<std::vector<Eigen::Index>> observed_rows(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (data.mask()(i, j) == 0.0) {
        observed_rows[static_cast<std::size_t>(j)].push_back(i);
        sum += data.values()(i, j);
      }
    }
    const auto& obs = observed_rows[static_cast<std::size_t>(j)];
    if (!obs.empty()) fill(j) = sum / static_cast<double>(obs.size());
  }

  Matrix x = data.values();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (data.mask()(i, j) == 1.0) x(i, j) = fill(j);

  std::vector<std::vector<Vector>> regressions;
  for (int s = 0; s < sweeps; ++s) {
    std::vector<Vector> sweep(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto& obs = observed_rows[static_cast<std::size_t>(j)];
      if (obs.empty()) continue;
      // Design: intercept plus every column, with column j itself zeroed.
      Matrix design(static_cast<Eigen::Index>(obs.size()), d + 1);
      Vector target(static_cast<Eigen::Index>(obs.size()));
      for (std::size_t r = 0; r < obs.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        design(ri, 0) = 1.0;
        design.row(ri).tail(d) = x.row(obs[r]);
        design(ri, j + 1) = 0.0;
        target(ri) = x(obs[r], j);
      }
      Vector coef = least_squares(design, target);
      coef(j + 1) = 0.0;
      const Vector pred = regress_column(x, coef);
      for (Eigen::Index i = 0; i < n; ++i)
        if (data.mask()(i, j) == 1.0) x(i, j) = pred(i);
      sweep[static_cast<std::size_t>(j)] = std::move(coef);
    }
    regressions.push_back(std::move(sweep));
  }

  Matrix design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = x;
  const Vector coef = least_squares(design, y);
  return IterImputeLR(std::move(fill), std::move(regressions), coef(0), coef.tail(d));
}

}  // namespace mispred
