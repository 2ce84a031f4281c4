#include <fmt/format.h>

#include "mispred/errors.hpp"
#include "mispred/estimators.hpp"

namespace mispred {

ConstantImputedLR::ConstantImputedLR(double intercept, Vector slopes, Vector mask_slopes)
    : intercept_(intercept), slopes_(std::move(slopes)), mask_slopes_(std::move(mask_slopes)) {
  if (slopes_.size() != mask_slopes_.size()) {
    throw InvalidArgument("ConstantImputedLR: slope vectors differ in length");
  }
}

double ConstantImputedLR::predict(const MaskedRow& z) const {
  double out = intercept_;
  for (Eigen::Index j = 0; j < slopes_.size(); ++j) {
    if (z.pattern.missing(static_cast<int>(j))) {
      out += mask_slopes_(j);
    } else {
      out += slopes_(j) * z.values(j);
    }
  }
  return out;
}

Vector ConstantImputedLR::predict(const MaskedMatrix& data) const {
  Vector out = (data.values() * slopes_ + data.mask() * mask_slopes_).array() + intercept_;
  return out;
}

std::string ConstantImputedLR::descriptor() const {
  return fmt::format("ConstantImputedLR(d={})", slopes_.size());
}

std::vector<std::optional<double>> ConstantImputedLR::imputation_constants() const {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(slopes_.size()));
  for (Eigen::Index j = 0; j < slopes_.size(); ++j)
    if (slopes_(j) != 0.0) out[static_cast<std::size_t>(j)] = mask_slopes_(j) / slopes_(j);
  return out;
}

ConstantImputedLR fit_constant_imputed(const MaskedMatrix& data, const Vector& y) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 1 || y.size() != n) throw InvalidArgument("fit_constant_imputed: bad shapes");
  Matrix design(n, 2 * d + 1);
  design.col(0).setOnes();
  design.middleCols(1, d) = data.values();
  design.rightCols(d) = data.mask();
  const Vector coef = least_squares(design, y);
  return ConstantImputedLR(coef(0), coef.segment(1, d), coef.tail(d));
}

namespace {

Matrix impute_with(const MaskedMatrix& data, const Vector& constants) {
  Matrix x = data.values();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (data.mask()(i, j) == 1.0) x(i, j) = constants(j);
  return x;
}

}  // namespace

ImputedOls fit_ols_with_constants(const MaskedMatrix& data, const Vector& y,
                                  const Vector& constants) {
  const Eigen::Index d = data.cols();
  Matrix design(data.rows(), d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = impute_with(data, constants);
  const Vector coef = least_squares(design, y);
  return {coef(0), coef.tail(d)};
}

Vector predict_ols_with_constants(const ImputedOls& fit, const MaskedMatrix& data,
                                  const Vector& constants) {
  Vector out = (impute_with(data, constants) * fit.slopes).array() + fit.intercept;
  return out;
}

}  // namespace mispred
