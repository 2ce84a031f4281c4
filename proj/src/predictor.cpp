#include <cmath>

#include "mispred/estimators.hpp"

namespace mispred {

Vector FittedPredictor::predict(const MaskedMatrix& data) const {
  Vector out(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) out(i) = predict(data.row(i));
  return out;
}

Standardizer Standardizer::fit(const MaskedMatrix& data) {
  const Eigen::Index d = data.cols();
  Standardizer s{Vector::Zero(d), Vector::Ones(d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    double sum = 0.0;
    double count = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      if (data.mask()(i, j) == 0.0) {
        sum += data.values()(i, j);
        count += 1.0;
      }
    }
    if (count == 0.0) continue;
    const double mean = sum / count;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      if (data.mask()(i, j) == 0.0) ss += (data.values()(i, j) - mean) * (data.values()(i, j) - mean);
    }
    const double sd = std::sqrt(ss / count);
    s.mean(j) = mean;
    s.scale(j) = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(int d) { return {Vector::Zero(d), Vector::Ones(d)}; }

Matrix Standardizer::transform(const MaskedMatrix& data) const {
  Matrix out = data.values();
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      out(i, j) = data.mask()(i, j) == 0.0 ? (out(i, j) - mean(j)) / scale(j) : 0.0;
  return out;
}

Vector Standardizer::transform(const MaskedRow& z) const {
  Vector out(z.values.size());
  for (Eigen::Index j = 0; j < out.size(); ++j)
    out(j) = z.pattern.missing(static_cast<int>(j)) ? 0.0 : (z.values(j) - mean(j)) / scale(j);
  return out;
}

std::size_t BayesOracle::param_count() const {
  std::size_t total = 0;
  for (std::uint32_t bits = 0; bits < coeffs_.n_patterns(); ++bits)
    if (coeffs_.contains(bits)) total += static_cast<std::size_t>(coeffs_.at(bits).delta.size()) + 1;
  return total;
}

}  // namespace mispred
