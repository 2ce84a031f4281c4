#include "mispred/datamodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fmt/format.h>

#include "mispred/errors.hpp"
#include "mispred/rng.hpp"

namespace mispred {

void require_pattern_dim(int d, const char* what) {
  if (d < 1 || d > kMaxPatternDim) {
    throw DimensionTooLarge(
        fmt::format("{}: dimension {} outside [1, {}]", what, d, kMaxPatternDim));
  }
}

int Pattern::n_missing() const { return std::popcount(bits); }

IndexList Pattern::obs_indices() const {
  IndexList out;
  for (int j = 0; j < dim; ++j)
    if (!missing(j)) out.push_back(j);
  return out;
}

IndexList Pattern::mis_indices() const {
  IndexList out;
  for (int j = 0; j < dim; ++j)
    if (missing(j)) out.push_back(j);
  return out;
}

std::vector<double> Pattern::to_row() const {
  std::vector<double> row(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) row[static_cast<std::size_t>(j)] = missing(j) ? 1.0 : 0.0;
  return row;
}

Pattern pattern_from_row(std::span<const double> mask_row) {
  if (mask_row.size() > 32) throw DimensionTooLarge("pattern_from_row: more than 32 features");
  Pattern p{0, static_cast<int>(mask_row.size())};
  for (std::size_t j = 0; j < mask_row.size(); ++j) {
    if (mask_row[j] == 1.0) {
      p.bits |= (1U << j);
    } else if (mask_row[j] != 0.0) {
      throw InvalidArgument("pattern_from_row: mask entries must be 0 or 1");
    }
  }
  return p;
}

MaskedMatrix::MaskedMatrix(Matrix values, Matrix mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  if (values_.rows() != mask_.rows() || values_.cols() != mask_.cols()) {
    throw InvalidArgument("MaskedMatrix: values and mask shapes differ");
  }
  if (values_.cols() > 32) throw DimensionTooLarge("MaskedMatrix: more than 32 features");
  const Eigen::Index n = values_.rows();
  const Eigen::Index d = values_.cols();
  patterns_.assign(static_cast<std::size_t>(n), 0U);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double m = mask_(i, j);
      if (m == 1.0) {
        bits |= (1U << j);
        values_(i, j) = 0.0;
      } else if (m != 0.0) {
        throw InvalidArgument("MaskedMatrix: mask entries must be 0 or 1");
      } else if (!std::isfinite(values_(i, j))) {
        throw InvalidArgument(fmt::format("MaskedMatrix: non-finite value at ({}, {})", i, j));
      }
    }
    patterns_[static_cast<std::size_t>(i)] = bits;
  }
}

MaskedMatrix MaskedMatrix::from_complete(const Matrix& complete, const Matrix& mask) {
  return MaskedMatrix(complete, mask);
}

MaskedRow MaskedMatrix::row(Eigen::Index i) const {
  return {values_.row(i).transpose(), pattern(i)};
}

MaskedMatrix MaskedMatrix::take_rows(std::span<const Eigen::Index> idx) const {
  Matrix v(static_cast<Eigen::Index>(idx.size()), cols());
  Matrix m(static_cast<Eigen::Index>(idx.size()), cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    v.row(static_cast<Eigen::Index>(r)) = values_.row(idx[r]);
    m.row(static_cast<Eigen::Index>(r)) = mask_.row(idx[r]);
  }
  return MaskedMatrix(std::move(v), std::move(m));
}

MaskedMatrix MaskedMatrix::head_rows(Eigen::Index n) const {
  return MaskedMatrix(values_.topRows(n), mask_.topRows(n));
}

MaskedMatrix MaskedMatrix::tail_rows(Eigen::Index n) const {
  return MaskedMatrix(values_.bottomRows(n), mask_.bottomRows(n));
}

Matrix submatrix(const Matrix& m, std::span<const int> rows, std::span<const int> cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (rows[a] < 0 || rows[a] >= m.rows()) {
      throw IndexOutOfRange(fmt::format("submatrix: row index {} out of range", rows[a]));
    }
    for (std::size_t b = 0; b < cols.size(); ++b) {
      if (cols[b] < 0 || cols[b] >= m.cols()) {
        throw IndexOutOfRange(fmt::format("submatrix: column index {} out of range", cols[b]));
      }
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = m(rows[a], cols[b]);
    }
  }
  return out;
}

Vector subvector(const Vector& v, std::span<const int> idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (idx[a] < 0 || idx[a] >= v.size()) {
      throw IndexOutOfRange(fmt::format("subvector: index {} out of range", idx[a]));
    }
    out(static_cast<Eigen::Index>(a)) = v(idx[a]);
  }
  return out;
}

PatternMixtureModel::PatternMixtureModel(int dim, std::vector<GaussianComponent> components,
                                         std::vector<int> assignment,
                                         std::vector<double> pattern_probs)
    : dim_(dim),
      components_(std::move(components)),
      assignment_(std::move(assignment)),
      pattern_probs_(std::move(pattern_probs)) {
  require_pattern_dim(dim_, "PatternMixtureModel");
  const std::size_t n_pat = std::size_t{1} << dim_;
  if (assignment_.size() != n_pat || pattern_probs_.size() != n_pat) {
    throw InvalidArgument("PatternMixtureModel: tables must have 2^d entries");
  }
  for (const auto& c : components_) {
    if (c.mean.size() != dim_ || c.cov.rows() != dim_ || c.cov.cols() != dim_) {
      throw InvalidArgument("PatternMixtureModel: component has wrong dimension");
    }
    chol_.push_back(SpdMatrix(c.cov).lower());
  }
  double total = 0.0;
  cumulative_.resize(n_pat);
  for (std::size_t p = 0; p < n_pat; ++p) {
    const double pr = pattern_probs_[p];
    if (!(pr >= 0.0)) throw InvalidArgument("PatternMixtureModel: negative probability");
    if (pr > 0.0 && (assignment_[p] < 0 ||
                     assignment_[p] >= static_cast<int>(components_.size()))) {
      throw InvalidArgument(
          fmt::format("PatternMixtureModel: pattern {} has no component", p));
    }
    total += pr;
    cumulative_[p] = total;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument(fmt::format("PatternMixtureModel: probabilities sum to {}", total));
  }
  const double u = 1.0 / static_cast<double>(n_pat);
  uniform_ = std::all_of(pattern_probs_.begin(), pattern_probs_.end(),
                         [u](double p) { return p == u; });
}

PatternMixtureModel PatternMixtureModel::uniform_patterns(int dim,
                                                          std::vector<GaussianComponent> components,
                                                          std::vector<int> assignment) {
  require_pattern_dim(dim, "uniform_patterns");
  const std::size_t n_pat = std::size_t{1} << dim;
  return PatternMixtureModel(dim, std::move(components), std::move(assignment),
                             std::vector<double>(n_pat, 1.0 / static_cast<double>(n_pat)));
}

const GaussianComponent& PatternMixtureModel::component_for(std::uint32_t bits) const {
  const int c = assignment_.at(bits);
  if (c < 0) throw UnknownPattern(fmt::format("pattern {} has no component", bits));
  return components_[static_cast<std::size_t>(c)];
}

std::pair<MaskedMatrix, Matrix> PatternMixtureModel::sample(Eigen::Index n, Rng& rng) const {
  Matrix complete(n, dim_);
  Matrix mask = Matrix::Zero(n, dim_);
  Vector z(dim_);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    if (uniform_) {
      for (int j = 0; j < dim_; ++j)
        if (rng.coin()) bits |= (1U << j);
    } else {
      const double u = rng.uniform();
      auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      if (it == cumulative_.end()) --it;
      bits = static_cast<std::uint32_t>(it - cumulative_.begin());
      while (pattern_probs_[bits] == 0.0 && bits > 0) --bits;
    }
    for (int j = 0; j < dim_; ++j) {
      z(j) = rng.normal();
      if ((bits >> j) & 1U) mask(i, j) = 1.0;
    }
    const auto c = static_cast<std::size_t>(assignment_[bits]);
    complete.row(i) = (components_[c].mean + chol_[c].triangularView<Eigen::Lower>() * z).transpose();
  }
  MaskedMatrix masked(complete, mask);
  return {std::move(masked), std::move(complete)};
}

ConditionalGaussian conditional_gaussian(const GaussianComponent& comp,
                                         std::span<const int> given_idx,
                                         const Vector& given_values,
                                         std::span<const int> query_idx) {
  if (given_values.size() != static_cast<Eigen::Index>(given_idx.size())) {
    throw InvalidArgument("conditional_gaussian: given_values does not match given_idx");
  }
  for (int q : query_idx) {
    if (std::find(given_idx.begin(), given_idx.end(), q) != given_idx.end()) {
      throw InvalidArgument("conditional_gaussian: index sets must be disjoint");
    }
  }
  Vector mu_q = subvector(comp.mean, query_idx);
  Matrix s_qq = submatrix(comp.cov, query_idx, query_idx);
  if (given_idx.empty()) return {std::move(mu_q), std::move(s_qq)};
  const SpdMatrix s_gg(submatrix(comp.cov, given_idx, given_idx));
  const Matrix s_qg = submatrix(comp.cov, query_idx, given_idx);
  const Vector centered = given_values - subvector(comp.mean, given_idx);
  const Matrix gain = s_gg.solve(Matrix(s_qg.transpose())).transpose();
  Vector mean = mu_q + gain * centered;
  Matrix cov = s_qq - gain * s_qg.transpose();
  cov = 0.5 * (cov + cov.transpose());
  return {std::move(mean), std::move(cov)};
}

Matrix sample_gaussian(const Vector& mean, const Matrix& chol_lower, Eigen::Index n, Rng& rng) {
  const Eigen::Index d = mean.size();
  Matrix out(n, d);
  Vector z(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z(j) = rng.normal();
    out.row(i) = (mean + chol_lower.triangularView<Eigen::Lower>() * z).transpose();
  }
  return out;
}

}  // namespace mispred
