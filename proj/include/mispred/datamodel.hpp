#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mispred/linalg.hpp"

namespace mispred {

class Rng;

/// Upper bound on d for anything that materializes 2^d pattern tables.
inline constexpr int kMaxPatternDim = 20;

void require_pattern_dim(int d, const char* what);

/// Missingness pattern over d features; bit j set means feature j is missing.
struct Pattern {
  std::uint32_t bits = 0;
  int dim = 0;

  bool missing(int j) const { return (bits >> j) & 1U; }
  int n_missing() const;
  int n_observed() const { return dim - n_missing(); }
  IndexList obs_indices() const;
  IndexList mis_indices() const;
  std::vector<double> to_row() const;

  friend bool operator==(const Pattern&, const Pattern&) = default;
};

Pattern pattern_from_row(std::span<const double> mask_row);

/// A row of masked data: zero-imputed values plus its pattern.
struct MaskedRow {
  Vector values;
  Pattern pattern;
};

/// Observed values (0 at missing cells) paired with a 0/1 mask. The mask is
/// the single source of truth for missingness; construction zero-fills.
class MaskedMatrix {
 public:
  MaskedMatrix() = default;
  MaskedMatrix(Matrix values, Matrix mask);

  /// Applies `mask` to a complete matrix.
  static MaskedMatrix from_complete(const Matrix& complete, const Matrix& mask);

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }
  const Matrix& values() const { return values_; }
  const Matrix& mask() const { return mask_; }
  Pattern pattern(Eigen::Index i) const { return {patterns_[static_cast<std::size_t>(i)], static_cast<int>(cols())}; }
  const std::vector<std::uint32_t>& pattern_bits() const { return patterns_; }
  MaskedRow row(Eigen::Index i) const;
  MaskedMatrix take_rows(std::span<const Eigen::Index> idx) const;
  MaskedMatrix head_rows(Eigen::Index n) const;
  MaskedMatrix tail_rows(Eigen::Index n) const;

 private:
  Matrix values_;
  Matrix mask_;
  std::vector<std::uint32_t> patterns_;
};

/// Entries m(rows[a], cols[b]); throws IndexOutOfRange.
Matrix submatrix(const Matrix& m, std::span<const int> rows, std::span<const int> cols);
Vector subvector(const Vector& v, std::span<const int> idx);

struct GaussianComponent {
  Vector mean;
  Matrix cov;
};

/// Gaussian pattern-mixture: X | (M = m) ~ N(mu_m, Sigma_m), with pattern
/// probabilities and a pattern -> component assignment (dense 2^d tables).
class PatternMixtureModel {
 public:
  PatternMixtureModel(int dim, std::vector<GaussianComponent> components,
                      std::vector<int> assignment, std::vector<double> pattern_probs);

  /// Every pattern equiprobable (2^-d) with the given assignment.
  static PatternMixtureModel uniform_patterns(int dim, std::vector<GaussianComponent> components,
                                              std::vector<int> assignment);

  int dim() const { return dim_; }
  std::size_t n_patterns() const { return pattern_probs_.size(); }
  const std::vector<GaussianComponent>& components() const { return components_; }
  const std::vector<int>& assignment() const { return assignment_; }
  const std::vector<double>& pattern_probs() const { return pattern_probs_; }
  double prob(std::uint32_t bits) const { return pattern_probs_[bits]; }
  const GaussianComponent& component_for(std::uint32_t bits) const;

  /// Draws (masked, complete) pairs: pattern first, then X from its component.
  std::pair<MaskedMatrix, Matrix> sample(Eigen::Index n, Rng& rng) const;

 private:
  int dim_;
  std::vector<GaussianComponent> components_;
  std::vector<int> assignment_;
  std::vector<double> pattern_probs_;
  std::vector<double> cumulative_;
  std::vector<Matrix> chol_;
  bool uniform_ = false;
};

struct LinearDGP {
  double beta0 = 1.0;
  Vector beta;
  double noise_sigma = 0.0;
};

struct ConditionalGaussian {
  Vector mean;
  Matrix cov;
};

/// Distribution of X_query given X_given = given_values.
ConditionalGaussian conditional_gaussian(const GaussianComponent& comp,
                                         std::span<const int> given_idx,
                                         const Vector& given_values,
                                         std::span<const int> query_idx);

/// Draws n rows of N(mean, L L^T) given the Cholesky factor.
Matrix sample_gaussian(const Vector& mean, const Matrix& chol_lower, Eigen::Index n, Rng& rng);

}  // namespace mispred
