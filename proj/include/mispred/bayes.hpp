#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mispred/datamodel.hpp"

namespace mispred {

/// Per-pattern affine Bayes predictor: delta0 + <delta, x_obs>.
struct PatternAffine {
  double delta0 = 0.0;
  Vector delta;  // over obs(m), ascending feature order
};

/// Pattern-indexed table of the expanded Bayes predictor's coefficients.
/// Entries exist only for patterns with positive probability.
class ExpandedBayesCoefficients {
 public:
  explicit ExpandedBayesCoefficients(int dim);

  int dim() const { return dim_; }
  std::size_t n_patterns() const { return table_.size(); }
  bool contains(std::uint32_t bits) const { return table_.at(bits).has_value(); }
  const PatternAffine& at(std::uint32_t bits) const;
  void set(std::uint32_t bits, PatternAffine entry);

 private:
  int dim_;
  std::vector<std::optional<PatternAffine>> table_;
};

ExpandedBayesCoefficients compute_delta(const PatternMixtureModel& model, const LinearDGP& dgp);

/// Throws UnknownPattern when the row's pattern has no table entry.
double predict_expanded(const ExpandedBayesCoefficients& coeffs, const MaskedRow& z);
Vector predict_expanded(const ExpandedBayesCoefficients& coeffs, const MaskedMatrix& data);

inline constexpr int kMaxFactorizedDim = 10;

/// Multilinear form sum_S (zeta0^S + sum_j zeta_j^S (1 - M_j) X_j) prod_{k in S} M_k.
/// Subsets S are indexed by bitmask.
struct FactorizedBayesCoefficients {
  int dim = 0;
  Vector bias;    // 2^d
  Matrix slopes;  // 2^d x d
};

FactorizedBayesCoefficients compute_zeta(const ExpandedBayesCoefficients& coeffs);
double evaluate_factorized(const FactorizedBayesCoefficients& f, const MaskedRow& z);

/// Residual covariance of X_mis given X_obs for one pattern.
struct NoiseSpec {
  Matrix conditional_cov;  // |mis| x |mis|; empty when nothing is missing
  double noise_sigma = 0.0;
};

NoiseSpec conditional_noise_cov(const PatternMixtureModel& model, const LinearDGP& dgp,
                                const Pattern& m);

/// Closed-form Bayes risk sigma^2 + sum_m P(M=m) Lambda_m.
double bayes_risk(const PatternMixtureModel& model, const LinearDGP& dgp);

/// 2^(d-1) (d + 2).
std::uint64_t expanded_param_count(int d);
/// sum_k C(d, k) (k + 1), the per-pattern parameter tally.
std::uint64_t expanded_param_count_by_enumeration(int d);

double clip(double value, double level);

}  // namespace mispred
