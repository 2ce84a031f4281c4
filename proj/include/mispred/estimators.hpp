#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mispred/bayes.hpp"
#include "mispred/datamodel.hpp"

namespace mispred {

class Rng;

/// Uniform prediction surface over every estimator and the Bayes oracle.
class FittedPredictor {
 public:
  virtual ~FittedPredictor() = default;

  virtual double predict(const MaskedRow& z) const = 0;
  virtual Vector predict(const MaskedMatrix& data) const;
  virtual std::string kind() const = 0;
  virtual std::string descriptor() const = 0;
  virtual std::size_t param_count() const = 0;
};

/// Per-feature centering and scaling computed on observed training entries.
/// Missing cells stay at zero after transformation; masks are never scaled.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const MaskedMatrix& data);
  static Standardizer identity(int d);
  Matrix transform(const MaskedMatrix& data) const;
  Vector transform(const MaskedRow& z) const;
};

// ---------------------------------------------------------------------------
// Constant imputation with mask indicators (OLS on [1, X with zeros, M]).

class ConstantImputedLR final : public FittedPredictor {
 public:
  ConstantImputedLR(double intercept, Vector slopes, Vector mask_slopes);

  double predict(const MaskedRow& z) const override;
  Vector predict(const MaskedMatrix& data) const override;
  std::string kind() const override { return "constant_imputed"; }
  std::string descriptor() const override;
  std::size_t param_count() const override { return static_cast<std::size_t>(2 * slopes_.size() + 1); }

  double intercept() const { return intercept_; }
  const Vector& slopes() const { return slopes_; }
  const Vector& mask_slopes() const { return mask_slopes_; }
  /// c_j = mask_slope_j / slope_j; empty where the slope is zero.
  std::vector<std::optional<double>> imputation_constants() const;

 private:
  double intercept_;
  Vector slopes_;
  Vector mask_slopes_;
};

ConstantImputedLR fit_constant_imputed(const MaskedMatrix& data, const Vector& y);

/// OLS after imputing every missing X_j by the constant c_j (no mask features).
struct ImputedOls {
  double intercept = 0.0;
  Vector slopes;
};
ImputedOls fit_ols_with_constants(const MaskedMatrix& data, const Vector& y, const Vector& constants);
Vector predict_ols_with_constants(const ImputedOls& fit, const MaskedMatrix& data,
                                  const Vector& constants);

// ---------------------------------------------------------------------------
// Expanded linear model: one intercept and observed-slope block per pattern.

struct ExpandedOptions {
  std::vector<double> lambda_grid{1e-3, 1.0, 1e3};
  int folds = 5;
  std::uint64_t seed = 0;  // fold assignment
};

struct PatternBlock {
  double bias = 0.0;
  Vector slopes;  // standardized scale, over obs(m)
};

class ExpandedLR final : public FittedPredictor {
 public:
  ExpandedLR(int dim, Standardizer standardizer, double shared_intercept,
             std::vector<std::optional<PatternBlock>> table, double ridge_lambda);

  using FittedPredictor::predict;
  double predict(const MaskedRow& z) const override;
  std::string kind() const override { return "expanded"; }
  std::string descriptor() const override;
  std::size_t param_count() const override;

  int dim() const { return dim_; }
  const Standardizer& standardizer() const { return standardizer_; }
  double shared_intercept() const { return shared_intercept_; }
  double ridge_lambda() const { return ridge_lambda_; }
  const std::vector<std::optional<PatternBlock>>& table() const { return table_; }
  bool seen(std::uint32_t bits) const { return table_.at(bits).has_value(); }
  /// The pattern's affine predictor in original feature units (shared
  /// intercept folded into the bias).
  PatternAffine original_scale(std::uint32_t bits) const;

  std::vector<double> cv_scores;  // mean validation MSE per grid value

 private:
  int dim_;
  Standardizer standardizer_;
  double shared_intercept_;
  std::vector<std::optional<PatternBlock>> table_;
  double ridge_lambda_;
};

inline constexpr int kMaxExpandedDim = 14;

ExpandedLR fit_expanded(const MaskedMatrix& data, const Vector& y, const ExpandedOptions& options = {});
/// Single ridge fit at a fixed lambda (no cross-validation).
ExpandedLR fit_expanded_fixed(const MaskedMatrix& data, const Vector& y, double lambda);

// ---------------------------------------------------------------------------
// EM for a joint Gaussian over (X, Y), predicting with the conditional mean.

struct EmOptions {
  int max_iter = 500;
  double tol = 1e-6;  // on the per-row observed-data log-likelihood gain
};

class EmLR final : public FittedPredictor {
 public:
  EmLR(Vector joint_mean, Matrix joint_cov);

  double predict(const MaskedRow& z) const override;
  Vector predict(const MaskedMatrix& data) const override;
  std::string kind() const override { return "em"; }
  std::string descriptor() const override;
  std::size_t param_count() const override;

  int dim() const { return static_cast<int>(joint_mean_.size()) - 1; }
  const Vector& joint_mean() const { return joint_mean_; }
  const Matrix& joint_cov() const { return joint_cov_; }

  std::vector<double> loglik_history;  // per-row mean, one entry per parameter state
  int iterations = 0;

 private:
  double predict_with(const MaskedRow& z, const IndexList& obs, const Matrix* gain) const;
  Vector joint_mean_;
  Matrix joint_cov_;
};

EmLR fit_em(const MaskedMatrix& data, const Vector& y, const EmOptions& options = {});

/// Observed-data log-likelihood (per-row mean) of (X_obs, Y) under a joint Gaussian.
double em_observed_loglik(const MaskedMatrix& data, const Vector& y, const Vector& mean,
                          const Matrix& cov);

// ---------------------------------------------------------------------------
// Chained-equations linear imputation followed by OLS.

class IterImputeLR final : public FittedPredictor {
 public:
  /// regressions[s][j] holds (intercept, coefficients over all d features with
  /// a zero at j); empty when feature j was never observed.
  IterImputeLR(Vector initial_fill, std::vector<std::vector<Vector>> regressions,
               double intercept, Vector slopes);

  double predict(const MaskedRow& z) const override;
  Vector predict(const MaskedMatrix& data) const override;
  std::string kind() const override { return "iter_impute"; }
  std::string descriptor() const override;
  std::size_t param_count() const override;

  /// Replays the frozen per-feature regressions; observed cells untouched.
  Matrix impute(const MaskedMatrix& data) const;

  const Vector& initial_fill() const { return initial_fill_; }
  const std::vector<std::vector<Vector>>& regressions() const { return regressions_; }
  double intercept() const { return intercept_; }
  const Vector& slopes() const { return slopes_; }
  int sweeps() const { return static_cast<int>(regressions_.size()); }

 private:
  Vector initial_fill_;
  std::vector<std::vector<Vector>> regressions_;
  double intercept_;
  Vector slopes_;
};

IterImputeLR fit_iter_impute(const MaskedMatrix& data, const Vector& y, int sweeps = 10);

// ---------------------------------------------------------------------------
// One-hidden-layer ReLU network fed with (X imputed by 0, M).

struct MlpOptions {
  int hidden_width = 1;
  std::vector<double> decay_grid{1e-1, 1e-2, 1e-4};
  int epochs = 300;
  int batch_size = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double validation_fraction = 0.1;
  int patience = 20;  // epochs without validation improvement; 0 disables
};

class MlpRegressor final : public FittedPredictor {
 public:
  MlpRegressor(Standardizer standardizer, double y_mean, double y_scale, Matrix input_weights,
               Vector input_bias, Vector output_weights, double output_bias, double weight_decay);

  double predict(const MaskedRow& z) const override;
  Vector predict(const MaskedMatrix& data) const override;
  std::string kind() const override { return "mlp"; }
  std::string descriptor() const override;
  std::size_t param_count() const override;

  int dim() const { return static_cast<int>(input_weights_.cols() / 2); }
  int hidden_width() const { return static_cast<int>(input_weights_.rows()); }
  /// Hidden pre-activations W1 (x0, m) + b1 for one row.
  Vector hidden_preactivations(const MaskedRow& z) const;

  const Standardizer& standardizer() const { return standardizer_; }
  double y_mean() const { return y_mean_; }
  double y_scale() const { return y_scale_; }
  const Matrix& input_weights() const { return input_weights_; }
  const Vector& input_bias() const { return input_bias_; }
  const Vector& output_weights() const { return output_weights_; }
  double output_bias() const { return output_bias_; }
  double weight_decay() const { return weight_decay_; }

  std::vector<double> validation_losses;  // best validation MSE per decay value
  int epochs_run = 0;

 private:
  Standardizer standardizer_;
  double y_mean_;
  double y_scale_;
  Matrix input_weights_;
  Vector input_bias_;
  Vector output_weights_;
  double output_bias_;
  double weight_decay_;
};

MlpRegressor fit_mlp(const MaskedMatrix& data, const Vector& y, const MlpOptions& options, Rng& rng);

/// (2d + 1) n_h + n_h + 1.
std::uint64_t mlp_param_count(int d, std::uint64_t hidden_width);

/// Network with 2^d hidden units, one per pattern, that reproduces the
/// expanded Bayes predictor for every input with |x_j| <= support_bound.
MlpRegressor construct_bayes_mlp(const ExpandedBayesCoefficients& coeffs, double support_bound);

// ---------------------------------------------------------------------------

/// The true Bayes predictor exposed as a FittedPredictor.
class BayesOracle final : public FittedPredictor {
 public:
  explicit BayesOracle(ExpandedBayesCoefficients coeffs) : coeffs_(std::move(coeffs)) {}

  using FittedPredictor::predict;
  double predict(const MaskedRow& z) const override { return predict_expanded(coeffs_, z); }
  std::string kind() const override { return "bayes_oracle"; }
  std::string descriptor() const override { return "Bayes predictor (closed form)"; }
  std::size_t param_count() const override;
  const ExpandedBayesCoefficients& coefficients() const { return coeffs_; }

 private:
  ExpandedBayesCoefficients coeffs_;
};

}  // namespace mispred
