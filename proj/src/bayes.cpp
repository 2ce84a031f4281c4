#include "mispred/bayes.hpp"

#include <bit>
#include <cmath>
#include <fmt/format.h>

#include "mispred/errors.hpp"

namespace mispred {

ExpandedBayesCoefficients::ExpandedBayesCoefficients(int dim) : dim_(dim) {
  require_pattern_dim(dim, "ExpandedBayesCoefficients");
  table_.resize(std::size_t{1} << dim);
}

const PatternAffine& ExpandedBayesCoefficients::at(std::uint32_t bits) const {
  if (bits >= table_.size() || !table_[bits]) {
    throw UnknownPattern(fmt::format("no Bayes coefficients for pattern {}", bits));
  }
  return *table_[bits];
}

void ExpandedBayesCoefficients::set(std::uint32_t bits, PatternAffine entry) {
  const Pattern p{bits, dim_};
  if (entry.delta.size() != p.n_observed()) {
    throw InvalidArgument("ExpandedBayesCoefficients: slope length must equal |obs(m)|");
  }
  table_.at(bits) = std::move(entry);
}

namespace {

// Pieces shared by the delta and risk computations for one pattern:
// gain = Sigma_{mis,obs} Sigma_obs^{-1}.
struct PatternBlocks {
  IndexList obs, mis;
  Vector mu_obs, mu_mis, beta_obs, beta_mis;
  Matrix s_obs, s_mis, s_mis_obs, gain;
};

PatternBlocks pattern_blocks(const GaussianComponent& comp, const LinearDGP& dgp,
                             const Pattern& m) {
  PatternBlocks b;
  b.obs = m.obs_indices();
  b.mis = m.mis_indices();
  b.mu_obs = subvector(comp.mean, b.obs);
  b.mu_mis = subvector(comp.mean, b.mis);
  b.beta_obs = subvector(dgp.beta, b.obs);
  b.beta_mis = subvector(dgp.beta, b.mis);
  b.s_obs = submatrix(comp.cov, b.obs, b.obs);
  b.s_mis = submatrix(comp.cov, b.mis, b.mis);
  b.s_mis_obs = submatrix(comp.cov, b.mis, b.obs);
  if (b.obs.empty()) {
    b.gain = Matrix::Zero(static_cast<Eigen::Index>(b.mis.size()), 0);
  } else {
    const SpdMatrix s_obs(b.s_obs);
    b.gain = s_obs.solve(Matrix(b.s_mis_obs.transpose())).transpose();
  }
  return b;
}

void require_compatible(const PatternMixtureModel& model, const LinearDGP& dgp) {
  if (dgp.beta.size() != model.dim()) {
    throw InvalidArgument("Bayes computation: beta length does not match model dimension");
  }
}

}  // namespace

ExpandedBayesCoefficients compute_delta(const PatternMixtureModel& model, const LinearDGP& dgp) {
  require_compatible(model, dgp);
  ExpandedBayesCoefficients out(model.dim());
  for (std::uint32_t bits = 0; bits < model.n_patterns(); ++bits) {
    if (model.prob(bits) <= 0.0) continue;
    const Pattern m{bits, model.dim()};
    const PatternBlocks b = pattern_blocks(model.component_for(bits), dgp, m);
    PatternAffine e;
    e.delta0 = dgp.beta0 + b.beta_mis.dot(b.mu_mis - b.gain * b.mu_obs);
    e.delta = b.beta_obs + b.gain.transpose() * b.beta_mis;
    out.set(bits, std::move(e));
  }
  return out;
}

double predict_expanded(const ExpandedBayesCoefficients& coeffs, const MaskedRow& z) {
  const PatternAffine& e = coeffs.at(z.pattern.bits);
  double out = e.delta0;
  Eigen::Index k = 0;
  for (int j = 0; j < z.pattern.dim; ++j) {
    if (!z.pattern.missing(j)) out += e.delta(k++) * z.values(j);
  }
  return out;
}

Vector predict_expanded(const ExpandedBayesCoefficients& coeffs, const MaskedMatrix& data) {
  Vector out(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) out(i) = predict_expanded(coeffs, data.row(i));
  return out;
}

FactorizedBayesCoefficients compute_zeta(const ExpandedBayesCoefficients& coeffs) {
  const int d = coeffs.dim();
  if (d > kMaxFactorizedDim) {
    throw DimensionTooLarge(
        fmt::format("compute_zeta: d = {} exceeds {}", d, kMaxFactorizedDim));
  }
  const std::uint32_t n_pat = 1U << d;
  FactorizedBayesCoefficients f;
  f.dim = d;
  f.bias = Vector::Zero(n_pat);
  f.slopes = Matrix::Zero(n_pat, d);
  // Pattern-indexed values; absent patterns contribute zeros. Slopes of
  // missing coordinates are multiplied by (1 - M_j) = 0, so zero is as good as
  // any other value there.
  for (std::uint32_t bits = 0; bits < n_pat; ++bits) {
    if (!coeffs.contains(bits)) continue;
    const PatternAffine& e = coeffs.at(bits);
    f.bias(bits) = e.delta0;
    Eigen::Index k = 0;
    for (int j = 0; j < d; ++j)
      if (!((bits >> j) & 1U)) f.slopes(bits, j) = e.delta(k++);
  }
  // Moebius inversion over the subset lattice: value(m) = sum_{S subset m} zeta^S.
  for (int bit = 0; bit < d; ++bit) {
    const std::uint32_t b = 1U << bit;
    for (std::uint32_t s = 0; s < n_pat; ++s) {
      if (s & b) {
        f.bias(s) -= f.bias(s ^ b);
        f.slopes.row(s) -= f.slopes.row(s ^ b);
      }
    }
  }
  return f;
}

double evaluate_factorized(const FactorizedBayesCoefficients& f, const MaskedRow& z) {
  const int d = f.dim;
  if (d > kMaxFactorizedDim) throw DimensionTooLarge("evaluate_factorized: d too large");
  if (z.pattern.dim != d) throw InvalidArgument("evaluate_factorized: row dimension mismatch");
  const std::uint32_t n_pat = 1U << d;
  double out = 0.0;
  for (std::uint32_t s = 0; s < n_pat; ++s) {
    double mask_product = 1.0;
    for (int k = 0; k < d && mask_product != 0.0; ++k)
      if ((s >> k) & 1U) mask_product *= z.pattern.missing(k) ? 1.0 : 0.0;
    if (mask_product == 0.0) continue;
    double term = f.bias(s);
    for (int j = 0; j < d; ++j) {
      const double observed = z.pattern.missing(j) ? 0.0 : 1.0;
      term += f.slopes(s, j) * observed * z.values(j);
    }
    out += term * mask_product;
  }
  return out;
}

NoiseSpec conditional_noise_cov(const PatternMixtureModel& model, const LinearDGP& dgp,
                                const Pattern& m) {
  require_compatible(model, dgp);
  const PatternBlocks b = pattern_blocks(model.component_for(m.bits), dgp, m);
  NoiseSpec out;
  out.noise_sigma = dgp.noise_sigma;
  if (!b.mis.empty()) {
    out.conditional_cov = b.s_mis - b.gain * b.s_mis_obs.transpose();
    out.conditional_cov = 0.5 * (out.conditional_cov + out.conditional_cov.transpose());
  }
  return out;
}

double bayes_risk(const PatternMixtureModel& model, const LinearDGP& dgp) {
  require_compatible(model, dgp);
  double total = 0.0;
  for (std::uint32_t bits = 0; bits < model.n_patterns(); ++bits) {
    const double pm = model.prob(bits);
    if (pm <= 0.0) continue;
    const Pattern m{bits, model.dim()};
    const PatternBlocks b = pattern_blocks(model.component_for(bits), dgp, m);
    // gamma0 = beta_mis^T (mu_mis - gain mu_obs), gamma = gain^T beta_mis.
    const double gamma0 = b.beta_mis.dot(b.mu_mis - b.gain * b.mu_obs);
    const Vector gamma = b.gain.transpose() * b.beta_mis;
    const double g_mu = gamma.dot(b.mu_obs);
    const double bm_mu = b.beta_mis.dot(b.mu_mis);
    const double lambda_m = gamma.dot(b.s_obs * gamma) +
                            b.beta_mis.dot(b.s_mis * b.beta_mis) -
                            2.0 * gamma.dot(b.s_mis_obs.transpose() * b.beta_mis) +
                            gamma0 * gamma0 + g_mu * g_mu + bm_mu * bm_mu +
                            2.0 * gamma0 * g_mu - 2.0 * gamma0 * bm_mu - 2.0 * g_mu * bm_mu;
    total += pm * lambda_m;
  }
  return dgp.noise_sigma * dgp.noise_sigma + total;
}

std::uint64_t expanded_param_count(int d) {
  if (d < 1 || d > 62) throw InvalidArgument("expanded_param_count: d out of range");
  return (std::uint64_t{1} << (d - 1)) * static_cast<std::uint64_t>(d + 2);
}

std::uint64_t expanded_param_count_by_enumeration(int d) {
  if (d < 1 || d > 62) throw InvalidArgument("expanded_param_count: d out of range");
  std::uint64_t total = 0;
  std::uint64_t binom = 1;  // C(d, k)
  for (int k = 0; k <= d; ++k) {
    total += binom * static_cast<std::uint64_t>(k + 1);
    binom = binom * static_cast<std::uint64_t>(d - k) / static_cast<std::uint64_t>(k + 1);
  }
  return total;
}

double clip(double value, double level) {
  if (!(level > 0.0)) throw InvalidArgument("clip: level must be positive");
  if (std::abs(value) <= level) return value;
  return value > 0.0 ? level : -level;
}

}  // namespace mispred
