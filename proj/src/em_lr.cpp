#include <cmath>
#include <fmt/format.h>
#include <map>
#include <numbers>

#include "mispred/errors.hpp"
#include "mispred/estimators.hpp"

namespace mispred {

namespace {

// Observed-block sufficient statistics for the rows sharing one pattern, in
// joint (x, y) coordinates where y (index d) is always observed.
struct PatternGroup {
  IndexList obs;
  IndexList mis;
  double count = 0.0;
  Vector s1;  // sum z_obs
  Matrix s2;  // sum z_obs z_obs^T
};

std::vector<PatternGroup> group_rows(const MaskedMatrix& data, const Vector& y) {
  const int d = static_cast<int>(data.cols());
  std::map<std::uint32_t, PatternGroup> groups;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const std::uint32_t bits = data.pattern_bits()[static_cast<std::size_t>(i)];
    auto [it, inserted] = groups.try_emplace(bits);
    PatternGroup& g = it->second;
    if (inserted) {
      const Pattern p{bits, d};
      g.obs = p.obs_indices();
      g.obs.push_back(d);
      g.mis = p.mis_indices();
      const auto k = static_cast<Eigen::Index>(g.obs.size());
      g.s1 = Vector::Zero(k);
      g.s2 = Matrix::Zero(k, k);
    }
    Vector z(static_cast<Eigen::Index>(g.obs.size()));
    for (std::size_t a = 0; a + 1 < g.obs.size(); ++a) z(static_cast<Eigen::Index>(a)) = data.values()(i, g.obs[a]);
    z(z.size() - 1) = y(i);
    g.count += 1.0;
    g.s1 += z;
    g.s2.selfadjointView<Eigen::Lower>().rankUpdate(z);
  }
  std::vector<PatternGroup> out;
  for (auto& [bits, g] : groups) {
    g.s2 = g.s2.selfadjointView<Eigen::Lower>();
    out.push_back(std::move(g));
  }
  return out;
}

double group_loglik(const PatternGroup& g, const Vector& mean, const Matrix& cov) {
  const Vector mu = subvector(mean, g.obs);
  const SpdMatrix s(submatrix(cov, g.obs, g.obs));
  const Matrix scatter = g.s2 - mu * g.s1.transpose() - g.s1 * mu.transpose() +
                         g.count * mu * mu.transpose();
  const double quad = s.solve(scatter).trace();
  const double k = static_cast<double>(g.obs.size());
  return -0.5 * (g.count * (k * std::log(2.0 * std::numbers::pi) + s.log_det()) + quad);
}

double total_loglik(const std::vector<PatternGroup>& groups, const Vector& mean,
                    const Matrix& cov, double n) {
  double ll = 0.0;
  for (const auto& g : groups) ll += group_loglik(g, mean, cov);
  return ll / n;
}

// Adds 1e-8 trace/dim to the diagonal until Cholesky succeeds.
Matrix regularize(Matrix cov) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    try {
      (void)cholesky(cov);
      return cov;
    } catch (const NotPositiveDefinite&) {
      const double jitter = 1e-8 * std::max(cov.trace() / static_cast<double>(cov.rows()), 1e-300) *
                            std::pow(10.0, attempt);
      cov.diagonal().array() += jitter;
    }
  }
  throw SingularCovariance("fit_em: covariance remains singular after regularization");
}

}  // namespace

EmLR::EmLR(Vector joint_mean, Matrix joint_cov)
    : joint_mean_(std::move(joint_mean)), joint_cov_(std::move(joint_cov)) {
  if (joint_mean_.size() < 2 || joint_cov_.rows() != joint_mean_.size() ||
      joint_cov_.cols() != joint_mean_.size()) {
    throw InvalidArgument("EmLR: inconsistent joint mean/covariance shapes");
  }
}

double EmLR::predict_with(const MaskedRow& z, const IndexList& obs, const Matrix* gain) const {
  const int d = dim();
  double out = joint_mean_(d);
  if (obs.empty()) return out;
  Matrix local;
  if (!gain) {
    const SpdMatrix s_obs(submatrix(joint_cov_, obs, obs));
    const int y_idx[] = {d};
    local = s_obs.solve(Matrix(submatrix(joint_cov_, obs, y_idx))).transpose();
    gain = &local;
  }
  for (std::size_t a = 0; a < obs.size(); ++a) {
    out += (*gain)(0, static_cast<Eigen::Index>(a)) * (z.values(obs[a]) - joint_mean_(obs[a]));
  }
  return out;
}

double EmLR::predict(const MaskedRow& z) const {
  return predict_with(z, z.pattern.obs_indices(), nullptr);
}

Vector EmLR::predict(const MaskedMatrix& data) const {
  const int d = dim();
  if (data.cols() != d) throw InvalidArgument("EmLR: data dimension mismatch");
  std::map<std::uint32_t, std::pair<IndexList, Matrix>> cache;
  Vector out(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const Pattern p = data.pattern(i);
    auto it = cache.find(p.bits);
    if (it == cache.end()) {
      IndexList obs = p.obs_indices();
      Matrix gain;
      if (!obs.empty()) {
        const SpdMatrix s_obs(submatrix(joint_cov_, obs, obs));
        const int y_idx[] = {d};
        gain = s_obs.solve(Matrix(submatrix(joint_cov_, obs, y_idx))).transpose();
      }
      it = cache.emplace(p.bits, std::make_pair(std::move(obs), std::move(gain))).first;
    }
    out(i) = predict_with(data.row(i), it->second.first, &it->second.second);
  }
  return out;
}

std::string EmLR::descriptor() const {
  return fmt::format("EMLR(d={}, iterations={})", dim(), iterations);
}

std::size_t EmLR::param_count() const {
  const auto d = static_cast<std::size_t>(dim());
  return d * (d + 5) / 2 + 1;
}

double em_observed_loglik(const MaskedMatrix& data, const Vector& y, const Vector& mean,
                          const Matrix& cov) {
  return total_loglik(group_rows(data, y), mean, cov, static_cast<double>(data.rows()));
}

EmLR fit_em(const MaskedMatrix& data, const Vector& y, const EmOptions& options) {
  const Eigen::Index n = data.rows();
  const int d = static_cast<int>(data.cols());
  if (y.size() != n) throw InvalidArgument("fit_em: data and response sizes differ");
  for (int j = 0; j < d; ++j) {
    if ((data.mask().col(j).array() == 0.0).count() < 2) {
      throw InvalidArgument(fmt::format("fit_em: feature {} observed fewer than twice", j));
    }
  }
  const std::vector<PatternGroup> groups = group_rows(data, y);
  const double nd = static_cast<double>(n);

  // Start from observed per-coordinate means and a diagonal of observed variances.
  Vector mean(d + 1);
  Matrix cov = Matrix::Zero(d + 1, d + 1);
  const Standardizer st = Standardizer::fit(data);
  mean.head(d) = st.mean;
  mean(d) = y.mean();
  for (int j = 0; j < d; ++j) cov(j, j) = st.scale(j) * st.scale(j);
  cov(d, d) = std::max((y.array() - mean(d)).square().mean(), 1e-12);
  cov = regularize(cov);

  EmLR model(mean, cov);
  model.loglik_history.push_back(total_loglik(groups, mean, cov, nd));
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    Vector t1 = Vector::Zero(d + 1);
    Matrix t2 = Matrix::Zero(d + 1, d + 1);
    for (const PatternGroup& g : groups) {
      const auto k = static_cast<Eigen::Index>(g.obs.size());
      // Assemble sums of E[z] and E[z z^T] in pattern-local order, then scatter.
      if (g.mis.empty()) {
        for (Eigen::Index a = 0; a < k; ++a) {
          t1(g.obs[a]) += g.s1(a);
          for (Eigen::Index b = 0; b < k; ++b) t2(g.obs[a], g.obs[b]) += g.s2(a, b);
        }
        continue;
      }
      const SpdMatrix s_oo(submatrix(cov, g.obs, g.obs));
      const Matrix s_mo = submatrix(cov, g.mis, g.obs);
      const Matrix gain = s_oo.solve(Matrix(s_mo.transpose())).transpose();
      const Vector offset = subvector(mean, g.mis) - gain * subvector(mean, g.obs);
      const Matrix resid = submatrix(cov, g.mis, g.mis) - gain * s_mo.transpose();
      const Vector e_mis = g.count * offset + gain * g.s1;
      const Matrix e_mo = offset * g.s1.transpose() + gain * g.s2;
      const Matrix g_s1_off = gain * g.s1 * offset.transpose();
      const Matrix e_mm = g.count * (resid + offset * offset.transpose()) + g_s1_off +
                          g_s1_off.transpose() + gain * g.s2 * gain.transpose();
      const auto u = static_cast<Eigen::Index>(g.mis.size());
      for (Eigen::Index a = 0; a < k; ++a) {
        t1(g.obs[a]) += g.s1(a);
        for (Eigen::Index b = 0; b < k; ++b) t2(g.obs[a], g.obs[b]) += g.s2(a, b);
      }
      for (Eigen::Index a = 0; a < u; ++a) {
        t1(g.mis[a]) += e_mis(a);
        for (Eigen::Index b = 0; b < k; ++b) {
          t2(g.mis[a], g.obs[b]) += e_mo(a, b);
          t2(g.obs[b], g.mis[a]) += e_mo(a, b);
        }
        for (Eigen::Index b = 0; b < u; ++b) t2(g.mis[a], g.mis[b]) += e_mm(a, b);
      }
    }
    Vector new_mean = t1 / nd;
    Matrix new_cov = t2 / nd - new_mean * new_mean.transpose();
    new_cov = 0.5 * (new_cov + new_cov.transpose());
    new_cov = regularize(new_cov);
    double ll;
    try {
      ll = total_loglik(groups, new_mean, new_cov, nd);
    } catch (const NotPositiveDefinite&) {
      break;
    }
    if (!std::isfinite(ll)) break;
    const double gain_ll = ll - model.loglik_history.back();
    // A decrease can only come from the diagonal jitter; keep the previous state.
    if (gain_ll < 0.0) break;
    mean = std::move(new_mean);
    cov = std::move(new_cov);
    model.loglik_history.push_back(ll);
    if (gain_ll < options.tol) {
      ++iter;
      break;
    }
  }
  EmLR out(mean, cov);
  out.loglik_history = std::move(model.loglik_history);
  out.iterations = iter;
  return out;
}

}  // namespace mispred
