#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "mispred/errors.hpp"
#include "mispred/estimators.hpp"

namespace mispred {

// One hidden unit per pattern. Unit k is active (pre-activation >= eps_k / 2)
// exactly on its own pattern, where its output equals delta0_k + <delta_k, x_obs>
// once the shared output bias is added; on any other pattern the mask weights
// push the pre-activation below -eps_k / 2.
MlpRegressor construct_bayes_mlp(const ExpandedBayesCoefficients& coeffs, double support_bound) {
  if (!std::isfinite(support_bound) || !(support_bound > 0.0)) {
    throw UnboundedSupport(
        fmt::format("construct_bayes_mlp: support bound must be finite and positive, got {}", support_bound));
  }
  const int d = coeffs.dim();
  require_pattern_dim(d, "construct_bayes_mlp");

  struct Unit {
    Pattern pattern;
    Vector direction;  // over obs(m), max-abs normalised
    double out_weight;
    double k;
    double delta0;
  };
  std::vector<Unit> units;
  for (std::uint32_t bits = 0; bits < coeffs.n_patterns(); ++bits) {
    if (!coeffs.contains(bits)) continue;
    const PatternAffine& a = coeffs.at(bits);
    const Pattern m{bits, d};
    const double scale = a.delta.size() > 0 ? a.delta.cwiseAbs().maxCoeff() : 0.0;
    if (scale > 0.0) {
      units.push_back({m, a.delta / scale, scale, support_bound, a.delta0});
    } else {
      units.push_back({m, Vector::Zero(a.delta.size()), 1.0, 0.0, a.delta0});
    }
  }
  if (units.empty()) throw InvalidArgument("construct_bayes_mlp: empty coefficient table");

  double b2 = std::numeric_limits<double>::infinity();
  for (const Unit& u : units) {
    const double o = u.pattern.n_observed();
    b2 = std::min(b2, u.delta0 - u.out_weight * (o * u.k + 0.5));
  }

  const auto h = static_cast<Eigen::Index>(units.size());
  Matrix w1 = Matrix::Zero(h, 2 * d);
  Vector b1(h), w2(h);
  for (Eigen::Index r = 0; r < h; ++r) {
    const Unit& u = units[static_cast<std::size_t>(r)];
    const double o = u.pattern.n_observed();
    const double nm = u.pattern.n_missing();
    const double eps = 2.0 * (u.delta0 - b2) / u.out_weight - 2.0 * o * u.k;
    const double i1 = (1.0 + 2.0 * o) * u.k + eps;
    const double i2 = (1.0 - 2.0 * o) * u.k - eps;
    const IndexList obs = u.pattern.obs_indices();
    for (std::size_t t = 0; t < obs.size(); ++t) {
      w1(r, obs[t]) = u.direction(static_cast<Eigen::Index>(t));
    }
    for (int j = 0; j < d; ++j) w1(r, d + j) = u.pattern.missing(j) ? i1 : i2;
    b1(r) = o * u.k - nm * i1 + eps / 2.0;
    w2(r) = u.out_weight;
  }
  return MlpRegressor(Standardizer::identity(d), 0.0, 1.0, std::move(w1), std::move(b1), std::move(w2), b2,
                      0.0);
}

}  // namespace mispred
