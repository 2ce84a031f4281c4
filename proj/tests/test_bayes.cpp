#include <doctest.h>

#include <cmath>

#include "mispred/bayes.hpp"
#include "mispred/errors.hpp"
#include "mispred/rng.hpp"
#include "mispred/simulate.hpp"

using namespace mispred;

namespace {

PatternMixtureModel single(const Vector& mean, const Matrix& cov) {
  const int d = static_cast<int>(mean.size());
  return PatternMixtureModel::uniform_patterns(d, {{mean, cov}}, std::vector<int>(std::size_t{1} << d, 0));
}

// E[(Y - f*)^2] = sigma^2 + sum_m P(m) beta_mis^T T_m beta_mis: the residual of
// the conditional mean is the conditional spread of beta_mis^T X_mis.
double schur_risk(const PatternMixtureModel& model, const LinearDGP& dgp) {
  double risk = dgp.noise_sigma * dgp.noise_sigma;
  for (std::uint32_t bits = 0; bits < model.n_patterns(); ++bits) {
    if (model.prob(bits) == 0.0) continue;
    const Pattern m{bits, model.dim()};
    const Matrix& s = model.component_for(bits).cov;
    const IndexList obs = m.obs_indices(), mis = m.mis_indices();
    if (mis.empty()) continue;
    const Matrix smm = s(mis, mis);
    Matrix t = smm;
    if (!obs.empty()) t -= s(mis, obs) * s(obs, obs).inverse() * s(obs, mis);
    const Vector bm = dgp.beta(mis);
    risk += model.prob(bits) * bm.dot(t * bm);
  }
  return risk;
}

ExpandedBayesCoefficients random_table(int d, Rng& rng) {
  ExpandedBayesCoefficients c(d);
  for (std::uint32_t bits = 0; bits < (1U << d); ++bits) {
    const Pattern m{bits, d};
    Vector delta(m.n_observed());
    for (Eigen::Index k = 0; k < delta.size(); ++k) delta(k) = rng.normal();
    c.set(bits, {rng.normal(), delta});
  }
  return c;
}

}  // namespace

TEST_CASE("compute_delta: fully observed and fully missing patterns") {
  Rng rng(1);
  const Vector mu = (Vector(3) << 0.5, -1.0, 2.0).finished();
  const Matrix cov = gen_covariance(3, rng);
  const LinearDGP dgp{1.0, (Vector(3) << 1.0, 2.0, -1.0).finished(), 0.0};
  const auto c = compute_delta(single(mu, cov), dgp);
  CHECK(c.at(0).delta0 == doctest::Approx(1.0));
  CHECK((c.at(0).delta - dgp.beta).norm() < 1e-12);
  CHECK(c.at(7).delta.size() == 0);
  CHECK(c.at(7).delta0 == doctest::Approx(1.0 + dgp.beta.dot(mu)));
}

TEST_CASE("compute_delta matches a Monte-Carlo regression of Y on X1") {
  const double rho = 0.4;
  Matrix cov(2, 2);
  cov << 1, rho, rho, 1;
  const LinearDGP dgp{0.0, Vector::Ones(2), 0.0};
  const auto c = compute_delta(single(Vector::Zero(2), cov), dgp);
  // Pattern {X2 missing} = bits 0b10.
  CHECK(c.at(2).delta0 == doctest::Approx(0.0));
  CHECK(c.at(2).delta(0) == doctest::Approx(1.0 + rho));

  // Independent oracle: draw (X1, X2) by hand, regress X1 + X2 on (1, X1) with QR.
  Rng rng(2);
  const int n = 1000000;
  Matrix design(n, 2);
  Vector y(n);
  const double s = std::sqrt(1.0 - rho * rho);
  for (int i = 0; i < n; ++i) {
    const double z1 = rng.normal(), z2 = rng.normal();
    const double x1 = z1, x2 = rho * z1 + s * z2;
    design(i, 0) = 1.0;
    design(i, 1) = x1;
    y(i) = x1 + x2;
  }
  const Vector coef = design.householderQr().solve(y);
  CHECK(std::abs(coef(0) - c.at(2).delta0) < 1e-2);
  CHECK(std::abs(coef(1) - c.at(2).delta(0)) < 1e-2);
}

TEST_CASE("predict_expanded uses the row's pattern block") {
  ExpandedBayesCoefficients c(2);
  c.set(0, {1.0, (Vector(2) << 2.0, 3.0).finished()});
  c.set(1, {-1.0, (Vector(1) << 5.0).finished()});
  const MaskedRow full{(Vector(2) << 1.0, 1.0).finished(), Pattern{0, 2}};
  CHECK(predict_expanded(c, full) == 6.0);
  const MaskedRow first_missing{(Vector(2) << 0.0, 2.0).finished(), Pattern{1, 2}};
  CHECK(predict_expanded(c, first_missing) == 9.0);
  const MaskedRow unknown{Vector::Zero(2), Pattern{3, 2}};
  CHECK_THROWS_AS(predict_expanded(c, unknown), UnknownPattern);
  CHECK_THROWS_AS(c.set(0, {0.0, Vector::Zero(1)}), InvalidArgument);
}

TEST_CASE("compute_zeta: two-point inversion and constant tables") {
  ExpandedBayesCoefficients c1(1);
  c1.set(0, {2.0, (Vector(1) << 0.5).finished()});
  c1.set(1, {5.0, Vector()});
  const auto z = compute_zeta(c1);
  CHECK(z.bias(0) == 2.0);
  CHECK(z.bias(1) == 3.0);

  ExpandedBayesCoefficients k(3);
  for (std::uint32_t b = 0; b < 8; ++b) k.set(b, {4.0, Vector::Zero(Pattern{b, 3}.n_observed())});
  const auto zk = compute_zeta(k);
  CHECK(zk.bias(0) == 4.0);
  CHECK(zk.bias.tail(7).cwiseAbs().maxCoeff() == 0.0);
  CHECK(zk.slopes.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(compute_zeta(ExpandedBayesCoefficients(11)), DimensionTooLarge);
}

TEST_CASE("factorized form equals expanded form on every pattern") {
  Rng rng(3);
  for (int d = 1; d <= 6; ++d) {
    const auto c = random_table(d, rng);
    const auto z = compute_zeta(c);
    double worst = 0.0;
    for (std::uint32_t bits = 0; bits < (1U << d); ++bits) {
      for (int t = 0; t < 20; ++t) {
        MaskedRow row{Vector::Zero(d), Pattern{bits, d}};
        for (int j = 0; j < d; ++j)
          if (!row.pattern.missing(j)) row.values(j) = 3.0 * rng.normal();
        worst = std::max(worst, std::abs(evaluate_factorized(z, row) - predict_expanded(c, row)));
      }
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("conditional_noise_cov") {
  Matrix diag = Matrix::Zero(3, 3);
  diag.diagonal() << 1.0, 2.0, 3.0;
  const auto model = single(Vector::Zero(3), diag);
  const LinearDGP dgp{1.0, Vector::Ones(3), 0.5};
  const NoiseSpec t = conditional_noise_cov(model, dgp, Pattern{0b101, 3});
  CHECK(t.conditional_cov.rows() == 2);
  CHECK(t.conditional_cov(0, 0) == 1.0);
  CHECK(t.conditional_cov(1, 1) == 3.0);
  CHECK(t.conditional_cov(0, 1) == 0.0);
  CHECK(t.noise_sigma == 0.5);
  CHECK(conditional_noise_cov(model, dgp, Pattern{0, 3}).conditional_cov.size() == 0);

  Matrix cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.5;
  const LinearDGP dgp2{1.0, Vector::Ones(2), 0.0};
  const NoiseSpec t2 = conditional_noise_cov(single(Vector::Zero(2), cov), dgp2, Pattern{0b10, 2});
  CHECK(t2.conditional_cov(0, 0) == doctest::Approx(1.5 - 0.36 / 2.0));
}

TEST_CASE("bayes_risk limiting cases") {
  Rng rng(4);
  const Matrix cov = gen_covariance(3, rng);
  const LinearDGP dgp{1.0, (Vector(3) << 1.0, -0.5, 2.0).finished(), 0.7};
  std::vector<double> none(8, 0.0), all(8, 0.0);
  none[0] = 1.0;
  all[7] = 1.0;
  const std::vector<int> assign(8, 0);
  const PatternMixtureModel observed(3, {{Vector::Zero(3), cov}}, assign, none);
  CHECK(bayes_risk(observed, dgp) == doctest::Approx(0.49));
  const PatternMixtureModel hidden(3, {{Vector::Zero(3), cov}}, assign, all);
  CHECK(bayes_risk(hidden, dgp) == doctest::Approx(0.49 + dgp.beta.dot(cov * dgp.beta)));
}

TEST_CASE("bayes_risk agrees with the Schur-complement risk on random mixtures") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ScenarioConfig sc;
    sc.kind = ScenarioKind::Mixture3;
    sc.dim = 4;
    sc.seed = seed;
    sc.noise_sigma = 0.3;
    sc.beta = (Vector(4) << 1.0, -2.0, 0.5, 1.5).finished();
    const ScenarioParams p = make_scenario(sc);
    const auto model = *p.mixture_model();
    CHECK(bayes_risk(model, p.dgp) == doctest::Approx(schur_risk(model, p.dgp)).epsilon(1e-10));
  }
}

TEST_CASE("bayes_risk matches Monte Carlo within 4 standard errors") {
  ScenarioConfig sc;
  sc.kind = ScenarioKind::Mixture3;
  sc.dim = 2;
  sc.seed = 9;
  const ScenarioParams p = make_scenario(sc);
  const auto model = *p.mixture_model();
  const auto coeffs = compute_delta(model, p.dgp);
  Rng rng(10);
  const SimulatedData s = simulate(p, 400000, rng);
  const Vector err = (s.y - predict_expanded(coeffs, s.masked)).array().square();
  const double mc = err.mean();
  const double se = std::sqrt((err.array() - mc).square().mean() / static_cast<double>(err.size()));
  CHECK(std::abs(mc - bayes_risk(model, p.dgp)) < 4.0 * se);
}

TEST_CASE("parameter counts") {
  CHECK(expanded_param_count(1) == 3);
  CHECK(expanded_param_count(2) == 8);
  CHECK(expanded_param_count(10) == 6144);
  for (int d = 1; d <= 20; ++d) CHECK(expanded_param_count(d) == expanded_param_count_by_enumeration(d));
}

TEST_CASE("clip") {
  CHECK(clip(0.5, 1.0) == 0.5);
  CHECK(clip(-3.0, 1.0) == -1.0);
  CHECK(clip(2.0, 2.0) == 2.0);
  CHECK(clip(clip(7.0, 3.0), 3.0) == clip(7.0, 3.0));
  CHECK_THROWS(clip(1.0, 0.0));
}
