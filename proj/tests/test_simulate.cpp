#include <doctest.h>

#include <cmath>

#include "mispred/errors.hpp"
#include "mispred/rng.hpp"
#include "mispred/simulate.hpp"

using namespace mispred;

namespace {

ScenarioParams scenario(ScenarioKind kind, int d, std::uint64_t seed) {
  ScenarioConfig c;
  c.kind = kind;
  c.dim = d;
  c.seed = seed;
  return make_scenario(c);
}

}  // namespace

TEST_CASE("gen_covariance shape, floor and rank") {
  Rng rng(1);
  const Matrix one = gen_covariance(1, rng);
  CHECK(one.rows() == 1);
  CHECK(one(0, 0) == doctest::Approx(0.1));

  const Matrix c4 = gen_covariance(4, rng);
  Eigen::SelfAdjointEigenSolver<Matrix> es(c4);
  CHECK(es.eigenvalues().minCoeff() >= 0.1 - 1e-12);
  // B B^T = cov - 0.1 I has rank floor(d/2) = 2.
  Eigen::JacobiSVD<Matrix> svd(c4 - 0.1 * Matrix::Identity(4, 4));
  const auto sv = svd.singularValues();
  CHECK(sv(2) < 1e-10 * sv(0));
  CHECK(sv(3) < 1e-10 * sv(0));
}

TEST_CASE("mixture1 masks are fair coins per feature and equiprobable per pattern") {
  const ScenarioParams p = scenario(ScenarioKind::Mixture1, 3, 4);
  Rng rng(2);
  const Eigen::Index n = 1000000;
  const auto [masked, complete] = sample_mixture1(p, n, rng);
  const Vector rates = masked.mask().colwise().mean();
  CHECK((rates.array() - 0.5).abs().maxCoeff() < 0.01);
  std::vector<double> freq(8, 0.0);
  for (auto b : masked.pattern_bits()) freq[b] += 1.0 / static_cast<double>(n);
  for (double f : freq) CHECK(std::abs(f - 0.125) < 0.002);
  // Complete-data mean within 4 sd / sqrt(n) of mu.
  const Vector mean = complete.colwise().mean();
  for (int j = 0; j < 3; ++j) {
    const double sd = std::sqrt(p.components[0].cov(j, j));
    CHECK(std::abs(mean(j) - p.components[0].mean(j)) < 4.0 * sd / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("mixture3 assigns pattern index mod 3 and draws X from that component") {
  const ScenarioParams p = scenario(ScenarioKind::Mixture3, 2, 8);
  CHECK(p.components.size() == 3);
  CHECK(p.assignment == std::vector<int>{0, 1, 2, 0});
  Rng rng(3);
  const Eigen::Index n = 100000;
  const auto [masked, complete] = sample_mixture3(p, n, rng);
  Vector sum = Vector::Zero(2);
  double count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (masked.pattern(i).bits == 2) {
      sum += complete.row(i).transpose();
      count += 1;
    }
  }
  const GaussianComponent& c = p.components[2];
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(sum(j) / count - c.mean(j)) < 4.0 * std::sqrt(c.cov(j, j) / count));
  }
  CHECK(std::abs(count / n - 0.25) < 0.01);
}

TEST_CASE("samplers refuse the wrong scenario kind") {
  const ScenarioParams p = scenario(ScenarioKind::Mixture1, 2, 1);
  Rng rng(1);
  CHECK_THROWS_AS(sample_mixture3(p, 10, rng), InvalidArgument);
  CHECK_THROWS_AS(sample_selfmasking(p, 10, rng), InvalidArgument);
  CHECK_FALSE(scenario(ScenarioKind::SelfMasking, 2, 1).mixture_model().has_value());
}

TEST_CASE("calibrate_selfmask closed-form checks") {
  const Vector mean = (Vector(2) << 0.3, -1.0).finished();
  Matrix cov(2, 2);
  cov << 1.0, 0.2, 0.2, 2.0;
  const Vector lambda = Vector::Ones(2);
  CHECK(calibrate_selfmask(mean, cov, lambda, 0.5) == mean);

  // mu = 0, var = 1, lambda = 1: mu0 = -Phi^{-1}(0.25) sqrt(2).
  const double expected = 0.6744897501960817 * std::sqrt(2.0);
  const Vector mu0 = calibrate_selfmask(Vector::Zero(1), Matrix::Identity(1, 1), Vector::Ones(1), 0.25);
  CHECK(mu0(0) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(mu0(0) == doctest::Approx(0.9539).epsilon(1e-4));

  const Vector m2 = calibrate_selfmask(mean, cov, (Vector(2) << 0.5, 3.0).finished(), 0.1);
  CHECK(selfmask_missing_rate(mean(0), cov(0, 0), 0.5, m2(0)) == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(selfmask_missing_rate(mean(1), cov(1, 1), 3.0, m2(1)) == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("self-masking: calibrated rate, monotonicity, vanishing steepness") {
  const ScenarioParams p = scenario(ScenarioKind::SelfMasking, 3, 5);
  Rng rng(6);
  const Eigen::Index n = 1000000;
  const auto [masked, complete] = sample_selfmasking(p, n, rng);
  const Vector rates = masked.mask().colwise().mean();
  CHECK((rates.array() - 0.25).abs().maxCoeff() < 0.002);

  // P(M=1 | X high) > P(M=1 | X low) for feature 0.
  std::vector<double> x(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = complete(i, 0);
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const double q1 = sorted[static_cast<std::size_t>(n / 10)], q9 = sorted[static_cast<std::size_t>(9 * n / 10)];
  double hi_m = 0, hi_n = 0, lo_m = 0, lo_n = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x[static_cast<std::size_t>(i)] > q9) {
      hi_m += masked.mask()(i, 0);
      hi_n += 1;
    } else if (x[static_cast<std::size_t>(i)] < q1) {
      lo_m += masked.mask()(i, 0);
      lo_n += 1;
    }
  }
  CHECK(hi_m / hi_n > lo_m / lo_n);

  ScenarioConfig flat;
  flat.kind = ScenarioKind::SelfMasking;
  flat.dim = 2;
  flat.seed = 3;
  flat.target_missing_rate = 0.3;
  flat.lambda = Vector::Constant(2, 1e-6);
  ScenarioParams fp = make_scenario(flat);
  // Tiny lambda: the rate is pinned by mu0 only; moving mu0 to mu gives 1/2.
  fp.selfmask->mu0 = fp.components[0].mean;
  Rng r2(7);
  const auto flat_data = sample_selfmasking(fp, 200000, r2).first;
  CHECK((flat_data.mask().colwise().mean().array() - 0.5).abs().maxCoeff() < 0.005);
}

TEST_CASE("gen_response") {
  LinearDGP dgp{1.0, Vector::Ones(2), 0.0};
  Rng rng(1);
  Matrix x(2, 2);
  x << 0, 0, 2, 3;
  const Vector y = gen_response(x, dgp, rng);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 6.0);

  dgp.noise_sigma = 1.0;
  const Matrix big = Matrix::Random(100000, 2);
  const Vector noisy = gen_response(big, dgp, rng);
  const Vector resid = noisy - ((big * dgp.beta).array() + 1.0).matrix();
  const double var = (resid.array() - resid.mean()).square().mean();
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("simulate is a pure function of (params, n, seed)") {
  const ScenarioParams p = scenario(ScenarioKind::Mixture3, 3, 11);
  Rng a(4), b(4);
  const SimulatedData s1 = simulate(p, 500, a);
  const SimulatedData s2 = simulate(p, 500, b);
  CHECK(s1.complete == s2.complete);
  CHECK(s1.masked.mask() == s2.masked.mask());
  CHECK(s1.y == s2.y);
  const ScenarioParams p2 = scenario(ScenarioKind::Mixture3, 3, 11);
  CHECK(p2.components[1].cov == p.components[1].cov);
}

TEST_CASE("scenario kinds round-trip through strings") {
  for (auto k : {ScenarioKind::Mixture1, ScenarioKind::Mixture3, ScenarioKind::SelfMasking}) {
    CHECK(scenario_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(scenario_kind_from_string("mixture2"), ConfigError);
}
