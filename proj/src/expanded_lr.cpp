#include <algorithm>
#include <fmt/format.h>
#include <limits>
#include <numeric>

#include "mispred/errors.hpp"
#include "mispred/estimators.hpp"
#include "mispred/rng.hpp"

namespace mispred {

namespace {

// Sufficient statistics of one pattern block with w = (1, x_obs).
struct BlockStats {
  Matrix a;  // sum w w^T
  Vector t;  // sum w y
  double syy = 0.0;

  double count() const { return a.size() ? a(0, 0) : 0.0; }
};

using StatsTable = std::vector<BlockStats>;

StatsTable empty_stats(int d) {
  StatsTable table(std::size_t{1} << d);
  for (std::uint32_t bits = 0; bits < table.size(); ++bits) {
    const int k = Pattern{bits, d}.n_observed() + 1;
    table[bits].a = Matrix::Zero(k, k);
    table[bits].t = Vector::Zero(k);
  }
  return table;
}

void accumulate(StatsTable& table, const MaskedMatrix& data, const Matrix& xs, const Vector& y,
                Eigen::Index i) {
  const std::uint32_t bits = data.pattern_bits()[static_cast<std::size_t>(i)];
  BlockStats& s = table[bits];
  const auto k = s.t.size();
  Vector w(k);
  w(0) = 1.0;
  Eigen::Index pos = 1;
  for (Eigen::Index j = 0; j < data.cols(); ++j)
    if (!((bits >> j) & 1U)) w(pos++) = xs(i, j);
  s.a.selfadjointView<Eigen::Lower>().rankUpdate(w);
  s.t += y(i) * w;
  s.syy += y(i) * y(i);
}

void finalize(StatsTable& table) {
  for (auto& s : table) s.a = s.a.selfadjointView<Eigen::Lower>();
}

struct RidgeSolution {
  double shared = 0.0;
  std::vector<std::optional<Vector>> theta;  // (bias, slopes) per seen pattern
};

RidgeSolution solve_blocks(const StatsTable& table, double lambda) {
  RidgeSolution sol;
  sol.theta.resize(table.size());
  if (lambda == 0.0) {
    // The shared intercept is collinear with the pattern intercepts; the
    // minimum-norm convention puts it at zero.
    for (std::size_t p = 0; p < table.size(); ++p) {
      if (table[p].count() == 0.0) continue;
      Eigen::CompleteOrthogonalDecomposition<Matrix> cod(table[p].a);
      sol.theta[p] = cod.solve(table[p].t);
    }
    return sol;
  }
  double total_n = 0.0;
  double total_y = 0.0;
  double num = 0.0;
  double den = 0.0;
  std::vector<Eigen::LDLT<Matrix>> factors(table.size());
  for (std::size_t p = 0; p < table.size(); ++p) {
    const BlockStats& s = table[p];
    if (s.count() == 0.0) continue;
    Matrix reg = s.a;
    reg.diagonal().array() += lambda;
    factors[p].compute(reg);
    const Vector s_col = s.a.col(0);
    total_n += s.count();
    total_y += s.t(0);
    num += s_col.dot(factors[p].solve(s.t));
    den += s_col.dot(factors[p].solve(s_col));
  }
  const double denom = total_n - den;
  sol.shared = denom > 0.0 ? (total_y - num) / denom : 0.0;
  for (std::size_t p = 0; p < table.size(); ++p) {
    const BlockStats& s = table[p];
    if (s.count() == 0.0) continue;
    sol.theta[p] = factors[p].solve(s.t - sol.shared * Vector(s.a.col(0)));
  }
  return sol;
}

double block_sse(const BlockStats& s, double c, const std::optional<Vector>& theta) {
  if (s.count() == 0.0) return 0.0;
  const double n = s.count();
  const double sy = s.t(0);
  double sse = s.syy - 2.0 * c * sy + c * c * n;
  if (theta) {
    const Vector& th = *theta;
    sse += -2.0 * th.dot(s.t) + 2.0 * c * th.dot(s.a.col(0)) + th.dot(s.a * th);
  }
  return sse;
}

ExpandedLR build_model(int d, Standardizer st, const RidgeSolution& sol, double lambda) {
  std::vector<std::optional<PatternBlock>> table(sol.theta.size());
  for (std::size_t p = 0; p < sol.theta.size(); ++p) {
    if (!sol.theta[p]) continue;
    const Vector& th = *sol.theta[p];
    table[p] = PatternBlock{th(0), th.tail(th.size() - 1)};
  }
  return ExpandedLR(d, std::move(st), sol.shared, std::move(table), lambda);
}

void check_inputs(const MaskedMatrix& data, const Vector& y) {
  const int d = static_cast<int>(data.cols());
  if (d < 1 || d > kMaxExpandedDim) {
    throw DimensionTooLarge(fmt::format("fit_expanded: d = {} outside [1, {}]", d, kMaxExpandedDim));
  }
  if (y.size() != data.rows() || data.rows() < 1) {
    throw InvalidArgument("fit_expanded: data and response sizes differ");
  }
}

}  // namespace

ExpandedLR::ExpandedLR(int dim, Standardizer standardizer, double shared_intercept,
                       std::vector<std::optional<PatternBlock>> table, double ridge_lambda)
    : dim_(dim),
      standardizer_(std::move(standardizer)),
      shared_intercept_(shared_intercept),
      table_(std::move(table)),
      ridge_lambda_(ridge_lambda) {
  if (table_.size() != (std::size_t{1} << dim_)) {
    throw InvalidArgument("ExpandedLR: table must have 2^d entries");
  }
  for (std::uint32_t bits = 0; bits < table_.size(); ++bits) {
    if (table_[bits] && table_[bits]->slopes.size() != Pattern{bits, dim_}.n_observed()) {
      throw InvalidArgument("ExpandedLR: slope length must equal |obs(m)|");
    }
  }
}

double ExpandedLR::predict(const MaskedRow& z) const {
  const auto& block = table_.at(z.pattern.bits);
  if (!block) return shared_intercept_;
  double out = shared_intercept_ + block->bias;
  Eigen::Index k = 0;
  for (int j = 0; j < dim_; ++j) {
    if (!z.pattern.missing(j)) {
      out += block->slopes(k++) * (z.values(j) - standardizer_.mean(j)) / standardizer_.scale(j);
    }
  }
  return out;
}

std::string ExpandedLR::descriptor() const {
  return fmt::format("ExpandedLR(d={}, lambda={})", dim_, ridge_lambda_);
}

std::size_t ExpandedLR::param_count() const {
  std::size_t total = 1;
  for (const auto& b : table_)
    if (b) total += static_cast<std::size_t>(b->slopes.size()) + 1;
  return total;
}

PatternAffine ExpandedLR::original_scale(std::uint32_t bits) const {
  const Pattern p{bits, dim_};
  PatternAffine out;
  out.delta0 = shared_intercept_;
  out.delta = Vector::Zero(p.n_observed());
  const auto& block = table_.at(bits);
  if (!block) return out;
  out.delta0 += block->bias;
  Eigen::Index k = 0;
  for (int j = 0; j < dim_; ++j) {
    if (p.missing(j)) continue;
    const double slope = block->slopes(k) / standardizer_.scale(j);
    out.delta(k) = slope;
    out.delta0 -= slope * standardizer_.mean(j);
    ++k;
  }
  return out;
}

ExpandedLR fit_expanded_fixed(const MaskedMatrix& data, const Vector& y, double lambda) {
  check_inputs(data, y);
  if (lambda < 0.0) throw InvalidArgument("fit_expanded: lambda must be >= 0");
  const int d = static_cast<int>(data.cols());
  Standardizer st = Standardizer::fit(data);
  const Matrix xs = st.transform(data);
  StatsTable stats = empty_stats(d);
  for (Eigen::Index i = 0; i < data.rows(); ++i) accumulate(stats, data, xs, y, i);
  finalize(stats);
  return build_model(d, std::move(st), solve_blocks(stats, lambda), lambda);
}

ExpandedLR fit_expanded(const MaskedMatrix& data, const Vector& y, const ExpandedOptions& options) {
  check_inputs(data, y);
  if (options.lambda_grid.empty()) throw InvalidArgument("fit_expanded: empty lambda grid");
  if (options.folds < 2 || data.rows() < options.folds) {
    throw InvalidArgument("fit_expanded: need folds >= 2 and n >= folds");
  }
  for (double l : options.lambda_grid)
    if (l < 0.0) throw InvalidArgument("fit_expanded: lambda must be >= 0");

  const int d = static_cast<int>(data.cols());
  const Eigen::Index n = data.rows();
  Standardizer st = Standardizer::fit(data);
  const Matrix xs = st.transform(data);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng.engine());

  std::vector<StatsTable> fold_stats;
  for (int f = 0; f < options.folds; ++f) fold_stats.push_back(empty_stats(d));
  for (std::size_t r = 0; r < order.size(); ++r) {
    accumulate(fold_stats[r % static_cast<std::size_t>(options.folds)], data, xs, y, order[r]);
  }
  StatsTable total = empty_stats(d);
  for (auto& fs : fold_stats) {
    finalize(fs);
    for (std::size_t p = 0; p < total.size(); ++p) {
      total[p].a += fs[p].a;
      total[p].t += fs[p].t;
      total[p].syy += fs[p].syy;
    }
  }

  std::vector<double> scores;
  if (options.lambda_grid.size() > 1) {
    for (double lambda : options.lambda_grid) {
      double sse = 0.0;
      for (const auto& fs : fold_stats) {
        StatsTable train = total;
        for (std::size_t p = 0; p < train.size(); ++p) {
          train[p].a -= fs[p].a;
          train[p].t -= fs[p].t;
          train[p].syy -= fs[p].syy;
        }
        const RidgeSolution sol = solve_blocks(train, lambda);
        for (std::size_t p = 0; p < fs.size(); ++p) sse += block_sse(fs[p], sol.shared, sol.theta[p]);
      }
      scores.push_back(sse / static_cast<double>(n));
    }
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] < scores[best]) best = k;
  const double lambda = options.lambda_grid[best];
  ExpandedLR model = build_model(d, std::move(st), solve_blocks(total, lambda), lambda);
  model.cv_scores = std::move(scores);
  return model;
}

}  // namespace mispred
