#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>
#include <optional>

#include "mispred/errors.hpp"
#include "mispred/estimators.hpp"
#include "mispred/rng.hpp"

namespace mispred {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix network_inputs(const Standardizer& st, const MaskedMatrix& data) {
  const Eigen::Index d = data.cols();
  RowMatrix in(data.rows(), 2 * d);
  in.leftCols(d) = st.transform(data);
  in.rightCols(d) = data.mask();
  return in;
}

struct Params {
  Matrix w1;  // n_h x 2d
  Vector b1;
  Vector w2;
  double b2 = 0.0;
};

struct AdamState {
  Params m, v;
  long step = 0;
};

Params zeros_like(const Params& p) {
  return {Matrix::Zero(p.w1.rows(), p.w1.cols()), Vector::Zero(p.b1.size()),
          Vector::Zero(p.w2.size()), 0.0};
}

Params init_params(int inputs, int hidden, Rng& rng) {
  Params p;
  const double a1 = 1.0 / std::sqrt(static_cast<double>(inputs));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto draw = [&rng](double a) { return a * (2.0 * rng.uniform() - 1.0); };
  p.w1.resize(hidden, inputs);
  for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = draw(a1);
  p.b1.resize(hidden);
  for (Eigen::Index i = 0; i < hidden; ++i) p.b1(i) = draw(a1);
  p.w2.resize(hidden);
  for (Eigen::Index i = 0; i < hidden; ++i) p.w2(i) = draw(a2);
  p.b2 = draw(a2);
  return p;
}

double mse(const Params& p, const RowMatrix& x, const Vector& y) {
  if (x.rows() == 0) return 0.0;
  const Matrix z = (x * p.w1.transpose()).rowwise() + p.b1.transpose();
  const Vector out = (z.cwiseMax(0.0) * p.w2).array() + p.b2;
  return (out - y).squaredNorm() / static_cast<double>(y.size());
}

template <typename T>
void adam_step(T& param, T& m, T& v, const T& grad, double lr, double beta1, double beta2,
               long step, double decay) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  param -= lr * ((m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8)).matrix();
  if (decay > 0.0) param -= lr * decay * param;
}

void adam_step_scalar(double& param, double& m, double& v, double grad, double lr, double beta1,
                      double beta2, long step) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad * grad;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  param -= lr * (m / c1) / (std::sqrt(v / c2) + 1e-8);
}

struct TrainResult {
  Params best;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs = 0;
};

TrainResult train_one(const RowMatrix& x_train, const Vector& y_train, const RowMatrix& x_val,
                      const Vector& y_val, const MlpOptions& opt, double decay, Rng init_rng,
                      Rng order_rng) {
  const int inputs = static_cast<int>(x_train.cols());
  Params p = init_params(inputs, opt.hidden_width, init_rng);
  AdamState adam{zeros_like(p), zeros_like(p), 0};
  TrainResult result;
  result.best = p;

  const Eigen::Index n = x_train.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Eigen::Index batch = std::max<Eigen::Index>(1, std::min<Eigen::Index>(opt.batch_size, n));
  RowMatrix xb(batch, inputs);
  Vector yb(batch);
  int since_best = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng.engine());
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index b = std::min(batch, n - start);
      if (xb.rows() != b) {
        xb.resize(b, inputs);
        yb.resize(b);
      }
      for (Eigen::Index r = 0; r < b; ++r) {
        xb.row(r) = x_train.row(order[static_cast<std::size_t>(start + r)]);
        yb(r) = y_train(order[static_cast<std::size_t>(start + r)]);
      }
      const Matrix z = (xb * p.w1.transpose()).rowwise() + p.b1.transpose();
      const Matrix h = z.cwiseMax(0.0);
      const Vector out = (h * p.w2).array() + p.b2;
      const Vector dout = (2.0 / static_cast<double>(b)) * (out - yb);
      const Vector g_w2 = h.transpose() * dout;
      const double g_b2 = dout.sum();
      const Matrix dz = (dout * p.w2.transpose()).cwiseProduct((z.array() > 0.0).cast<double>().matrix());
      const Matrix g_w1 = dz.transpose() * xb;
      const Vector g_b1 = dz.colwise().sum().transpose();

      ++adam.step;
      adam_step(p.w1, adam.m.w1, adam.v.w1, g_w1, opt.learning_rate, opt.beta1, opt.beta2, adam.step, decay);
      adam_step(p.b1, adam.m.b1, adam.v.b1, g_b1, opt.learning_rate, opt.beta1, opt.beta2, adam.step, 0.0);
      adam_step(p.w2, adam.m.w2, adam.v.w2, g_w2, opt.learning_rate, opt.beta1, opt.beta2, adam.step, decay);
      adam_step_scalar(p.b2, adam.m.b2, adam.v.b2, g_b2, opt.learning_rate, opt.beta1, opt.beta2, adam.step);
    }
    const double val = x_val.rows() > 0 ? mse(p, x_val, y_val) : mse(p, x_train, y_train);
    if (!std::isfinite(val)) {
      throw NonFiniteLoss(fmt::format("fit_mlp: validation loss became {} at epoch {}", val, epoch));
    }
    result.epochs = epoch + 1;
    if (val < result.best_val * (1.0 - 1e-4) || !std::isfinite(result.best_val)) {
      since_best = 0;
    } else {
      ++since_best;
    }
    if (val < result.best_val) {
      result.best_val = val;
      result.best = p;
    }
    if (opt.patience > 0 && since_best >= opt.patience) break;
  }
  return result;
}

}  // namespace

MlpRegressor::MlpRegressor(Standardizer standardizer, double y_mean, double y_scale,
                           Matrix input_weights, Vector input_bias, Vector output_weights,
                           double output_bias, double weight_decay)
    : standardizer_(std::move(standardizer)),
      y_mean_(y_mean),
      y_scale_(y_scale),
      input_weights_(std::move(input_weights)),
      input_bias_(std::move(input_bias)),
      output_weights_(std::move(output_weights)),
      output_bias_(output_bias),
      weight_decay_(weight_decay) {
  const Eigen::Index h = input_weights_.rows();
  if (h < 1 || input_weights_.cols() != 2 * standardizer_.mean.size() || input_bias_.size() != h ||
      output_weights_.size() != h) {
    throw InvalidArgument("MlpRegressor: inconsistent weight shapes");
  }
}

Vector MlpRegressor::hidden_preactivations(const MaskedRow& z) const {
  const Eigen::Index d = dim();
  Vector in(2 * d);
  in.head(d) = standardizer_.transform(z);
  for (Eigen::Index j = 0; j < d; ++j) in(d + j) = z.pattern.missing(static_cast<int>(j)) ? 1.0 : 0.0;
  return input_weights_ * in + input_bias_;
}

double MlpRegressor::predict(const MaskedRow& z) const {
  const double out = hidden_preactivations(z).cwiseMax(0.0).dot(output_weights_) + output_bias_;
  return out * y_scale_ + y_mean_;
}

Vector MlpRegressor::predict(const MaskedMatrix& data) const {
  if (data.cols() != dim()) throw InvalidArgument("MlpRegressor: data dimension mismatch");
  const RowMatrix in = network_inputs(standardizer_, data);
  const Matrix z = (in * input_weights_.transpose()).rowwise() + input_bias_.transpose();
  Vector out = ((z.cwiseMax(0.0) * output_weights_).array() + output_bias_) * y_scale_ + y_mean_;
  return out;
}

std::string MlpRegressor::descriptor() const {
  return fmt::format("MLP(d={}, hidden={}, decay={})", dim(), hidden_width(), weight_decay_);
}

std::size_t MlpRegressor::param_count() const {
  return static_cast<std::size_t>(mlp_param_count(dim(), static_cast<std::uint64_t>(hidden_width())));
}

std::uint64_t mlp_param_count(int d, std::uint64_t hidden_width) {
  if (d < 1) throw InvalidArgument("mlp_param_count: d must be >= 1");
  const auto dd = static_cast<std::uint64_t>(d);
  return (2 * dd + 1) * hidden_width + hidden_width + 1;
}

MlpRegressor fit_mlp(const MaskedMatrix& data, const Vector& y, const MlpOptions& options, Rng& rng) {
  if (options.hidden_width < 1) throw InvalidArgument("fit_mlp: hidden_width must be >= 1");
  if (options.decay_grid.empty()) throw InvalidArgument("fit_mlp: empty decay grid");
  if (options.epochs < 1 || options.batch_size < 1 || !(options.learning_rate > 0.0)) {
    throw InvalidArgument("fit_mlp: epochs, batch_size and learning_rate must be positive");
  }
  if (!(options.validation_fraction >= 0.0 && options.validation_fraction < 1.0)) {
    throw InvalidArgument("fit_mlp: validation_fraction must be in [0, 1)");
  }
  const Eigen::Index n = data.rows();
  if (y.size() != n || n < 1) throw InvalidArgument("fit_mlp: bad shapes");

  Standardizer st = Standardizer::fit(data);
  const RowMatrix inputs = network_inputs(st, data);
  const double y_mean = y.mean();
  double y_scale = std::sqrt((y.array() - y_mean).square().mean());
  if (!(y_scale > 0.0)) y_scale = 1.0;
  const Vector ys = (y.array() - y_mean) / y_scale;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng split_rng = rng.split("validation-split");
  std::shuffle(order.begin(), order.end(), split_rng.engine());
  const auto n_val = static_cast<Eigen::Index>(
      std::floor(options.validation_fraction * static_cast<double>(n)));
  const Eigen::Index n_train = n - n_val;
  RowMatrix x_train(n_train, inputs.cols()), x_val(n_val, inputs.cols());
  Vector y_train(n_train), y_val(n_val);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index src = order[static_cast<std::size_t>(r)];
    if (r < n_train) {
      x_train.row(r) = inputs.row(src);
      y_train(r) = ys(src);
    } else {
      x_val.row(r - n_train) = inputs.row(src);
      y_val(r - n_train) = ys(src);
    }
  }

  std::vector<double> losses;
  std::optional<TrainResult> best;
  double best_decay = options.decay_grid.front();
  for (std::size_t k = 0; k < options.decay_grid.size(); ++k) {
    const double decay = options.decay_grid[k];
    TrainResult r = train_one(x_train, y_train, x_val, y_val, options, decay, rng.split("init"),
                              rng.split(std::uint64_t{1000} + k));
    losses.push_back(r.best_val);
    if (!best || r.best_val < best->best_val) {
      best = std::move(r);
      best_decay = decay;
    }
  }
  MlpRegressor model(std::move(st), y_mean, y_scale, best->best.w1, best->best.b1, best->best.w2,
                     best->best.b2, best_decay);
  model.validation_losses = std::move(losses);
  model.epochs_run = best->epochs;
  return model;
}

}  // namespace mispred
