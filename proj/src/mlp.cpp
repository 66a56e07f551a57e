#include "fewboost/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fewboost/error.hpp"
#include "fewboost/metrics.hpp"

namespace fewboost {

Mlp::Mlp(std::vector<int> layer_sizes, std::uint64_t seed) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ValidationError("mlp needs at least input and output sizes");
  for (int s : sizes_) {
    if (s < 1) throw ValidationError("mlp layer sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (int c = 0; c < in; ++c) {
      for (int r = 0; r < out; ++r) layer.weights(r, c) = u(rng);
    }
    for (int r = 0; r < out; ++r) layer.bias(r) = u(rng);
    layers_.push_back(std::move(layer));
  }
  input_offset = Eigen::VectorXd::Zero(sizes_.front());
  input_scale = Eigen::VectorXd::Ones(sizes_.front());
}

Eigen::VectorXd Mlp::forward_normalized(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim()) {
    throw ValidationError("mlp input has " + std::to_string(x.cols()) + " columns, expected " +
                          std::to_string(input_dim()));
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = (a * layers_[l].weights.transpose()).rowwise() +
                        layers_[l].bias.transpose();
    a = l + 1 < layers_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a.col(0);
}

Eigen::VectorXd Mlp::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim()) {
    throw ValidationError("mlp input has " + std::to_string(x.cols()) + " columns, expected " +
                          std::to_string(input_dim()));
  }
  const Eigen::MatrixXd normalized =
      (x.rowwise() - input_offset.transpose()).array().rowwise() /
      input_scale.transpose().array();
  return (forward_normalized(normalized).array() * output_scale + output_offset).matrix();
}

double Mlp::loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd r = forward_normalized(x) - y;
  return 0.5 * r.squaredNorm() / static_cast<double>(y.size());
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Eigen::VectorXd Mlp::parameters() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (const auto& l : layers_) {
    theta.segment(at, l.weights.size()) = l.weights.reshaped();
    at += l.weights.size();
    theta.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  }
  return theta;
}

void Mlp::set_parameters(const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count()) {
    throw ValidationError("parameter vector has the wrong length");
  }
  Eigen::Index at = 0;
  for (auto& l : layers_) {
    l.weights.reshaped() = theta.segment(at, l.weights.size());
    at += l.weights.size();
    l.bias = theta.segment(at, l.bias.size());
    at += l.bias.size();
  }
}

Eigen::VectorXd Mlp::gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const {
  const std::size_t depth = layers_.size();
  // activations[0] = x, activations[l+1] = output of layer l.
  std::vector<Eigen::MatrixXd> activations{x};
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd z = (activations.back() * layers_[l].weights.transpose()).rowwise() +
                        layers_[l].bias.transpose();
    pre.push_back(z);
    activations.push_back(l + 1 < depth ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z);
  }

  const double n = static_cast<double>(y.size());
  Eigen::MatrixXd delta = (activations.back().col(0) - y) / n;
  std::vector<Eigen::MatrixXd> grad_w(depth);
  std::vector<Eigen::VectorXd> grad_b(depth);
  for (std::size_t l = depth; l-- > 0;) {
    grad_w[l] = delta.transpose() * activations[l];
    grad_b[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * layers_[l].weights).cwiseProduct(
          (pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }

  Eigen::VectorXd g(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < depth; ++l) {
    g.segment(at, grad_w[l].size()) = grad_w[l].reshaped();
    at += grad_w[l].size();
    g.segment(at, grad_b[l].size()) = grad_b[l];
    at += grad_b[l].size();
  }
  return g;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      std::vector<double> row(l.weights.row(r).begin(), l.weights.row(r).end());
      w.push_back(row);
    }
    layers.push_back({{"weights", std::move(w)},
                      {"bias", std::vector<double>(l.bias.begin(), l.bias.end())}});
  }
  return {{"layer_sizes", sizes_},
          {"activation", "relu"},
          {"input_offset", std::vector<double>(input_offset.begin(), input_offset.end())},
          {"input_scale", std::vector<double>(input_scale.begin(), input_scale.end())},
          {"output_offset", output_offset},
          {"output_scale", output_scale},
          {"layers", std::move(layers)}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp m;
  m.sizes_ = j.at("layer_sizes").get<std::vector<int>>();
  if (m.sizes_.size() < 2) throw ValidationError("mlp needs at least two layer sizes");
  const auto& layers = j.at("layers");
  if (layers.size() + 1 != m.sizes_.size()) throw ValidationError("mlp layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const int in = m.sizes_[l];
    const int out = m.sizes_[l + 1];
    const auto w = layers[l].at("weights").get<std::vector<std::vector<double>>>();
    const auto b = layers[l].at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(out) || b.size() != static_cast<std::size_t>(out)) {
      throw ValidationError("mlp layer shape mismatch");
    }
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (int r = 0; r < out; ++r) {
      if (w[static_cast<std::size_t>(r)].size() != static_cast<std::size_t>(in)) {
        throw ValidationError("mlp layer shape mismatch");
      }
      for (int c = 0; c < in; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      layer.bias(r) = b[static_cast<std::size_t>(r)];
    }
    m.layers_.push_back(std::move(layer));
  }
  const auto offset = j.at("input_offset").get<std::vector<double>>();
  const auto scale = j.at("input_scale").get<std::vector<double>>();
  if (offset.size() != static_cast<std::size_t>(m.sizes_.front()) || scale.size() != offset.size()) {
    throw ValidationError("mlp input normalisation has the wrong length");
  }
  m.input_offset = Eigen::Map<const Eigen::VectorXd>(offset.data(), static_cast<Eigen::Index>(offset.size()));
  m.input_scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  m.output_offset = j.at("output_offset").get<double>();
  m.output_scale = j.at("output_scale").get<double>();
  return m;
}

// -- Training ----------------------------------------------------------------

MlpFit train_mlp(const Eigen::MatrixXd& features, std::span<const double> targets,
                 std::uint64_t seed, const MlpTrainOptions& options) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (targets.size() != n) throw ValidationError("mlp features and targets differ in length");
  if (n < 20) throw ValidationError("mlp training needs at least 20 rows");
  if (std::all_of(targets.begin(), targets.end(), [&](double v) { return v == targets[0]; })) {
    throw UndefinedMetricError("r2 undefined: meta targets are constant");
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(options.val_fraction * static_cast<double>(n))), 2, n - 2);
  const std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  std::vector<int> sizes{static_cast<int>(features.cols())};
  sizes.insert(sizes.end(), options.hidden.begin(), options.hidden.end());
  sizes.push_back(1);
  Mlp mlp(sizes, rng());

  // Standardisation fitted on the training rows only.
  const Eigen::Index d = features.cols();
  mlp.input_offset = Eigen::VectorXd::Zero(d);
  mlp.input_scale = Eigen::VectorXd::Ones(d);
  double y_mean = 0.0;
  for (auto r : train_rows) {
    mlp.input_offset += features.row(static_cast<Eigen::Index>(r)).transpose();
    y_mean += targets[r];
  }
  const double n_train = static_cast<double>(train_rows.size());
  mlp.input_offset /= n_train;
  y_mean /= n_train;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  double y_var = 0.0;
  for (auto r : train_rows) {
    var += (features.row(static_cast<Eigen::Index>(r)).transpose() - mlp.input_offset).array().square().matrix();
    y_var += (targets[r] - y_mean) * (targets[r] - y_mean);
  }
  for (Eigen::Index c = 0; c < d; ++c) {
    const double sd = std::sqrt(var(c) / n_train);
    mlp.input_scale(c) = sd > 0.0 ? sd : 1.0;
  }
  const double y_sd = std::sqrt(y_var / n_train);
  mlp.output_offset = y_mean;
  mlp.output_scale = y_sd > 0.0 ? y_sd : 1.0;

  auto normalized_rows = [&](std::span<const std::size_t> rows, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
    x.resize(static_cast<Eigen::Index>(rows.size()), d);
    y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(rows[i]);
      x.row(static_cast<Eigen::Index>(i)) =
          (features.row(r) - mlp.input_offset.transpose()).array() / mlp.input_scale.transpose().array();
      y(static_cast<Eigen::Index>(i)) = (targets[rows[i]] - mlp.output_offset) / mlp.output_scale;
    }
  };
  Eigen::MatrixXd x_val;
  Eigen::VectorXd y_val;
  normalized_rows(val_rows, x_val, y_val);

  const std::size_t batch = std::clamp<std::size_t>(options.batch_size, 1, train_rows.size());
  Eigen::VectorXd theta = mlp.parameters();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  long step = 0;

  MlpFit fit;
  double best_r2 = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta = theta;
  int since_best = 0;
  Eigen::MatrixXd xb;
  Eigen::VectorXd yb;
  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    std::shuffle(train_rows.begin(), train_rows.end(), rng);
    for (std::size_t start = 0; start < train_rows.size(); start += batch) {
      const std::size_t len = std::min(batch, train_rows.size() - start);
      normalized_rows(std::span(train_rows).subspan(start, len), xb, yb);
      const Eigen::VectorXd g = mlp.gradient(xb, yb);
      ++step;
      m = options.beta1 * m + (1.0 - options.beta1) * g;
      v = options.beta2 * v + (1.0 - options.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
      theta -= (options.learning_rate * (m / c1).array() /
                ((v / c2).array().sqrt() + options.epsilon))
                   .matrix();
      mlp.set_parameters(theta);
    }
    const Eigen::VectorXd pred = mlp.forward_normalized(x_val);
    const double score = r2(std::span<const double>(y_val.data(), static_cast<std::size_t>(y_val.size())),
                            std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())))
                             .value;
    fit.val_r2.push_back(score);
    if (score > best_r2) {
      best_r2 = score;
      best_theta = theta;
      fit.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  mlp.set_parameters(best_theta);
  fit.mlp = std::move(mlp);
  return fit;
}

}  // namespace fewboost
