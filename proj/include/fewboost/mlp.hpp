#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace fewboost {

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

// Fully connected regressor: ReLU on hidden layers, identity output.
// Inputs are mapped (x - input_offset) / input_scale before the first layer
// and the network output y' back to y' * output_scale + output_offset; both
// maps default to identity.
class Mlp {
 public:
  Mlp() = default;
  // Glorot-uniform weights and biases. layer_sizes = {in, hidden..., 1}.
  Mlp(std::vector<int> layer_sizes, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  int input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }

  Eigen::VectorXd input_offset;
  Eigen::VectorXd input_scale;
  double output_offset = 0.0;
  double output_scale = 1.0;

  // Network output on already-normalised inputs (rows x in).
  Eigen::VectorXd forward_normalized(const Eigen::MatrixXd& x) const;
  // Full prediction in target units on raw inputs.
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  // Half mean squared error of forward_normalized(x) against y.
  double loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const;

  // Flattened parameters: per layer, weights (column-major) then bias.
  std::size_t parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);
  // Analytic d loss / d parameters by backpropagation, same layout.
  Eigen::VectorXd gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::vector<int> sizes_;
  std::vector<DenseLayer> layers_;
};

struct MlpTrainOptions {
  std::vector<int> hidden = {10, 5};
  double val_fraction = 0.10;
  int max_epochs = 64;
  int patience = 8;
  std::size_t batch_size = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct MlpFit {
  Mlp mlp;
  std::vector<double> val_r2;  // one entry per epoch run
  int best_epoch = 0;          // 1-based
};

// Adam on the half-MSE loss with inputs and targets standardised. After each
// epoch the validation R2 is computed; the best-scoring weights are kept and
// training stops at max_epochs or after `patience` epochs without
// improvement. Needs >= 20 rows and non-constant targets.
MlpFit train_mlp(const Eigen::MatrixXd& features, std::span<const double> targets,
                 std::uint64_t seed, const MlpTrainOptions& options = {});

}  // namespace fewboost
