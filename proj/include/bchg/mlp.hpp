#pragma once

#include <Eigen/Core>
#include <vector>

#include "bchg/rng.hpp"

namespace bchg {

// Feedforward net with rectifier hidden layers and a linear output layer.
// Batched forward/backward over row-major sample matrices.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Rng& rng);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  // rows are samples
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& xs) const;

  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    double squared_norm() const;
  };

  // Backprop given dLoss/dOutput per sample (same layout as forward_batch output).
  Gradients backward_batch(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& dloss_dout) const;

  // Plain gradient descent step: w -= lr * g.
  void apply_gradient(const Gradients& g, double lr);

  // Flattened parameter view for gradient checks and score-style gradients.
  int parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
  Eigen::VectorXd flatten(const Gradients& g) const;

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  // shadow <- (1 - smoothing) * shadow + smoothing * live, elementwise
  void blend_from(const Mlp& live, double smoothing);

  // Shrinks one layer's weights and biases (small-output initialization).
  void scale_layer(int layer, double factor);

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;  // (out, in)
  std::vector<Eigen::VectorXd> biases_;
};

struct TargetNetwork {
  Mlp shadow;
  double smoothing = 1e-2;

  explicit TargetNetwork(const Mlp& live, double smoothing_factor = 1e-2)
      : shadow(live), smoothing(smoothing_factor) {}
  void update(const Mlp& live) { shadow.blend_from(live, smoothing); }
};

}  // namespace bchg
