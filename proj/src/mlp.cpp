#include "bchg/mlp.hpp"

#include <cmath>

#include "bchg/errors.hpp"

namespace bchg {

Mlp::Mlp(std::vector<int> layer_sizes, Rng& rng) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ConfigurationError("Mlp: need at least input and output sizes");
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) w(i, j) = scale * rng.normal();
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(fan_out));
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd h = x;
  for (size_t l = 0; l < weights_.size(); ++l) {
    h = (weights_[l] * h + biases_[l]).eval();
    if (l + 1 < weights_.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& xs) const {
  Eigen::MatrixXd h = xs;
  for (size_t l = 0; l < weights_.size(); ++l) {
    h = (h * weights_[l].transpose()).rowwise() + biases_[l].transpose();
    if (l + 1 < weights_.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

double Mlp::Gradients::squared_norm() const {
  double acc = 0.0;
  for (const auto& w : weights) acc += w.squaredNorm();
  for (const auto& b : biases) acc += b.squaredNorm();
  return acc;
}

Mlp::Gradients Mlp::backward_batch(const Eigen::MatrixXd& xs,
                                   const Eigen::MatrixXd& dloss_dout) const {
  const size_t depth = weights_.size();
  std::vector<Eigen::MatrixXd> activations(depth + 1);
  activations[0] = xs;
  for (size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd z =
        (activations[l] * weights_[l].transpose()).rowwise() + biases_[l].transpose();
    activations[l + 1] = (l + 1 < depth) ? z.cwiseMax(0.0) : z;
  }

  Gradients g;
  g.weights.resize(depth);
  g.biases.resize(depth);
  Eigen::MatrixXd delta = dloss_dout;
  for (size_t l = depth; l-- > 0;) {
    g.weights[l] = delta.transpose() * activations[l];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * weights_[l]).eval();
      // rectifier mask of the preceding hidden activation
      delta = delta.array() * (activations[l].array() > 0.0).cast<double>();
    }
  }
  return g;
}

void Mlp::apply_gradient(const Gradients& g, double lr) {
  for (size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] -= lr * g.weights[l];
    biases_[l] -= lr * g.biases[l];
  }
}

int Mlp::parameter_count() const {
  int count = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    count += static_cast<int>(weights_[l].size() + biases_[l].size());
  }
  return count;
}

Eigen::VectorXd Mlp::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  int k = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    for (int i = 0; i < weights_[l].rows(); ++i)
      for (int j = 0; j < weights_[l].cols(); ++j) flat[k++] = weights_[l](i, j);
    for (int i = 0; i < biases_[l].size(); ++i) flat[k++] = biases_[l][i];
  }
  return flat;
}

void Mlp::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw ConfigurationError("Mlp: parameter size mismatch");
  int k = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    for (int i = 0; i < weights_[l].rows(); ++i)
      for (int j = 0; j < weights_[l].cols(); ++j) weights_[l](i, j) = flat[k++];
    for (int i = 0; i < biases_[l].size(); ++i) biases_[l][i] = flat[k++];
  }
}

Eigen::VectorXd Mlp::flatten(const Gradients& g) const {
  Eigen::VectorXd flat(parameter_count());
  int k = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    for (int i = 0; i < g.weights[l].rows(); ++i)
      for (int j = 0; j < g.weights[l].cols(); ++j) flat[k++] = g.weights[l](i, j);
    for (int i = 0; i < g.biases[l].size(); ++i) flat[k++] = g.biases[l][i];
  }
  return flat;
}

void Mlp::scale_layer(int layer, double factor) {
  if (layer < 0) layer += static_cast<int>(weights_.size());
  weights_.at(layer) *= factor;
  biases_.at(layer) *= factor;
}

void Mlp::blend_from(const Mlp& live, double smoothing) {
  for (size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] = (1.0 - smoothing) * weights_[l] + smoothing * live.weights_[l];
    biases_[l] = (1.0 - smoothing) * biases_[l] + smoothing * live.biases_[l];
  }
}

}  // namespace bchg
