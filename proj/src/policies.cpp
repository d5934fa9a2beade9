#include "bchg/policies.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>

#include "bchg/errors.hpp"

namespace bchg {

void TabularPolicy::validate() const {
  for (int s = 0; s < probs.rows(); ++s) {
    if (std::abs(probs.row(s).sum() - 1.0) > 1e-9 || probs.row(s).minCoeff() < -1e-12) {
      throw ConfigurationError("TabularPolicy: row is not a distribution");
    }
  }
}

void ConditionedTabularPolicy::validate() const {
  if (probs.rows() != static_cast<long>(n_states) * n_leader_actions) {
    throw ConfigurationError("ConditionedTabularPolicy: row count mismatch");
  }
  for (int r = 0; r < probs.rows(); ++r) {
    if (std::abs(probs.row(r).sum() - 1.0) > 1e-9 || probs.row(r).minCoeff() < -1e-12) {
      throw ConfigurationError("ConditionedTabularPolicy: row is not a distribution");
    }
  }
}

TabularPolicy SoftmaxTabularLeader::policy() const {
  TabularPolicy pi;
  pi.probs.resize(logits.rows(), logits.cols());
  for (int s = 0; s < logits.rows(); ++s) {
    Eigen::VectorXd z = (logits.row(s).array() - logits.row(s).maxCoeff()).exp();
    pi.probs.row(s) = (z / z.sum()).transpose();
  }
  return pi;
}

Eigen::VectorXd SoftmaxTabularLeader::score(int s, int a) const {
  Eigen::VectorXd z = (logits.row(s).array() - logits.row(s).maxCoeff()).exp();
  Eigen::VectorXd p = z / z.sum();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  const int base = s * n_actions();
  for (int j = 0; j < n_actions(); ++j) g[base + j] = (j == a ? 1.0 : 0.0) - p[j];
  return g;
}

Eigen::VectorXd GaussianLinearPolicy::sample(const Eigen::VectorXd& s, Rng& rng) const {
  return mean(s) + cov_factor * rng.normal_vector(static_cast<int>(cov_factor.cols()));
}

Eigen::VectorXd GaussianLinearPolicy::score_gain(const Eigen::VectorXd& s,
                                                 const Eigen::VectorXd& a) const {
  const Eigen::MatrixXd cov = cov_factor * cov_factor.transpose();
  const Eigen::VectorXd resid = cov.ldlt().solve(a - gain * s);
  Eigen::MatrixXd g = resid * s.transpose();  // (action dim, state dim)
  Eigen::VectorXd flat(g.size());
  int k = 0;
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) flat[k++] = g(i, j);
  return flat;
}

Eigen::VectorXd LqrFollowerPolicy::sample(const Eigen::VectorXd& s, Rng& rng) const {
  return mean(s) + cov_chol * rng.normal_vector(static_cast<int>(cov_chol.cols()));
}

Eigen::VectorXd LqrFollowerPolicy::sample(const Eigen::VectorXd& s, const Eigen::VectorXd& w,
                                          Rng& rng) const {
  return mean(s, w) + cov_chol * rng.normal_vector(static_cast<int>(cov_chol.cols()));
}

}  // namespace bchg
