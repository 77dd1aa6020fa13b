#pragma once
#include <Eigen/Core>
#include <memory>
#include <vector>

namespace crisp {

/// Evaluation policies: logistic over a binary action, Gaussian location
/// policy over a continuous action, or a mixture of fixed components with
/// learnable simplex weights.
class Policy {
 public:
  enum class Kind { logistic, gaussian, mixed };

  static Policy logistic(Eigen::VectorXd beta);
  static Policy gaussian(Eigen::VectorXd beta, double variance);
  static Policy mixture(std::vector<Policy> components, Eigen::VectorXd weights);

  Kind kind() const { return kind_; }

  /// Probability mass (binary) or density (continuous) of action t at context x.
  double prob(double t, const Eigen::VectorXd& x) const;

  /// Gradient of prob(t|x) with respect to the learnable parameters
  /// (beta for logistic/gaussian, mixture weights for mixed).
  Eigen::VectorXd grad_param(double t, const Eigen::VectorXd& x) const;

  int param_dim() const;
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);

 private:
  Policy() = default;
  Kind kind_ = Kind::logistic;
  Eigen::VectorXd beta_;
  double variance_ = 1.0;
  std::vector<Policy> components_;
  Eigen::VectorXd weights_;
};

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

}  // namespace crisp
