#pragma once
#include <Eigen/Core>
#include <functional>
#include <string>

#include "crisp/dataset.hpp"

namespace crisp {

struct KernelSpec {
  enum class Kind { gaussian_rbf, linear, polynomial };
  Kind kind = Kind::gaussian_rbf;
  double bandwidth = 1.0;  ///< rbf length scale
  int degree = 2;          ///< polynomial only

  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
};

/// Encode (t,x) rows for the joint kernel: binary t is one-hot concatenated
/// ([1-t, t, x]), continuous t is prepended as-is.
Eigen::MatrixXd encode_points(const Dataset& d);
Eigen::VectorXd encode_point(double t, const Eigen::VectorXd& x, ActionKind kind);

Eigen::MatrixXd gram_matrix(const KernelSpec& k, const Eigen::MatrixXd& points);

/// Median pairwise Euclidean distance (subsampled to 2000 points), floor 1e-12.
double median_heuristic(const Eigen::MatrixXd& points);

struct ConstraintBasis {
  Eigen::MatrixXd Psi;     ///< n x D, unit empirical second moment per column
  Eigen::VectorXd eigvals; ///< KPCA spectrum (excluding any constant column)
  bool includes_constant = false;
  bool degenerate = false;
  int effective_D = 0;     ///< post-truncation count (== Psi.cols())
  std::string desc;

  /// Out-of-sample evaluation of all columns at one point.
  std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x)> extend;

  Eigen::Index D() const { return Psi.cols(); }

  /// Basis restricted to the first D' columns of the same fit (nestedness).
  ConstraintBasis prefix(Eigen::Index d_prime) const;
};

/// Kernel-PCA basis of the doubly-centered Gram matrix with Nystrom
/// out-of-sample extension; columns sorted by eigenvalue, truncated when
/// lambda_D < 1e-10 * lambda_1.  n > 4000 switches to a 2000-landmark fit.
ConstraintBasis kpca_basis(const KernelSpec& k, const Dataset& d, Eigen::Index D,
                           bool include_constant = false);

/// D=1 basis psi_1(t,x) = (pi(t|x)/p_obs(t|x)) * Qhat(t,x) evaluated on the
/// sample; `qhat` gives per-sample values, `qhat_fn` the out-of-sample map.
ConstraintBasis quantile_feature_basis(
    const Policy& policy, const Dataset& d, const Eigen::VectorXd& qhat,
    std::function<double(double, const Eigen::VectorXd&)> qhat_fn = {},
    std::function<double(double, const Eigen::VectorXd&)> p_obs_fn = {});

/// Copy of `base` with row i multiplied by pi(T_i|X_i)/p_obs(T_i|X_i) and
/// columns renormalized to unit second moment.  Dual solutions of box
/// problems have the form (pi/p) * q(t,x), so scaling the span this way is
/// what lets a smooth feature set represent them.  Extension requires an
/// out-of-sample propensity map.
ConstraintBasis ratio_scaled_basis(
    const Policy& policy, const Dataset& d, const ConstraintBasis& base,
    std::function<double(double, const Eigen::VectorXd&)> p_obs_fn = {});

/// Explicit balancing basis for binary actions: per-arm intercept and linear
/// terms of x, all scaled by pi/p (D = 2*(1+dim)).  When the conditional
/// quantile of Y is linear in x within each arm, the optimal dual lies in
/// this span exactly.
ConstraintBasis arm_linear_basis(
    const Policy& policy, const Dataset& d,
    std::function<double(double, const Eigen::VectorXd&)> p_obs_fn = {});

}  // namespace crisp
