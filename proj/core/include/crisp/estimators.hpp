#pragma once
#include <optional>
#include <string>

#include "crisp/dataset.hpp"
#include "crisp/dual.hpp"
#include "crisp/kernels.hpp"
#include "crisp/sensitivity.hpp"

namespace crisp {

struct BoundReport {
  double value = 0.0;
  Direction direction = Direction::lower;
  Eigen::VectorXd weights;  ///< recovered w~
  DualParams dual;
  std::string model_desc, basis_desc, estimator;
  double param = 0.0;  ///< the gamma/budget the model was run at
  double tie_fraction = 0.0;
  double constraint_residual = 0.0;  ///< ||Psi^T(w-1)/n|| (or target residual)
  double slack = 0.0;                ///< ZSB feasibility slack
  std::string solver_status = "ok";
  bool converged = true;

  /// The solved dual problem in lower-bound form (r negated for upper runs);
  /// kept for downstream inference.
  DualProblem problem;
  double dual_objective = 0.0;  ///< mean loss at the solved theta

  // optional inference columns, filled by asymptotics helpers
  std::optional<double> ci_lo, ci_hi, ci_lo_corrected, ci_hi_corrected, gic_value;

  std::string csv_row() const;
  static std::string csv_header();
};

/// Reparametrized rewards r_i = (pi(T_i|X_i)/p_obs_i) * Y_i.
Eigen::VectorXd reparametrized_rewards(const Dataset& d, const Policy& policy);

double ipw(const Dataset& d, const Policy& policy);
double hajek(const Dataset& d, const Policy& policy);

/// Kernel conditional-moment-constrained bound (box or f-divergence model).
BoundReport kcmc_bound(const Dataset& d, const Policy& policy,
                       const SensitivityModel& model, const ConstraintBasis& basis,
                       Direction dir, const SolveOptions& opts = {});

/// Per-treatment balancing-weight bound (binary actions); infeasibility near
/// gamma=1 is resolved by optimizing on the violation-minimal face.
BoundReport zsb_bound(const Dataset& d, const Policy& policy, BoxKind kind,
                      double gamma, Direction dir, const SolveOptions& opts = {});

/// Two-stage quantile-balancing bound: pinball regression of Y on
/// features/(pi/p_obs) at tau = 1/(1+gamma), then the box program with the
/// single fitted-quantile balancing constraint.
BoundReport qb_bound(const Dataset& d, const Policy& policy, double gamma,
                     const ConstraintBasis& features, Direction dir,
                     const SolveOptions& opts = {});

/// Projection residual of the analytic optimal multiplier (pi/p) * Q_tau(t,x)
/// onto the basis span, on a fresh synthetic sample: zero means the finite
/// basis loses nothing at this gamma.
double specification_residual(const SyntheticTruth& truth, const Policy& policy,
                              double gamma, const ConstraintBasis& basis,
                              Eigen::Index n_grid, std::uint64_t seed = 321,
                              Direction dir = Direction::lower);

}  // namespace crisp
