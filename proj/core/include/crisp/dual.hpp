#pragma once
#include <Eigen/Core>
#include <string>

#include "crisp/sensitivity.hpp"

namespace crisp {

/// Dual/ERM parameters theta = (eta_f, eta).  eta_f is unused (0) on the
/// box path, strictly positive on the f-divergence path.
struct DualParams {
  double eta_f = 0.0;
  Eigen::VectorXd eta;
};

/// The empirical dual program: minimize mean_i loss(theta; z_i) where the
/// loss couples reparametrized rewards r_i with moment constraints through
/// the conjugate of the sensitivity generator.
///
/// Constraint convention: standard problems impose mean((w-1) psi_d) = 0,
/// whose dual linear term is -eta^T psi_i per sample.  Fixed-target problems
/// (per-treatment balancing) impose mean(w phi_d) = c_d with the constant
/// linear term -eta^T c.
struct DualProblem {
  Eigen::VectorXd r;    ///< (pi/p_obs) * y, already negated for upper bounds
  Eigen::MatrixXd psi;  ///< n x D constraint functions at the sample
  bool fixed_target = false;
  Eigen::VectorXd target;  ///< D, only used when fixed_target

  bool is_box = true;
  Eigen::VectorXd a, b;  ///< per-sample box on w~ (box path)
  FGenerator gen = FGenerator::kl;
  double budget = 0.0;  ///< f-divergence budget (f path)

  Eigen::Index n() const { return r.size(); }
  Eigen::Index D() const { return psi.cols(); }
  /// Linear-term coefficient vector: column means of psi, or the target.
  Eigen::VectorXd lin_coef() const {
    return fixed_target ? target : Eigen::VectorXd(psi.colwise().mean());
  }
};

struct LossEval {
  double value;
  Eigen::VectorXd grad_eta;  ///< representative subgradient w.r.t. eta
  double w_lo, w_hi;         ///< subgradient interval of f* at v_i
  double grad_eta_f = 0.0;   ///< f path only
};

/// Per-sample dual loss and subgradient at theta.
LossEval dual_loss(const DualParams& theta, Eigen::Index i, const DualProblem& prob);

/// Mean loss over the sample (+inf outside the conjugate domain).
double dual_objective(const DualProblem& prob, const DualParams& theta);

struct SolveOptions {
  double grad_tol = 1e-7;
  int max_iter = 500;
  double ridge = 1e-8;
  int polish_steps = 200;
  double rel_obj_tol = 1e-9;
  bool warm_start = false;
  DualParams init;
};

struct SolveResult {
  DualParams theta;
  double objective;  ///< mean loss at theta
  bool converged = true;
  std::string status = "ok";
};

/// Box path: convex piecewise-linear minimization over eta by IRLS on a
/// Huber-smoothed pinball (smoothing annealed 1e-1 -> 1e-6) followed by
/// subgradient polishing with exact line search.
SolveResult solve_box_dual(const DualProblem& prob, const SolveOptions& opts = {});

/// f path: BFGS over (log eta_f, eta) with Armijo backtracking; domain walls
/// handled by step halving.
SolveResult solve_f_dual(const DualProblem& prob, const SolveOptions& opts = {});

struct PrimalRecovery {
  Eigen::VectorXd w;  ///< recovered w~ per sample
  double tie_fraction = 0.0;
};

/// Primal weights from the conjugate subgradient at the solved theta; box
/// ties are repaired by a least-squares fit of the moment constraints.
PrimalRecovery recover_primal_weights(const DualParams& theta, const DualProblem& prob,
                                      double tie_rel_tol = 1e-6);

/// Linear pinball-loss regression of y on features F at level tau, reusing
/// the box dual machinery.
Eigen::VectorXd quantile_regression(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                                    double tau, const SolveOptions& opts = {});

}  // namespace crisp
