#pragma once
#include <vector>

#include "crisp/estimators.hpp"

namespace crisp {

enum class InnerEstimator { kcmc, zsb };

struct LearnResult {
  std::vector<Eigen::VectorXd> param_path;  ///< per-step policy parameters
  std::vector<double> train_curve;          ///< inner lower bound per step
  std::vector<double> test_curve;           ///< only when a test set is given
  Policy policy = Policy::logistic(Eigen::VectorXd::Zero(1));  ///< final policy
  int skipped_steps = 0;
};

struct LearnOptions {
  int steps = 100;
  double learning_rate = 0.05;
  InnerEstimator inner = InnerEstimator::kcmc;
  SolveOptions solver;
};

/// Max-min policy learning: gradient ascent on the lower bound, with the
/// gradient taken at the inner solution (Danskin): mean(w_i/p_i *
/// grad_param pi(T_i|X_i) * Y_i).  Inner duals are warm-started step to step.
LearnResult learn_policy_maxmin(const Dataset& train, const SensitivityModel& model,
                                const ConstraintBasis& basis, const Policy& p0,
                                const LearnOptions& opts = {},
                                const Dataset* test = nullptr,
                                const ConstraintBasis* test_basis = nullptr);

}  // namespace crisp
