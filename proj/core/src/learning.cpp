#include "crisp/learning.hpp"

#include <cmath>
#include <stdexcept>

namespace crisp {

namespace {
BoundReport inner_bound(const Dataset& d, const Policy& pol, const SensitivityModel& model,
                        const ConstraintBasis& basis, InnerEstimator inner,
                        const SolveOptions& opts) {
  if (inner == InnerEstimator::zsb) {
    if (model.type != SensitivityModel::Type::box)
      throw std::invalid_argument("learn_policy_maxmin: zsb inner needs a box model");
    return zsb_bound(d, pol, model.box_kind, model.gamma_box, Direction::lower, opts);
  }
  return kcmc_bound(d, pol, model, basis, Direction::lower, opts);
}
}  // namespace

LearnResult learn_policy_maxmin(const Dataset& train, const SensitivityModel& model,
                                const ConstraintBasis& basis, const Policy& p0,
                                const LearnOptions& opts, const Dataset* test,
                                const ConstraintBasis* test_basis) {
  LearnResult res;
  res.policy = p0;
  const Eigen::Index n = train.n();
  SolveOptions solver = opts.solver;

  for (int step = 0; step <= opts.steps; ++step) {
    BoundReport rep;
    try {
      rep = inner_bound(train, res.policy, model, basis, opts.inner, solver);
    } catch (const std::exception&) {
      ++res.skipped_steps;
      continue;
    }
    res.param_path.push_back(res.policy.params());
    res.train_curve.push_back(rep.value);
    if (test && test_basis) {
      BoundReport te = kcmc_bound(*test, res.policy, model, *test_basis,
                                  Direction::lower, opts.solver);
      res.test_curve.push_back(te.value);
    }
    if (step == opts.steps) break;

    // Danskin ascent direction at the inner optimum
    Eigen::VectorXd g = Eigen::VectorXd::Zero(res.policy.param_dim());
    for (Eigen::Index i = 0; i < n; ++i)
      g += rep.weights[i] / train.p_obs[i] *
           res.policy.grad_param(train.t[i], train.x.row(i)) * train.y[i];
    g /= static_cast<double>(n);
    res.policy.set_params(res.policy.params() + opts.learning_rate * g);

    solver.warm_start = true;
    solver.init = rep.dual;
  }
  return res;
}

}  // namespace crisp
