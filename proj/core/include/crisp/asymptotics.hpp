#pragma once
#include <functional>

#include "crisp/estimators.hpp"

namespace crisp {

/// Score covariance J and Hessian V of the dual loss at the solved theta.
/// Box path: theta is D-dimensional (eta only); f path: D+1 with eta_f first.
struct SandwichEstimates {
  Eigen::MatrixXd Vhat, Jhat;
  double loss_mean = 0.0, loss_var = 0.0;
  Eigen::Index n = 0;
  bool ridged = false;
  bool degenerate = false;
  double condition = 0.0;

  /// tr(Vhat^{-1} Jhat), the second-order bias scale.
  double trace_term() const;
};

struct KdeOptions {
  int knn = 50;          ///< nearest-neighbor window in (t,x) space
  double bandwidth = 0;  ///< 0 = Silverman rule on windowed residuals
};

/// Sandwich pieces at theta.  `points` are the encoded (t,x) rows used for
/// the conditional-density window on the box path (may be empty on f path).
SandwichEstimates sandwich(const DualProblem& prob, const DualParams& theta,
                           const Eigen::MatrixXd& points, const KdeOptions& kde = {});

/// Fills ci_lo/ci_hi and the corrected variants on the report; corrected
/// centers are shifted by the second-order bias term (pessimistic direction).
void attach_confidence_interval(BoundReport& rep, const SandwichEstimates& s,
                                double alpha);

/// Bias-corrected bound value: value -/+ tr(V^{-1}J)/(2n) for lower/upper.
double gic(const BoundReport& rep, const SandwichEstimates& s);

/// k-fold cross-validated bound: dual fit on train folds, mean dual loss on
/// held-out samples (evaluated through the train-fold basis extension);
/// returns minus the average held-out loss.
double cross_validate(const Dataset& d, const Policy& policy,
                      const SensitivityModel& model,
                      const std::function<ConstraintBasis(const Dataset&)>& basis_builder,
                      int folds, std::uint64_t seed,
                      Direction dir = Direction::lower,
                      const SolveOptions& opts = {});

}  // namespace crisp
