#pragma once
#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>

#include "crisp/policy.hpp"

namespace crisp {

enum class ActionKind { binary, continuous };
enum class Direction { lower, upper };

struct Dataset {
  Eigen::VectorXd y;      ///< rewards
  Eigen::VectorXd t;      ///< actions (0/1 labels or real scalars)
  Eigen::MatrixXd x;      ///< contexts, n x p
  Eigen::VectorXd p_obs;  ///< behavior propensity of the observed action
  ActionKind action_kind = ActionKind::binary;
  bool has_propensity = true;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index dim() const { return x.cols(); }
  void validate() const;  ///< throws std::invalid_argument on inconsistency
};

/// Parameters of the synthetic generating process; enough to evaluate
/// conditional outcome moments and the true behavior propensity.
struct SyntheticTruth {
  Eigen::VectorXd mu_x;
  Eigen::VectorXd beta_x0, beta_x1;
  double intercept0 = 2.5, intercept1 = 0.5;
  Eigen::VectorXd beta_t;
  double outcome_sd = 1.0;
  ActionKind kind = ActionKind::binary;

  double outcome_mean(double t, const Eigen::VectorXd& x) const {
    return t > 0.5 ? beta_x1.dot(x) + intercept1 : beta_x0.dot(x) + intercept0;
  }
  /// P(T=1|x) for the binary process; mean of T|x for the continuous one.
  double propensity1(const Eigen::VectorXd& x) const;
  /// Density/mass of observed action t at context x under the behavior policy.
  double behavior_density(double t, const Eigen::VectorXd& x) const;
};

std::pair<Dataset, SyntheticTruth> generate_binary_synthetic(Eigen::Index n, std::uint64_t seed);
std::pair<Dataset, SyntheticTruth> generate_continuous_synthetic(Eigen::Index n, std::uint64_t seed);

/// CSV with header "y,t,x0,...,x{p-1}[,p_obs]"; parse errors cite 1-based rows.
Dataset load_csv(const std::string& path, ActionKind kind = ActionKind::binary);
void save_csv(const Dataset& d, const std::string& path);

/// Logistic regression of T on (1, X) by Newton/IRLS; returns a copy of d with
/// p_obs set to the fitted probability of the observed action, floored at 1e-6.
/// Falls back to ridge 1e-6 under separation (warning flag via `ridged`).
Dataset fit_propensity_logistic(const Dataset& d, bool* ridged = nullptr);

/// Monte-Carlo oracle for the sharp Tan-box bound on the binary synthetic
/// process: contexts sampled, actions and the Gaussian inner expectation
/// integrated in closed form.
double true_sharp_bound_mc(const SyntheticTruth& truth, const Policy& policy,
                           double gamma, Direction dir, Eigen::Index n_mc,
                           std::uint64_t seed);

/// The paper-matched evaluation policy beta for the 5-d synthetic contexts.
Eigen::VectorXd default_eval_beta();

}  // namespace crisp
