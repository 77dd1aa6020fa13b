#include "crisp/estimators.hpp"

#include <Eigen/QR>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "crisp/rng.hpp"
#include "crisp/stats.hpp"

namespace crisp {

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

double moment_residual(const DualProblem& prob, const Eigen::VectorXd& w) {
  Eigen::VectorXd tgt = prob.fixed_target
                            ? prob.target
                            : Eigen::VectorXd(prob.psi.colwise().mean());
  return (prob.psi.transpose() * w / static_cast<double>(prob.n()) - tgt).norm();
}

void fill_box(DualProblem& prob, const SensitivityModel& model, const Dataset& d) {
  const Eigen::Index n = d.n();
  prob.a.resize(n);
  prob.b.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [a, b] = box_bounds(model.box_kind, model.gamma_box, d.p_obs[i]);
    prob.a[i] = a;
    prob.b[i] = b;
  }
}
}  // namespace

std::string BoundReport::csv_header() {
  return "estimator,model,param,direction,value,residual,tie_fraction,status,"
         "ci_lo,ci_hi,ci_lo_corrected,ci_hi_corrected,gic";
}

std::string BoundReport::csv_row() const {
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  return estimator + "," + model_desc + "," + fmt(param) + "," +
         (direction == Direction::lower ? "lower" : "upper") + "," + fmt(value) +
         "," + fmt(constraint_residual) + "," + fmt(tie_fraction) + "," +
         solver_status + "," + opt(ci_lo) + "," + opt(ci_hi) + "," +
         opt(ci_lo_corrected) + "," + opt(ci_hi_corrected) + "," + opt(gic_value);
}

Eigen::VectorXd reparametrized_rewards(const Dataset& d, const Policy& policy) {
  if (!d.has_propensity) throw std::invalid_argument("missing p_obs");
  Eigen::VectorXd r(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i)
    r[i] = policy.prob(d.t[i], d.x.row(i)) / d.p_obs[i] * d.y[i];
  return r;
}

double ipw(const Dataset& d, const Policy& policy) {
  return reparametrized_rewards(d, policy).mean();
}

double hajek(const Dataset& d, const Policy& policy) {
  if (!d.has_propensity) throw std::invalid_argument("missing p_obs");
  double num = 0, den = 0;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    double ratio = policy.prob(d.t[i], d.x.row(i)) / d.p_obs[i];
    num += ratio * d.y[i];
    den += ratio;
  }
  return num / den;
}

BoundReport kcmc_bound(const Dataset& d, const Policy& policy,
                       const SensitivityModel& model, const ConstraintBasis& basis,
                       Direction dir, const SolveOptions& opts) {
  if (basis.Psi.rows() != d.n())
    throw std::invalid_argument("kcmc_bound: basis/sample size mismatch");
  DualProblem prob;
  prob.r = reparametrized_rewards(d, policy);
  if (dir == Direction::upper) prob.r = -prob.r;
  prob.psi = basis.Psi;
  if (model.type == SensitivityModel::Type::fdiv && model.add_mean_one_constraint &&
      !basis.includes_constant) {
    Eigen::MatrixXd P(d.n(), basis.Psi.cols() + 1);
    P.col(0).setOnes();
    P.rightCols(basis.Psi.cols()) = basis.Psi;
    prob.psi = std::move(P);
  }

  SolveResult sol;
  if (model.type == SensitivityModel::Type::box) {
    prob.is_box = true;
    fill_box(prob, model, d);
    sol = solve_box_dual(prob, opts);
  } else {
    prob.is_box = false;
    prob.gen = model.gen;
    prob.budget = model.budget;
    if (model.budget <= 0.0 &&
        (model.add_mean_one_constraint || basis.includes_constant)) {
      // zero budget with E[w]=1 pins the feasible set to {w = 1}; the dual
      // only reaches it as eta_f diverges, so report the singleton directly
      BoundReport rep;
      rep.estimator = "kcmc";
      rep.direction = dir;
      rep.model_desc = model.describe();
      rep.param = 0.0;
      rep.basis_desc = basis.desc;
      rep.dual.eta_f = 1.0;
      rep.dual.eta = Eigen::VectorXd::Zero(prob.D());
      rep.weights = Eigen::VectorXd::Ones(d.n());
      rep.solver_status = "ok;zero-budget";
      rep.constraint_residual = moment_residual(prob, rep.weights);
      double v0 = prob.r.mean();
      rep.value = dir == Direction::lower ? v0 : -v0;
      rep.dual_objective = -v0;
      rep.problem = std::move(prob);
      return rep;
    }
    sol = solve_f_dual(prob, opts);
  }
  PrimalRecovery rec = recover_primal_weights(sol.theta, prob);

  BoundReport rep;
  rep.estimator = "kcmc";
  rep.direction = dir;
  rep.model_desc = model.describe();
  rep.param = model.type == SensitivityModel::Type::box ? model.gamma_box : model.budget;
  rep.basis_desc = basis.desc;
  rep.dual = sol.theta;
  rep.weights = rec.w;
  rep.tie_fraction = rec.tie_fraction;
  rep.solver_status = sol.status;
  rep.converged = sol.converged;
  rep.constraint_residual = moment_residual(prob, rec.w);
  // the dual objective is the bound: exact at the optimum, conservative at
  // any feasible stop, and free of primal tie-repair error
  rep.value = dir == Direction::lower ? -sol.objective : sol.objective;
  rep.dual_objective = sol.objective;
  rep.problem = std::move(prob);
  return rep;
}

BoundReport zsb_bound(const Dataset& d, const Policy& policy, BoxKind kind,
                      double gamma, Direction dir, const SolveOptions& opts) {
  if (d.action_kind != ActionKind::binary)
    throw std::invalid_argument("zsb_bound: binary actions required");
  const Eigen::Index n = d.n();
  const double dn = static_cast<double>(n);
  DualProblem prob;
  prob.r = reparametrized_rewards(d, policy);
  if (dir == Direction::upper) prob.r = -prob.r;
  prob.is_box = true;
  prob.fixed_target = true;
  prob.psi.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    prob.psi(i, 0) = d.t[i] < 0.5 ? 1.0 / d.p_obs[i] : 0.0;
    prob.psi(i, 1) = d.t[i] > 0.5 ? 1.0 / d.p_obs[i] : 0.0;
  }
  prob.target = Eigen::VectorXd::Ones(2);
  prob.a.resize(n);
  prob.b.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [a, b] = box_bounds(kind, gamma, d.p_obs[i]);
    prob.a[i] = a;
    prob.b[i] = b;
  }

  // phase 1: projected gradient on ||A w - c||^2 finds the (near-)feasible
  // face; the dual then runs against the achievable target
  Eigen::MatrixXd A = prob.psi.transpose() / dn;  // 2 x n
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n).cwiseMax(prob.a).cwiseMin(prob.b);
  double L = (A * A.transpose()).trace();
  if (L > 0) {
    double step = 1.0 / L;
    for (int it = 0; it < 500; ++it) {
      Eigen::VectorXd grad = A.transpose() * (A * w - prob.target);
      w = (w - step * grad).cwiseMax(prob.a).cwiseMin(prob.b);
    }
  }
  Eigen::VectorXd achievable = A * w;
  double slack = (achievable - prob.target).lpNorm<Eigen::Infinity>();
  if (slack > 1e-10) prob.target = achievable;

  SolveResult sol = solve_box_dual(prob, opts);
  PrimalRecovery rec = recover_primal_weights(sol.theta, prob);

  BoundReport rep;
  rep.estimator = "zsb";
  rep.direction = dir;
  rep.model_desc = (kind == BoxKind::tan_msm ? "tan:" : "ratio:") + fmt(gamma);
  rep.param = gamma;
  rep.basis_desc = "per-treatment";
  rep.dual = sol.theta;
  rep.weights = rec.w;
  rep.tie_fraction = rec.tie_fraction;
  rep.solver_status = slack > 1e-10 ? sol.status + ";slack-face" : sol.status;
  rep.converged = sol.converged;
  rep.slack = slack;
  rep.constraint_residual = moment_residual(prob, rec.w);
  rep.value = dir == Direction::lower ? -sol.objective : sol.objective;
  rep.dual_objective = sol.objective;
  rep.problem = std::move(prob);
  return rep;
}

BoundReport qb_bound(const Dataset& d, const Policy& policy, double gamma,
                     const ConstraintBasis& features, Direction dir,
                     const SolveOptions& opts) {
  if (gamma < 1.0) throw std::invalid_argument("qb_bound: gamma must be >= 1");
  const Eigen::Index n = d.n();
  const double tau = 1.0 / (1.0 + gamma);

  Eigen::VectorXd ratio(n);
  for (Eigen::Index i = 0; i < n; ++i)
    ratio[i] = policy.prob(d.t[i], d.x.row(i)) / d.p_obs[i];

  Eigen::VectorXd y_work = dir == Direction::lower ? d.y : Eigen::VectorXd(-d.y);
  // stage 1: pinball regression of Y on features/(pi/p); then (pi/p) * Qhat
  // lies in the span of the matched KCMC features
  Eigen::MatrixXd F = features.Psi;
  for (Eigen::Index i = 0; i < n; ++i) F.row(i) /= ratio[i];
  Eigen::VectorXd beta = quantile_regression(F, y_work, tau, opts);

  DualProblem prob;
  prob.r = ratio.cwiseProduct(y_work);
  prob.psi = features.Psi * beta;  // single balancing column
  prob.is_box = true;
  SensitivityModel box_model;
  box_model.type = SensitivityModel::Type::box;
  box_model.box_kind = BoxKind::tan_msm;
  box_model.gamma_box = gamma;
  fill_box(prob, box_model, d);

  SolveResult sol = solve_box_dual(prob, opts);
  PrimalRecovery rec = recover_primal_weights(sol.theta, prob);

  BoundReport rep;
  rep.estimator = "qb";
  rep.direction = dir;
  rep.model_desc = "tan:" + fmt(gamma);
  rep.param = gamma;
  rep.basis_desc = "quantile-balance(" + features.desc + ")";
  rep.dual = sol.theta;
  rep.weights = rec.w;
  rep.tie_fraction = rec.tie_fraction;
  rep.solver_status = sol.status;
  rep.converged = sol.converged;
  rep.constraint_residual = moment_residual(prob, rec.w);
  rep.value = dir == Direction::lower ? -sol.objective : sol.objective;
  rep.dual_objective = sol.objective;
  rep.problem = std::move(prob);
  return rep;
}

double specification_residual(const SyntheticTruth& truth, const Policy& policy,
                              double gamma, const ConstraintBasis& basis,
                              Eigen::Index n_grid, std::uint64_t seed, Direction dir) {
  if (truth.kind != ActionKind::binary)
    throw std::invalid_argument("specification_residual: binary truth required");
  if (!basis.extend)
    throw std::invalid_argument("specification_residual: basis lacks out-of-sample extension");
  RngStream sx(seed, "spec_x"), st(seed, "spec_t");
  const Eigen::Index p = truth.mu_x.size();
  Eigen::VectorXd target(n_grid);
  Eigen::MatrixXd Psi;
  Eigen::VectorXd xi(p);
  for (Eigen::Index i = 0; i < n_grid; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) xi[j] = truth.mu_x[j] + sx.normal();
    double e1 = truth.propensity1(xi);
    double t = st.bernoulli(e1) ? 1.0 : 0.0;
    double pobs = t > 0.5 ? e1 : 1.0 - e1;
    auto [a, b] = box_bounds(BoxKind::tan_msm, gamma, pobs);
    double tau = b - a > 1e-14
                     ? (dir == Direction::lower ? (1.0 - a) / (b - a) : (b - 1.0) / (b - a))
                     : 0.5;
    double q = truth.outcome_mean(t, xi) + truth.outcome_sd * norm_quantile(tau);
    target[i] = policy.prob(t, xi) / pobs * q;
    Eigen::VectorXd row = basis.extend(t, xi);
    if (i == 0) Psi.resize(n_grid, row.size());
    Psi.row(i) = row;
  }
  Eigen::VectorXd beta =
      Psi.colPivHouseholderQr().solve(target);
  return std::sqrt((Psi * beta - target).squaredNorm() / static_cast<double>(n_grid));
}

}  // namespace crisp
