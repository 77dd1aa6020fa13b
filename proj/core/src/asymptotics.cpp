#include "crisp/asymptotics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "crisp/rng.hpp"
#include "crisp/stats.hpp"

namespace crisp {

double SandwichEstimates::trace_term() const {
  Eigen::MatrixXd V = Vhat;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    V.diagonal().array() += 1e-8 * (V.trace() / static_cast<double>(V.rows()) + 1e-30);
    ldlt.compute(V);
  }
  return ldlt.solve(Jhat).trace();
}

SandwichEstimates sandwich(const DualProblem& prob, const DualParams& theta,
                           const Eigen::MatrixXd& points, const KdeOptions& kde) {
  const Eigen::Index n = prob.n(), D = prob.D();
  const double dn = static_cast<double>(n);
  const Eigen::Index dim = prob.is_box ? D : D + 1;

  SandwichEstimates s;
  s.n = n;
  s.Jhat = Eigen::MatrixXd::Zero(dim, dim);
  s.Vhat = Eigen::MatrixXd::Zero(dim, dim);

  double lm = 0, lm2 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    LossEval e = dual_loss(theta, i, prob);
    lm += e.value;
    lm2 += e.value * e.value;
    Eigen::VectorXd g(dim);
    if (prob.is_box) {
      g = e.grad_eta;
    } else {
      g[0] = e.grad_eta_f;
      g.tail(D) = e.grad_eta;
    }
    s.Jhat += g * g.transpose();
  }
  s.Jhat /= dn;
  s.loss_mean = lm / dn;
  s.loss_var = n > 1 ? (lm2 - lm * lm / dn) / (dn - 1.0) : 0.0;

  if (prob.is_box) {
    // V = mean psi psi^T (b-a) p_r(eta^T psi | t,x), the conditional density
    // estimated by Gaussian KDE over a kNN window in the encoded (t,x) space
    if ((prob.b - prob.a).lpNorm<Eigen::Infinity>() < 1e-14) {
      s.degenerate = true;
      return s;
    }
    if (points.rows() != n)
      throw std::invalid_argument("sandwich: encoded points required on the box path");
    Eigen::VectorXd resid = prob.r - prob.psi * theta.eta;  // density of r at h == density of resid at 0
    const int k = std::min<int>(kde.knn, static_cast<int>(n));
    std::vector<double> d2(static_cast<size_t>(n));
    std::vector<int> idx(static_cast<size_t>(n));
    std::vector<double> window(static_cast<size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j)
        d2[static_cast<size_t>(j)] = (points.row(i) - points.row(j)).squaredNorm();
      std::iota(idx.begin(), idx.end(), 0);
      std::nth_element(idx.begin(), idx.begin() + k, idx.end(),
                       [&](int a, int b) { return d2[static_cast<size_t>(a)] < d2[static_cast<size_t>(b)]; });
      double mean = 0;
      for (int j = 0; j < k; ++j) {
        window[static_cast<size_t>(j)] = resid[idx[static_cast<size_t>(j)]];
        mean += window[static_cast<size_t>(j)];
      }
      mean /= k;
      double var = 0;
      for (int j = 0; j < k; ++j) {
        double c = window[static_cast<size_t>(j)] - mean;
        var += c * c;
      }
      var /= std::max(1, k - 1);
      double bw = kde.bandwidth > 0
                      ? kde.bandwidth
                      : 1.06 * std::max(std::sqrt(var), 1e-6) * std::pow(double(k), -0.2);
      double dens = 0;
      for (int j = 0; j < k; ++j) dens += norm_pdf(window[static_cast<size_t>(j)] / bw);
      dens /= k * bw;
      s.Vhat += (prob.b[i] - prob.a[i]) * dens *
                (prob.psi.row(i).transpose() * prob.psi.row(i));
    }
    s.Vhat /= dn;
  } else {
    // analytic second derivatives of the f-path loss in (eta_f, eta)
    const double ef = theta.eta_f;
    Eigen::VectorXd v = (prob.psi * theta.eta - prob.r) / ef;
    for (Eigen::Index i = 0; i < n; ++i) {
      double h2 = f_conjugate_hess(prob.gen, v[i]);
      if (!std::isfinite(h2)) continue;
      Eigen::VectorXd psi_i = prob.psi.row(i);
      s.Vhat(0, 0) += v[i] * v[i] * h2 / ef;
      s.Vhat.block(1, 0, D, 1) += -psi_i * v[i] * h2 / ef;
      s.Vhat.block(0, 1, 1, D) += (-psi_i * v[i] * h2 / ef).transpose();
      s.Vhat.block(1, 1, D, D) += psi_i * psi_i.transpose() * h2 / ef;
    }
    s.Vhat /= dn;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.Vhat);
  double lmax = eig.eigenvalues().cwiseAbs().maxCoeff();
  double lmin = eig.eigenvalues().cwiseAbs().minCoeff();
  s.condition = lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(lmax, 1e-30)) {
    s.Vhat.diagonal().array() += 1e-8 * (s.Vhat.trace() / static_cast<double>(dim) + 1e-30);
    s.ridged = true;
  }
  return s;
}

void attach_confidence_interval(BoundReport& rep, const SandwichEstimates& s, double alpha) {
  if (!(alpha > 0 && alpha < 1))
    throw std::invalid_argument("attach_confidence_interval: alpha in (0,1)");
  double half = std::sqrt(std::max(s.loss_var, 0.0) / static_cast<double>(s.n)) *
                norm_quantile(1.0 - alpha / 2.0);
  double shift = s.trace_term() / (2.0 * static_cast<double>(s.n));
  if (rep.direction == Direction::lower) {
    double center = -s.loss_mean;
    rep.ci_lo = center - half;
    rep.ci_hi = center + half;
    rep.ci_lo_corrected = center - shift - half;
    rep.ci_hi_corrected = center - shift + half;
  } else {
    // the stored problem is the negated lower run; its loss mean is the upper value
    double center = s.loss_mean;
    rep.ci_lo = center - half;
    rep.ci_hi = center + half;
    rep.ci_lo_corrected = center + shift - half;
    rep.ci_hi_corrected = center + shift + half;
  }
  rep.gic_value = gic(rep, s);
}

double gic(const BoundReport& rep, const SandwichEstimates& s) {
  double shift = s.trace_term() / (2.0 * static_cast<double>(s.n));
  return rep.direction == Direction::lower ? rep.value - shift : rep.value + shift;
}

double cross_validate(const Dataset& d, const Policy& policy,
                      const SensitivityModel& model,
                      const std::function<ConstraintBasis(const Dataset&)>& basis_builder,
                      int folds, std::uint64_t seed, Direction dir,
                      const SolveOptions& opts) {
  if (folds < 2) throw std::invalid_argument("cross_validate: need k >= 2");
  const Eigen::Index n = d.n();
  int k = std::min<int>(folds, static_cast<int>(n));

  std::vector<Eigen::Index> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rs(seed, "fold");
  for (Eigen::Index i = n - 1; i > 0; --i) {
    auto j = static_cast<Eigen::Index>(rs.uniform() * static_cast<double>(i + 1));
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }

  double total_loss = 0;
  Eigen::Index total_count = 0;
  for (int f = 0; f < k; ++f) {
    std::vector<Eigen::Index> test, train;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<int>(i % k) == f) test.push_back(perm[static_cast<size_t>(i)]);
      else train.push_back(perm[static_cast<size_t>(i)]);
    }
    Dataset tr;
    tr.action_kind = d.action_kind;
    tr.has_propensity = d.has_propensity;
    const auto m = static_cast<Eigen::Index>(train.size());
    tr.y.resize(m);
    tr.t.resize(m);
    tr.x.resize(m, d.dim());
    tr.p_obs.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      Eigen::Index src = train[static_cast<size_t>(i)];
      tr.y[i] = d.y[src];
      tr.t[i] = d.t[src];
      tr.x.row(i) = d.x.row(src);
      tr.p_obs[i] = d.p_obs[src];
    }

    ConstraintBasis basis = basis_builder(tr);
    BoundReport rep = kcmc_bound(tr, policy, model, basis, dir, opts);

    // held-out loss through the train-fold basis extension
    bool prepend_const = rep.problem.D() == basis.Psi.cols() + 1;
    for (Eigen::Index src : test) {
      Eigen::VectorXd psi_row = basis.extend ? basis.extend(d.t[src], d.x.row(src))
                                             : Eigen::VectorXd();
      if (!basis.extend)
        throw std::invalid_argument("cross_validate: basis lacks extension");
      DualProblem one;
      one.is_box = rep.problem.is_box;
      one.a.resize(1);
      one.b.resize(1);
      one.gen = rep.problem.gen;
      one.budget = rep.problem.budget;
      double rv = policy.prob(d.t[src], d.x.row(src)) / d.p_obs[src] * d.y[src];
      one.r = Eigen::VectorXd::Constant(1, dir == Direction::lower ? rv : -rv);
      if (one.is_box) {
        auto [a, b] = box_bounds(model.box_kind, model.gamma_box, d.p_obs[src]);
        one.a[0] = a;
        one.b[0] = b;
      }
      Eigen::VectorXd full = psi_row;
      if (prepend_const) {
        full.resize(psi_row.size() + 1);
        full[0] = 1.0;
        full.tail(psi_row.size()) = psi_row;
      }
      one.psi = full.transpose();
      LossEval e = dual_loss(rep.dual, 0, one);
      total_loss += e.value;
      ++total_count;
    }
  }
  double mean_loss = total_loss / static_cast<double>(total_count);
  return dir == Direction::lower ? -mean_loss : mean_loss;
}

}  // namespace crisp
