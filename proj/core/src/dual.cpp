#include "crisp/dual.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace crisp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double lin_value(const DualProblem& prob, const Eigen::VectorXd& eta) {
  return prob.lin_coef().dot(eta);
}

// True (nonsmooth) box objective: mean f*(v) - lin, v = psi eta - r.
double box_objective(const DualProblem& prob, const Eigen::VectorXd& eta,
                     Eigen::VectorXd* v_out = nullptr) {
  Eigen::VectorXd v = prob.psi * eta - prob.r;
  double s = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    s += v[i] > 0 ? prob.b[i] * v[i] : prob.a[i] * v[i];
  if (v_out) *v_out = std::move(v);
  return s / static_cast<double>(prob.n()) - lin_value(prob, eta);
}

// Representative subgradient of the box objective.
Eigen::VectorXd box_subgrad(const DualProblem& prob, const Eigen::VectorXd& v) {
  const double n = static_cast<double>(prob.n());
  Eigen::VectorXd w(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    w[i] = v[i] > 0 ? prob.b[i] : (v[i] < 0 ? prob.a[i] : 0.5 * (prob.a[i] + prob.b[i]));
  return prob.psi.transpose() * w / n - prob.lin_coef();
}

// Exact minimizing step of the piecewise-linear objective along direction d
// from eta (v already computed there).  Returns 0 when d is not a descent
// direction.
double box_line_search(const DualProblem& prob, const Eigen::VectorXd& v,
                       const Eigen::VectorXd& d) {
  const double n = static_cast<double>(prob.n());
  Eigen::VectorXd dv = prob.psi * d;
  double lind = prob.lin_coef().dot(d);
  // directional derivative at s -> 0+
  double der = -lind;
  std::vector<std::pair<double, double>> bps;  // (s, derivative jump)
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] == 0.0) {
      der += (v[i] > 0 ? prob.b[i] : (v[i] < 0 ? prob.a[i] : 0.0)) * dv[i] / n;
      continue;
    }
    double slope0;
    if (v[i] > 0) slope0 = prob.b[i];
    else if (v[i] < 0) slope0 = prob.a[i];
    else slope0 = dv[i] > 0 ? prob.b[i] : prob.a[i];
    der += slope0 * dv[i] / n;
    double s_cross = -v[i] / dv[i];
    if (s_cross > 0) {
      // crossing flips the slope; the derivative jump is (b-a)|dv|/n >= 0
      bps.emplace_back(s_cross, (prob.b[i] - prob.a[i]) * std::abs(dv[i]) / n);
    }
  }
  if (der >= 0) return 0.0;
  std::sort(bps.begin(), bps.end());
  for (auto& [s, jump] : bps) {
    der += jump;
    if (der >= 0) return s;
  }
  return 0.0;  // unbounded direction; caller treats as failure
}
}  // namespace

LossEval dual_loss(const DualParams& theta, Eigen::Index i, const DualProblem& prob) {
  LossEval out;
  const Eigen::VectorXd psi_i = prob.psi.row(i);
  double h = psi_i.dot(theta.eta);
  Eigen::VectorXd lin = prob.fixed_target ? prob.target : psi_i;
  if (prob.is_box) {
    double v = h - prob.r[i];
    ConjugateValue c = box_conjugate(prob.a[i], prob.b[i], v);
    out.value = -lin.dot(theta.eta) + c.value;
    out.w_lo = c.sub_lo;
    out.w_hi = c.sub_hi;
    double w = 0.5 * (c.sub_lo + c.sub_hi);
    out.grad_eta = psi_i * w - lin;
    out.grad_eta_f = 0.0;
    return out;
  }
  if (!(theta.eta_f > 0)) throw std::invalid_argument("dual_loss: eta_f must be > 0 on the f path");
  double v = (h - prob.r[i]) / theta.eta_f;
  ConjugateValue c = f_conjugate(prob.gen, v);
  if (!std::isfinite(c.value)) {
    out.value = kInf;
    out.w_lo = out.w_hi = kInf;
    out.grad_eta = psi_i;  // any direction increasing v is ascent; descent is its negation
    out.grad_eta_f = -1.0;
    return out;
  }
  out.value = theta.eta_f * prob.budget - lin.dot(theta.eta) + theta.eta_f * c.value;
  double w = 0.5 * (c.sub_lo + c.sub_hi);
  out.w_lo = c.sub_lo;
  out.w_hi = c.sub_hi;
  out.grad_eta = psi_i * w - lin;
  out.grad_eta_f = prob.budget + c.value - v * w;
  return out;
}

double dual_objective(const DualProblem& prob, const DualParams& theta) {
  if (prob.is_box) return box_objective(prob, theta.eta);
  double s = 0;
  Eigen::VectorXd v = (prob.psi * theta.eta - prob.r) / theta.eta_f;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    ConjugateValue c = f_conjugate(prob.gen, v[i]);
    if (!std::isfinite(c.value)) return kInf;
    s += c.value;
  }
  return theta.eta_f * prob.budget - lin_value(prob, theta.eta) +
         theta.eta_f * s / static_cast<double>(prob.n());
}

SolveResult solve_box_dual(const DualProblem& prob, const SolveOptions& opts) {
  if (!prob.is_box) throw std::invalid_argument("solve_box_dual: box model required");
  const Eigen::Index n = prob.n(), D = prob.D();
  const double dn = static_cast<double>(n);
  const Eigen::VectorXd c1 = 0.5 * (prob.a + prob.b);
  const Eigen::VectorXd c2 = 0.5 * (prob.b - prob.a);
  const Eigen::VectorXd lin = prob.lin_coef();

  Eigen::VectorXd eta = (opts.warm_start && opts.init.eta.size() == D)
                            ? opts.init.eta
                            : Eigen::VectorXd::Zero(D);
  Eigen::VectorXd best_eta = eta;
  double best_obj = box_objective(prob, eta);

  auto smoothed = [&](const Eigen::VectorXd& e, double eps, Eigen::VectorXd* v_out) {
    Eigen::VectorXd v = prob.psi * e - prob.r;
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double av = std::abs(v[i]);
      double hub = av <= eps ? v[i] * v[i] / (2 * eps) : av - 0.5 * eps;
      s += c1[i] * v[i] + c2[i] * hub;
    }
    if (v_out) *v_out = std::move(v);
    return s / dn - lin.dot(e);
  };

  // annealed Huber-IRLS (Newton with backtracking on the smoothed objective)
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    for (int it = 0; it < 50; ++it) {
      Eigen::VectorXd v;
      double fcur = smoothed(eta, eps, &v);
      Eigen::VectorXd w(n), hmask(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double clip = std::clamp(v[i] / eps, -1.0, 1.0);
        w[i] = c1[i] + c2[i] * clip;
        hmask[i] = std::abs(v[i]) <= eps ? c2[i] / eps : 0.0;
      }
      Eigen::VectorXd grad = prob.psi.transpose() * w / dn - lin;
      if (grad.lpNorm<Eigen::Infinity>() <= 1e-12) break;
      Eigen::MatrixXd H = prob.psi.transpose() * hmask.asDiagonal() * prob.psi / dn;
      H.diagonal().array() += opts.ridge;
      Eigen::VectorXd step = -H.ldlt().solve(grad);
      if (!step.allFinite()) break;
      double s = 1.0, gTd = grad.dot(step);
      bool accepted = false;
      for (int bt = 0; bt < 50; ++bt) {
        double ftr = smoothed(eta + s * step, eps, nullptr);
        if (ftr <= fcur + 1e-4 * s * gTd) {
          eta += s * step;
          accepted = true;
          break;
        }
        s *= 0.5;
      }
      if (!accepted) break;
      if (std::abs(s * gTd) <= opts.rel_obj_tol * (std::abs(fcur) + 1e-12)) break;
    }
    double cur = box_objective(prob, eta);
    if (cur < best_obj) {
      best_obj = cur;
      best_eta = eta;
    }
  }

  // polishing on the true piecewise-linear objective
  eta = best_eta;
  bool converged = false;
  for (int it = 0; it < opts.polish_steps; ++it) {
    Eigen::VectorXd v;
    double fcur = box_objective(prob, eta, &v);
    Eigen::VectorXd g = box_subgrad(prob, v);
    double improved = 0;
    double s = box_line_search(prob, v, -g);
    if (s > 0) {
      Eigen::VectorXd cand = eta - s * g;
      double fc = box_objective(prob, cand);
      if (fc < fcur) {
        improved = fcur - fc;
        eta = std::move(cand);
        fcur = fc;
      }
    }
    if (improved <= opts.rel_obj_tol * (std::abs(fcur) + 1e-12)) {
      // cyclic exact coordinate steps to escape a jammed steepest direction
      double coord_gain = 0;
      for (Eigen::Index j = 0; j < D; ++j) {
        Eigen::VectorXd vj;
        double fj = box_objective(prob, eta, &vj);
        for (double sgn : {1.0, -1.0}) {
          Eigen::VectorXd ej = Eigen::VectorXd::Zero(D);
          ej[j] = sgn;
          double sj = box_line_search(prob, vj, ej);
          if (sj > 0) {
            Eigen::VectorXd cand = eta + sj * ej;
            double fc = box_objective(prob, cand);
            if (fc < fj - 1e-15) {
              coord_gain += fj - fc;
              eta = std::move(cand);
              break;
            }
          }
        }
      }
      // the steepest direction can jam against a kink plane the iterate sits
      // on; its projection onto that plane is the surviving descent direction
      double proj_gain = 0;
      for (int pass = 0; pass < 2 * D; ++pass) {
        Eigen::VectorXd vv;
        double f0 = box_objective(prob, eta, &vv);
        Eigen::VectorXd g0 = box_subgrad(prob, vv);
        std::vector<Eigen::Index> tied;
        for (Eigen::Index i = 0; i < n; ++i)
          if (std::abs(vv[i]) <= 1e-10 * (1.0 + std::abs(prob.r[i]))) tied.push_back(i);
        if (tied.empty()) break;

        std::vector<Eigen::VectorXd> dirs;
        auto add_null_proj = [&](const Eigen::MatrixXd& T) {
          Eigen::VectorXd d =
              -g0 + T.completeOrthogonalDecomposition().pseudoInverse() * (T * g0);
          if (d.lpNorm<Eigen::Infinity>() > 1e-14) dirs.push_back(std::move(d));
        };
        if (static_cast<Eigen::Index>(tied.size()) < D) {
          Eigen::MatrixXd T(static_cast<Eigen::Index>(tied.size()), D);
          for (size_t k = 0; k < tied.size(); ++k)
            T.row(static_cast<Eigen::Index>(k)) = prob.psi.row(tied[k]);
          add_null_proj(T);
        }
        for (Eigen::Index i : tied) add_null_proj(prob.psi.row(i));

        bool moved = false;
        for (const Eigen::VectorXd& d0 : dirs) {
          for (double sgn : {1.0, -1.0}) {
            Eigen::VectorXd d = sgn * d0;
            double sp = box_line_search(prob, vv, d);
            if (sp <= 0) continue;
            Eigen::VectorXd cand = eta + sp * d;
            double fc = box_objective(prob, cand);
            if (fc >= f0 - 1e-15) continue;
            proj_gain += f0 - fc;
            eta = std::move(cand);
            moved = true;
            break;
          }
          if (moved) break;
        }
        if (!moved) break;
      }
      if (coord_gain + proj_gain <= opts.rel_obj_tol * (std::abs(fcur) + 1e-12)) {
        converged = true;
        break;
      }
    }
  }
  double fin = box_objective(prob, eta);
  if (fin < best_obj) {
    best_obj = fin;
    best_eta = eta;
  }

  SolveResult res;
  res.theta.eta_f = 0.0;
  res.theta.eta = best_eta;
  res.objective = best_obj;
  res.converged = true;
  res.status = converged ? "ok" : "polish-budget-exhausted";
  return res;
}

SolveResult solve_f_dual(const DualProblem& prob, const SolveOptions& opts) {
  if (prob.is_box) throw std::invalid_argument("solve_f_dual: f-divergence model required");
  const Eigen::Index n = prob.n(), D = prob.D();
  const double dn = static_cast<double>(n);
  const Eigen::VectorXd lin = prob.lin_coef();
  const double wall = f_domain_wall(prob.gen);

  // z = (u, eta), eta_f = exp(u); eps > 0 smooths the total-variation kink at
  // v = -1/2 (smooth max), which quasi-Newton steps otherwise jam against
  auto eval = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad, double eps) -> double {
    double ef = std::exp(z[0]);
    Eigen::VectorXd eta = z.tail(D);
    Eigen::VectorXd v = (prob.psi * eta - prob.r) / ef;
    double sum_f = 0, sum_vw = 0;
    Eigen::VectorXd wv(n);
    const bool smooth_tv = eps > 0 && prob.gen == FGenerator::total_variation;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (v[i] >= wall) return kInf;
      double cv, cw;
      if (smooth_tv) {
        double dvi = v[i] + 0.5, root = std::hypot(dvi, eps);
        cv = 0.5 * (v[i] - 0.5) + 0.5 * root;
        cw = 0.5 + 0.5 * dvi / root;
      } else {
        ConjugateValue c = f_conjugate(prob.gen, v[i]);
        if (!std::isfinite(c.value)) return kInf;
        cv = c.value;
        cw = c.sub_lo;
      }
      sum_f += cv;
      wv[i] = cw;
      sum_vw += v[i] * cw;
    }
    double val = ef * prob.budget - lin.dot(eta) + ef * sum_f / dn;
    if (grad) {
      grad->resize(D + 1);
      (*grad)[0] = ef * (prob.budget + sum_f / dn - sum_vw / dn);
      grad->tail(D) = prob.psi.transpose() * wv / dn - lin;
    }
    return val;
  };

  Eigen::VectorXd z(D + 1);
  if (opts.warm_start && opts.init.eta.size() == D && opts.init.eta_f > 0) {
    z[0] = std::log(opts.init.eta_f);
    z.tail(D) = opts.init.eta;
  } else {
    z.setZero();
  }

  // feasibility repair for walled conjugates: shift along a constant column
  // when available, otherwise scale eta_f up
  if (std::isfinite(wall) && eval(z, nullptr, 0.0) == kInf) {
    double ef = std::exp(z[0]);
    Eigen::VectorXd h = prob.psi * z.tail(D);
    double spread = (prob.r.maxCoeff() - prob.r.minCoeff());
    double margin = std::max(0.1, 0.01 * spread);
    Eigen::Index const_col = -1;
    for (Eigen::Index j = 0; j < D; ++j) {
      double lo = prob.psi.col(j).minCoeff(), hi = prob.psi.col(j).maxCoeff();
      if (hi - lo < 1e-12 && std::abs(hi) > 1e-12) {
        const_col = j;
        break;
      }
    }
    if (const_col >= 0) {
      double k = prob.psi(0, const_col);
      Eigen::VectorXd rest = h - prob.psi.col(const_col) * z[const_col + 1];
      double need = ((wall - margin) * ef + (prob.r - rest).minCoeff()) / k;
      z[const_col + 1] = need;
    } else if (wall > 0) {
      double top = (h - prob.r).maxCoeff();
      if (top >= 0) z[0] = std::log(2.0 * (top + 1.0) / wall);
    }
    if (eval(z, nullptr, 0.0) == kInf) {
      SolveResult res;
      res.theta.eta_f = std::exp(z[0]);
      res.theta.eta = z.tail(D);
      res.objective = kInf;
      res.converged = false;
      res.status = "infeasible-start";
      return res;
    }
  }

  double f = kInf;
  bool converged = false;
  auto bfgs_stage = [&](double eps, int max_iter) {
    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(D + 1, D + 1);
    Eigen::VectorXd g;
    f = eval(z, &g, eps);
    converged = false;
    int stalled = 0;
    for (int it = 0; it < max_iter; ++it) {
      if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
        converged = true;
        break;
      }
      Eigen::VectorXd d = -(Hinv * g);
      double gTd = g.dot(d);
      if (gTd >= 0) {
        Hinv.setIdentity();
        d = -g;
        gTd = g.dot(d);
      }
      double s = 1.0;
      double fnew = kInf;
      Eigen::VectorXd znew;
      for (int bt = 0; bt < 60; ++bt) {
        znew = z + s * d;
        fnew = eval(znew, nullptr, eps);
        if (std::isfinite(fnew) && fnew <= f + 1e-4 * s * gTd) break;
        s *= 0.5;
        fnew = kInf;
      }
      if (!std::isfinite(fnew)) break;
      Eigen::VectorXd gnew;
      eval(znew, &gnew, eps);
      Eigen::VectorXd sv = znew - z, yv = gnew - g;
      double sy = sv.dot(yv);
      if (sy > 1e-12) {
        // BFGS inverse update
        Eigen::VectorXd Hy = Hinv * yv;
        double yHy = yv.dot(Hy);
        Hinv += ((sy + yHy) / (sy * sy)) * (sv * sv.transpose()) -
                (Hy * sv.transpose() + sv * Hy.transpose()) / sy;
      }
      double rel = (f - fnew) / (std::abs(f) + 1e-12);
      z = std::move(znew);
      f = fnew;
      g = std::move(gnew);
      if (rel >= 0 && rel <= 1e-16 && g.lpNorm<Eigen::Infinity>() <= 1e-4) break;
      // a kink pins the iterate with a non-vanishing subgradient; a long
      // run of negligible gains means the objective has stopped moving
      stalled = rel >= 0 && rel <= 1e-14 ? stalled + 1 : 0;
      if (stalled >= 20) {
        converged = true;
        break;
      }
    }
  };

  if (prob.gen == FGenerator::total_variation) {
    // anneal through smoothed kinks before the exact pass; the final stage
    // alone decides the reported objective and status
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6})
      bfgs_stage(eps, std::min(opts.max_iter, 300));
  }
  bfgs_stage(0.0, opts.max_iter);

  SolveResult res;
  res.theta.eta_f = std::exp(z[0]);
  res.theta.eta = z.tail(D);
  res.objective = f;
  res.converged = converged;
  res.status = converged ? "ok" : "max-iterations";
  return res;
}

PrimalRecovery recover_primal_weights(const DualParams& theta, const DualProblem& prob,
                                      double tie_rel_tol) {
  const Eigen::Index n = prob.n(), D = prob.D();
  const double dn = static_cast<double>(n);
  PrimalRecovery out;
  out.w.resize(n);
  if (!prob.is_box) {
    Eigen::VectorXd v = (prob.psi * theta.eta - prob.r) / theta.eta_f;
    for (Eigen::Index i = 0; i < n; ++i) {
      ConjugateValue c = f_conjugate(prob.gen, v[i]);
      out.w[i] = 0.5 * (c.sub_lo + c.sub_hi);
    }
    return out;
  }

  Eigen::VectorXd h = prob.psi * theta.eta;
  Eigen::VectorXd score(n);
  Eigen::Index n_tied = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = h[i] - prob.r[i];
    score[i] = std::abs(v) / (1.0 + std::abs(h[i]) + std::abs(prob.r[i]));
    if (score[i] <= tie_rel_tol) {
      ++n_tied;
      out.w[i] = 0.5 * (prob.a[i] + prob.b[i]);
    } else {
      out.w[i] = v > 0 ? prob.b[i] : prob.a[i];
    }
  }
  out.tie_fraction = static_cast<double>(n_tied) / dn;
  if (D == 0) return out;

  // least-squares repair of the moment constraints over the tied weights;
  // FISTA starts from the current weights so samples move only as far as the
  // constraints require and the objective stays at the dual value
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index i, Eigen::Index j) { return score[i] < score[j]; });
  Eigen::VectorXd tgt = prob.fixed_target
                            ? prob.target
                            : Eigen::VectorXd(prob.psi.colwise().mean());
  const double res_tol = 1e-11 * (1.0 + tgt.lpNorm<Eigen::Infinity>());
  auto residual = [&]() {
    return (prob.psi.transpose() * out.w / dn - tgt).lpNorm<Eigen::Infinity>();
  };

  auto repair = [&](Eigen::Index m) {
    Eigen::MatrixXd A(D, m);
    Eigen::VectorXd am(m), bm(m), u(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      Eigen::Index i = order[static_cast<size_t>(j)];
      A.col(j) = prob.psi.row(i).transpose() / dn;
      am[j] = prob.a[i];
      bm[j] = prob.b[i];
      u[j] = out.w[i];
    }
    Eigen::VectorXd rhs = tgt - prob.psi.transpose() * out.w / dn + A * u;
    double L = A.norm();
    if (L > 0) {
      double step = 1.0 / (L * L);
      Eigen::VectorXd z = u, u_prev = u;
      double tk = 1.0;
      for (int it = 0; it < 5000; ++it) {
        Eigen::VectorXd res = A * z - rhs;
        if (res.lpNorm<Eigen::Infinity>() <= 1e-14) {
          u = z;
          break;
        }
        u = (z - step * (A.transpose() * res)).cwiseMax(am).cwiseMin(bm);
        double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        z = u + ((tk - 1.0) / tn) * (u - u_prev);
        z = z.cwiseMax(am).cwiseMin(bm);
        u_prev = u;
        tk = tn;
      }
    }
    for (Eigen::Index j = 0; j < m; ++j) out.w[order[static_cast<size_t>(j)]] = u[j];
  };

  // escalate the candidate set (by normalized |v| rank) only when the tied
  // samples alone cannot absorb the residual left by an eta solved to finite
  // precision; padded samples barely move, so the value distortion is O(res)
  Eigen::Index m = n_tied;
  for (;;) {
    if (m > 0) repair(m);
    if (residual() <= res_tol || m >= n) break;
    m = std::min<Eigen::Index>(
        n, std::max<Eigen::Index>({m * 4, n_tied, D + 8}));
  }
  return out;
}

Eigen::VectorXd quantile_regression(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                                    double tau, const SolveOptions& opts) {
  if (!(tau > 0 && tau < 1)) throw std::invalid_argument("quantile_regression: tau in (0,1)");
  DualProblem prob;
  prob.r = y;
  prob.psi = F;
  prob.is_box = true;
  prob.a = Eigen::VectorXd::Constant(y.size(), 1.0 - tau);
  prob.b = Eigen::VectorXd::Constant(y.size(), 2.0 - tau);
  return solve_box_dual(prob, opts).theta.eta;
}

}  // namespace crisp
