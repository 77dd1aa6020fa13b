#include "crisp/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace crisp {

double KernelSpec::operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  switch (kind) {
    case Kind::gaussian_rbf: {
      double d2 = (a - b).squaredNorm();
      return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
    }
    case Kind::linear:
      return a.dot(b);
    case Kind::polynomial:
      return std::pow(1.0 + a.dot(b), degree);
  }
  return 0.0;
}

Eigen::MatrixXd encode_points(const Dataset& d) {
  const Eigen::Index n = d.n(), p = d.dim();
  if (d.action_kind == ActionKind::binary) {
    Eigen::MatrixXd Z(n, p + 2);
    Z.col(0) = Eigen::VectorXd::Ones(n) - d.t;
    Z.col(1) = d.t;
    Z.rightCols(p) = d.x;
    return Z;
  }
  Eigen::MatrixXd Z(n, p + 1);
  Z.col(0) = d.t;
  Z.rightCols(p) = d.x;
  return Z;
}

Eigen::VectorXd encode_point(double t, const Eigen::VectorXd& x, ActionKind kind) {
  if (kind == ActionKind::binary) {
    Eigen::VectorXd z(x.size() + 2);
    z[0] = 1.0 - t;
    z[1] = t;
    z.tail(x.size()) = x;
    return z;
  }
  Eigen::VectorXd z(x.size() + 1);
  z[0] = t;
  z.tail(x.size()) = x;
  return z;
}

Eigen::MatrixXd gram_matrix(const KernelSpec& k, const Eigen::MatrixXd& points) {
  if (!points.allFinite())
    throw std::invalid_argument("gram_matrix: non-finite input");
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double v = k(points.row(i), points.row(j));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

double median_heuristic(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw std::invalid_argument("median_heuristic: need at least 2 points");
  Eigen::Index m = std::min<Eigen::Index>(n, 2000);
  std::vector<double> dists;
  dists.reserve(static_cast<size_t>(m * (m - 1) / 2));
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index ii = i * n / m;
    for (Eigen::Index j = 0; j < i; ++j) {
      Eigen::Index jj = j * n / m;
      dists.push_back((points.row(ii) - points.row(jj)).norm());
    }
  }
  auto mid = dists.begin() + static_cast<long>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return std::max(*mid, 1e-12);
}

ConstraintBasis ConstraintBasis::prefix(Eigen::Index d_prime) const {
  if (d_prime > D()) throw std::invalid_argument("ConstraintBasis::prefix: too many columns");
  ConstraintBasis out = *this;
  out.Psi = Psi.leftCols(d_prime).eval();
  Eigen::Index spectral = d_prime - (includes_constant ? 1 : 0);
  if (eigvals.size() > 0 && spectral >= 0)
    out.eigvals = eigvals.head(std::min<Eigen::Index>(spectral, eigvals.size())).eval();
  out.effective_D = static_cast<int>(d_prime);
  if (extend) {
    auto base = extend;
    out.extend = [base, d_prime](double t, const Eigen::VectorXd& x) {
      return base(t, x).head(d_prime).eval();
    };
  }
  return out;
}

ConstraintBasis kpca_basis(const KernelSpec& k, const Dataset& d, Eigen::Index D,
                           bool include_constant) {
  const Eigen::Index n = d.n();
  if (D < 1 || D > n) throw std::invalid_argument("kpca_basis: need 1 <= D <= n");
  Eigen::MatrixXd Z = encode_points(d);
  const Eigen::Index m = n > 4000 ? 2000 : n;
  Eigen::MatrixXd L(m, Z.cols());
  for (Eigen::Index i = 0; i < m; ++i) L.row(i) = Z.row(i * n / m);

  Eigen::MatrixXd K = gram_matrix(k, L);
  Eigen::VectorXd rowmean = K.rowwise().mean();
  double allmean = rowmean.mean();
  Eigen::MatrixXd Kc = K;
  Kc.colwise() -= rowmean;
  Kc.rowwise() -= rowmean.transpose();
  Kc.array() += allmean;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Kc);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("kpca_basis: eigendecomposition failed");

  // eigenvalues ascending; take the top block, truncating tiny/negative ones
  Eigen::Index spectral_D = std::min<Eigen::Index>(D, m);
  double lam1 = eig.eigenvalues()[m - 1];
  std::vector<Eigen::Index> keep;
  for (Eigen::Index d_i = 0; d_i < spectral_D; ++d_i) {
    Eigen::Index idx = m - 1 - d_i;
    double lam = eig.eigenvalues()[idx];
    if (lam < 1e-10 * lam1 || lam <= 0) break;
    keep.push_back(idx);
  }
  const Eigen::Index Deff = static_cast<Eigen::Index>(keep.size());
  if (Deff == 0) throw std::runtime_error("kpca_basis: degenerate Gram spectrum");

  Eigen::MatrixXd U(m, Deff);
  Eigen::VectorXd lam(Deff);
  for (Eigen::Index d_i = 0; d_i < Deff; ++d_i) {
    U.col(d_i) = eig.eigenvectors().col(keep[static_cast<size_t>(d_i)]);
    lam[d_i] = eig.eigenvalues()[keep[static_cast<size_t>(d_i)]];
  }

  // Raw Nystrom feature at z: U^T kc(z) / lambda; equals U rows at landmarks.
  auto raw_at = [k, L, rowmean, allmean, U, lam](const Eigen::VectorXd& z) {
    const Eigen::Index mm = L.rows();
    Eigen::VectorXd kv(mm);
    for (Eigen::Index j = 0; j < mm; ++j) kv[j] = k(L.row(j), z);
    double kvm = kv.mean();
    Eigen::VectorXd kc = kv - rowmean;
    kc.array() += allmean - kvm;
    return (U.transpose() * kc).cwiseQuotient(lam).eval();
  };

  Eigen::MatrixXd raw(n, Deff);
  if (m == n) {
    raw = U;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) raw.row(i) = raw_at(Z.row(i));
  }
  // unit empirical second moment per column over the full sample
  Eigen::VectorXd scale(Deff);
  for (Eigen::Index d_i = 0; d_i < Deff; ++d_i) {
    double ms = raw.col(d_i).squaredNorm() / static_cast<double>(n);
    scale[d_i] = ms > 0 ? 1.0 / std::sqrt(ms) : 0.0;
  }

  ConstraintBasis basis;
  basis.includes_constant = include_constant;
  basis.eigvals = lam;
  basis.desc = "kpca:D=" + std::to_string(Deff + (include_constant ? 1 : 0));
  const Eigen::Index ncols = Deff + (include_constant ? 1 : 0);
  basis.Psi.resize(n, ncols);
  Eigen::Index off = 0;
  if (include_constant) {
    basis.Psi.col(0).setOnes();
    off = 1;
  }
  for (Eigen::Index d_i = 0; d_i < Deff; ++d_i)
    basis.Psi.col(off + d_i) = raw.col(d_i) * scale[d_i];
  basis.effective_D = static_cast<int>(ncols);
  basis.degenerate = Deff < spectral_D;

  ActionKind ak = d.action_kind;
  bool with_const = include_constant;
  basis.extend = [raw_at, scale, with_const, ak](double t, const Eigen::VectorXd& x) {
    Eigen::VectorXd z = encode_point(t, x, ak);
    Eigen::VectorXd e = raw_at(z).cwiseProduct(scale);
    if (!with_const) return e;
    Eigen::VectorXd out(e.size() + 1);
    out[0] = 1.0;
    out.tail(e.size()) = e;
    return out;
  };
  return basis;
}

ConstraintBasis quantile_feature_basis(
    const Policy& policy, const Dataset& d, const Eigen::VectorXd& qhat,
    std::function<double(double, const Eigen::VectorXd&)> qhat_fn,
    std::function<double(double, const Eigen::VectorXd&)> p_obs_fn) {
  if (qhat.size() != d.n())
    throw std::invalid_argument("quantile_feature_basis: qhat size mismatch");
  if (!qhat.allFinite())
    throw std::invalid_argument("quantile_feature_basis: non-finite qhat");
  ConstraintBasis basis;
  basis.Psi.resize(d.n(), 1);
  for (Eigen::Index i = 0; i < d.n(); ++i)
    basis.Psi(i, 0) = policy.prob(d.t[i], d.x.row(i)) / d.p_obs[i] * qhat[i];
  basis.effective_D = 1;
  basis.desc = "quantile-feature";
  basis.degenerate = basis.Psi.col(0).lpNorm<Eigen::Infinity>() < 1e-12;
  if (qhat_fn && p_obs_fn) {
    Policy pol = policy;
    basis.extend = [pol, qhat_fn, p_obs_fn](double t, const Eigen::VectorXd& x) {
      Eigen::VectorXd v(1);
      v[0] = pol.prob(t, x) / p_obs_fn(t, x) * qhat_fn(t, x);
      return v;
    };
  }
  return basis;
}

namespace {
// Rescale each column to unit empirical second moment; returns the scale
// factors applied so extensions can match.
Eigen::VectorXd normalize_columns(Eigen::MatrixXd& Psi) {
  const double dn = static_cast<double>(Psi.rows());
  Eigen::VectorXd scale(Psi.cols());
  for (Eigen::Index j = 0; j < Psi.cols(); ++j) {
    double m2 = Psi.col(j).squaredNorm() / dn;
    scale[j] = m2 > 1e-24 ? 1.0 / std::sqrt(m2) : 1.0;
    Psi.col(j) *= scale[j];
  }
  return scale;
}
}  // namespace

ConstraintBasis ratio_scaled_basis(
    const Policy& policy, const Dataset& d, const ConstraintBasis& base,
    std::function<double(double, const Eigen::VectorXd&)> p_obs_fn) {
  if (base.Psi.rows() != d.n())
    throw std::invalid_argument("ratio_scaled_basis: basis/sample size mismatch");
  ConstraintBasis out = base;
  for (Eigen::Index i = 0; i < d.n(); ++i)
    out.Psi.row(i) *= policy.prob(d.t[i], d.x.row(i)) / d.p_obs[i];
  Eigen::VectorXd scale = normalize_columns(out.Psi);
  out.desc = "ratio*" + base.desc;
  if (base.extend && p_obs_fn) {
    Policy pol = policy;
    auto inner = base.extend;
    out.extend = [pol, inner, p_obs_fn, scale](double t, const Eigen::VectorXd& x) {
      Eigen::VectorXd v = inner(t, x) * (pol.prob(t, x) / p_obs_fn(t, x));
      return Eigen::VectorXd(v.cwiseProduct(scale));
    };
  } else {
    out.extend = nullptr;
  }
  return out;
}

ConstraintBasis arm_linear_basis(
    const Policy& policy, const Dataset& d,
    std::function<double(double, const Eigen::VectorXd&)> p_obs_fn) {
  if (d.action_kind != ActionKind::binary)
    throw std::invalid_argument("arm_linear_basis: binary actions required");
  const Eigen::Index n = d.n(), p = d.dim();
  const Eigen::Index D = 2 * (1 + p);
  ConstraintBasis basis;
  basis.Psi.setZero(n, D);
  auto make_row = [p, D](double t, const Eigen::VectorXd& x, double ratio) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(D);
    Eigen::Index off = (t > 0.5 ? 1 : 0) * (1 + p);
    row[off] = ratio;
    row.segment(off + 1, p) = ratio * x.transpose();
    return row;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd xi = d.x.row(i).transpose();
    double ratio = policy.prob(d.t[i], xi) / d.p_obs[i];
    basis.Psi.row(i) = make_row(d.t[i], xi, ratio);
  }
  Eigen::VectorXd scale = normalize_columns(basis.Psi);
  basis.effective_D = static_cast<int>(D);
  basis.desc = "arm-linear";
  if (p_obs_fn) {
    Policy pol = policy;
    basis.extend = [pol, p_obs_fn, scale, make_row](double t, const Eigen::VectorXd& x) {
      Eigen::RowVectorXd row = make_row(t, x, pol.prob(t, x) / p_obs_fn(t, x));
      return Eigen::VectorXd(row.transpose().cwiseProduct(scale));
    };
  }
  return basis;
}

}  // namespace crisp
