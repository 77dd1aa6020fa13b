#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Eigenvalues>
#include <cmath>
#include <doctest.h>

#include "crisp/dataset.hpp"
#include "crisp/kernels.hpp"
#include "crisp/rng.hpp"

using namespace crisp;

TEST_CASE("gram matrix") {
  Eigen::MatrixXd pts(2, 2);
  pts << 0, 0, 3, 4;  // distance 5
  KernelSpec k;
  k.bandwidth = 2.0;
  Eigen::MatrixXd K = gram_matrix(k, pts);
  CHECK(K(0, 0) == doctest::Approx(1.0));
  CHECK(K(1, 1) == doctest::Approx(1.0));
  CHECK(K(0, 1) == doctest::Approx(std::exp(-25.0 / (2.0 * 4.0))));
  CHECK(K(0, 1) == K(1, 0));

  KernelSpec lin;
  lin.kind = KernelSpec::Kind::linear;
  Eigen::MatrixXd Kl = gram_matrix(lin, pts);
  CHECK(Kl(0, 1) == doctest::Approx(0.0));
  CHECK(Kl(1, 1) == doctest::Approx(25.0));

  KernelSpec poly;
  poly.kind = KernelSpec::Kind::polynomial;
  poly.degree = 2;
  CHECK(gram_matrix(poly, pts)(1, 1) == doctest::Approx(26.0 * 26.0));

  // PSD on random inputs
  RngStream r(4, "gram");
  Eigen::MatrixXd Z(40, 3);
  for (Eigen::Index i = 0; i < Z.size(); ++i) Z(i / 3, i % 3) = r.normal();
  Eigen::MatrixXd Kr = gram_matrix(k, Z);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Kr);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8 * es.eigenvalues().maxCoeff());

  Eigen::MatrixXd bad = pts;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gram_matrix(k, bad), std::invalid_argument);
}

TEST_CASE("median heuristic") {
  Eigen::MatrixXd two(2, 1);
  two << 0, 3;
  CHECK(median_heuristic(two) == doctest::Approx(3.0));

  Eigen::MatrixXd dup = Eigen::MatrixXd::Zero(5, 2);
  CHECK(median_heuristic(dup) == doctest::Approx(1e-12));

  Eigen::MatrixXd grid(3, 1);
  grid << 0, 1, 2;
  CHECK(median_heuristic(grid) == doctest::Approx(1.0));

  Eigen::MatrixXd one(1, 1);
  CHECK_THROWS_AS(median_heuristic(one), std::invalid_argument);
}

TEST_CASE("point encoding") {
  auto [d, tr] = generate_binary_synthetic(10, 1);
  Eigen::MatrixXd Z = encode_points(d);
  CHECK(Z.cols() == 2 + d.dim());
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    CHECK(Z(i, 0) == doctest::Approx(1.0 - d.t[i]));
    CHECK(Z(i, 1) == doctest::Approx(d.t[i]));
    CHECK((Z.row(i).tail(d.dim()) - d.x.row(i)).norm() == 0.0);
  }
  auto [dc, trc] = generate_continuous_synthetic(10, 1);
  Eigen::MatrixXd Zc = encode_points(dc);
  CHECK(Zc.cols() == 1 + dc.dim());
  CHECK(Zc(3, 0) == doctest::Approx(dc.t[3]));
}

TEST_CASE("kpca on a linear kernel recovers the centered coordinate") {
  Dataset d;
  const Eigen::Index n = 50;
  RngStream r(8, "x");
  d.y = Eigen::VectorXd::Zero(n);
  d.t = Eigen::VectorXd::Zero(n);
  d.x.resize(n, 1);
  d.p_obs = Eigen::VectorXd::Constant(n, 0.5);
  for (Eigen::Index i = 0; i < n; ++i) d.x(i, 0) = r.normal() + 2.0;

  KernelSpec lin;
  lin.kind = KernelSpec::Kind::linear;
  ConstraintBasis basis = kpca_basis(lin, d, 1);
  REQUIRE(basis.D() == 1);

  // the encoded points are [1-t, t, x]; t is constant so the only centered
  // direction is x - mean(x)
  Eigen::VectorXd xc = d.x.col(0).array() - d.x.col(0).mean();
  Eigen::VectorXd want = xc / std::sqrt(xc.squaredNorm() / static_cast<double>(n));
  double dot = basis.Psi.col(0).dot(want) / static_cast<double>(n);
  CHECK(std::abs(std::abs(dot) - 1.0) <= 1e-8);
  CHECK(basis.Psi.col(0).squaredNorm() / static_cast<double>(n) ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("kpca orthogonality, extension, nestedness") {
  auto [d, tr] = generate_binary_synthetic(300, 7);
  KernelSpec k;
  k.bandwidth = median_heuristic(encode_points(d));
  ConstraintBasis b8 = kpca_basis(k, d, 8);
  REQUIRE(b8.D() == 8);

  Eigen::MatrixXd G = b8.Psi.transpose() * b8.Psi / static_cast<double>(d.n());
  CHECK((G - Eigen::MatrixXd::Identity(8, 8)).lpNorm<Eigen::Infinity>() <= 1e-6);

  for (Eigen::Index i = 0; i < 20; ++i) {
    Eigen::VectorXd row = b8.extend(d.t[i], d.x.row(i).transpose());
    CHECK((row.transpose() - b8.Psi.row(i)).lpNorm<Eigen::Infinity>() <= 1e-8);
  }

  ConstraintBasis b3 = b8.prefix(3);
  CHECK(b3.D() == 3);
  CHECK((b3.Psi - b8.Psi.leftCols(3)).norm() == 0.0);
  Eigen::VectorXd e3 = b3.extend(d.t[0], d.x.row(0).transpose());
  CHECK(e3.size() == 3);

  // eigenvalues sorted
  for (Eigen::Index j = 1; j < b8.eigvals.size(); ++j)
    CHECK(b8.eigvals[j] <= b8.eigvals[j - 1] + 1e-12);

  // constant column on request
  ConstraintBasis bc = kpca_basis(k, d, 4, true);
  CHECK(bc.includes_constant);
  CHECK((bc.Psi.col(0).array() - bc.Psi(0, 0)).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("kpca rank truncation") {
  // linear kernel on 1-d contexts with constant t: rank <= 2 after centering
  Dataset d;
  const Eigen::Index n = 30;
  RngStream r(3, "x");
  d.y = Eigen::VectorXd::Zero(n);
  d.t = Eigen::VectorXd::Zero(n);
  d.x.resize(n, 1);
  d.p_obs = Eigen::VectorXd::Constant(n, 0.5);
  for (Eigen::Index i = 0; i < n; ++i) d.x(i, 0) = r.normal();
  KernelSpec lin;
  lin.kind = KernelSpec::Kind::linear;
  ConstraintBasis b = kpca_basis(lin, d, 5);
  CHECK(b.effective_D < 5);
  CHECK(b.degenerate);
  CHECK(b.Psi.cols() == b.effective_D);
}

TEST_CASE("quantile feature basis") {
  auto [d, tr] = generate_binary_synthetic(60, 2);
  Policy pol = Policy::logistic(default_eval_beta());

  Eigen::VectorXd qhat(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i)
    qhat[i] = tr.outcome_mean(d.t[i], d.x.row(i).transpose());
  ConstraintBasis b = quantile_feature_basis(pol, d, qhat);
  REQUIRE(b.D() == 1);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    double want = pol.prob(d.t[i], d.x.row(i).transpose()) / d.p_obs[i] * qhat[i];
    CHECK(b.Psi(i, 0) == doctest::Approx(want).epsilon(1e-12));
  }

  ConstraintBasis b2 = quantile_feature_basis(pol, d, Eigen::VectorXd(2.0 * qhat));
  CHECK((b2.Psi - 2.0 * b.Psi).lpNorm<Eigen::Infinity>() <= 1e-12);

  ConstraintBasis bz = quantile_feature_basis(pol, d, Eigen::VectorXd::Zero(d.n()));
  CHECK(bz.degenerate);
}

TEST_CASE("ratio-scaled and arm-linear bases") {
  auto [d, tr] = generate_binary_synthetic(200, 9);
  Policy pol = Policy::logistic(default_eval_beta());
  SyntheticTruth truth = tr;
  auto p_obs_fn = [truth](double t, const Eigen::VectorXd& x) {
    return truth.behavior_density(t, x);
  };

  ConstraintBasis arm = arm_linear_basis(pol, d, p_obs_fn);
  CHECK(arm.D() == 2 * (1 + d.dim()));
  for (Eigen::Index j = 0; j < arm.D(); ++j)
    CHECK(arm.Psi.col(j).squaredNorm() / static_cast<double>(d.n()) ==
          doctest::Approx(1.0).epsilon(1e-10));
  for (Eigen::Index i = 0; i < 20; ++i) {
    Eigen::VectorXd row = arm.extend(d.t[i], d.x.row(i).transpose());
    CHECK((row.transpose() - arm.Psi.row(i)).lpNorm<Eigen::Infinity>() <= 1e-10);
  }

  KernelSpec k;
  k.bandwidth = median_heuristic(encode_points(d));
  ConstraintBasis base = kpca_basis(k, d, 4);
  ConstraintBasis scaled = ratio_scaled_basis(pol, d, base, p_obs_fn);
  Eigen::VectorXd ratio(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i)
    ratio[i] = pol.prob(d.t[i], d.x.row(i).transpose()) / d.p_obs[i];
  for (Eigen::Index j = 0; j < 4; ++j) {
    Eigen::VectorXd raw = base.Psi.col(j).cwiseProduct(ratio);
    Eigen::VectorXd want = raw / std::sqrt(raw.squaredNorm() / static_cast<double>(d.n()));
    CHECK((scaled.Psi.col(j) - want).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
  for (Eigen::Index i = 0; i < 10; ++i) {
    Eigen::VectorXd row = scaled.extend(d.t[i], d.x.row(i).transpose());
    CHECK((row.transpose() - scaled.Psi.row(i)).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}
