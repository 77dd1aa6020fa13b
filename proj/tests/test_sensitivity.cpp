#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <doctest.h>
#include <limits>

#include "crisp/rng.hpp"
#include "crisp/sensitivity.hpp"

using namespace crisp;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

const FGenerator kGens[6] = {FGenerator::kl,
                             FGenerator::reverse_kl,
                             FGenerator::squared_hellinger,
                             FGenerator::pearson_chi2,
                             FGenerator::neyman_chi2,
                             FGenerator::total_variation};

// v grids kept inside both the conjugate domain and the range where the
// oracle's u_max=50 bracket contains the argmax
std::pair<double, double> oracle_v_range(FGenerator g) {
  switch (g) {
    case FGenerator::kl: return {-3.0, 3.0};
    case FGenerator::reverse_kl: return {-5.0, -0.05};
    case FGenerator::squared_hellinger: return {-3.0, 0.85};
    case FGenerator::pearson_chi2: return {-3.0, 3.0};
    case FGenerator::neyman_chi2: return {-3.0, 0.9};
    case FGenerator::total_variation: return {-1.0, 0.49};
  }
  return {0, 0};
}
}  // namespace

TEST_CASE("box bounds") {
  for (double p : {0.05, 0.3, 0.5, 0.97}) {
    auto [a, b] = box_bounds(BoxKind::tan_msm, 1.0, p);
    CHECK(a == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(b == doctest::Approx(1.0).epsilon(1e-14));
  }
  auto [a2, b2] = box_bounds(BoxKind::tan_msm, 2.0, 0.5);
  CHECK(a2 == doctest::Approx(0.75));
  CHECK(b2 == doctest::Approx(1.5));
  auto [a3, b3] = box_bounds(BoxKind::ratio_box, 3.0, 0.123);
  CHECK(a3 == doctest::Approx(1.0 / 3.0));
  CHECK(b3 == doctest::Approx(3.0));
  CHECK_THROWS_AS(box_bounds(BoxKind::tan_msm, 0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(box_bounds(BoxKind::tan_msm, 2.0, 0.0), std::invalid_argument);

  for (double g : {1.0, 1.5, 2.0, 5.0, 20.0})
    for (double p : {0.01, 0.2, 0.5, 0.8, 1.0}) {
      auto [a, b] = box_bounds(BoxKind::tan_msm, g, p);
      CHECK(a <= 1.0 + 1e-12);
      CHECK(b >= 1.0 - 1e-12);
      CHECK(a >= 0.0);
    }
}

TEST_CASE("box conjugate") {
  ConjugateValue c0 = box_conjugate(0.75, 1.5, 0.0);
  CHECK(c0.value == 0.0);
  CHECK(c0.sub_lo == doctest::Approx(0.75));
  CHECK(c0.sub_hi == doctest::Approx(1.5));
  CHECK(box_conjugate(0.75, 1.5, 2.0).value == doctest::Approx(3.0));
  CHECK(box_conjugate(0.75, 1.5, 2.0).sub_lo == doctest::Approx(1.5));
  CHECK(box_conjugate(0.75, 1.5, -1.0).value == doctest::Approx(-0.75));
  CHECK(box_conjugate(0.75, 1.5, -1.0).sub_hi == doctest::Approx(0.75));
}

TEST_CASE("box conjugate matches oracle on a grid") {
  double a = 0.6, b = 1.8;
  auto f_box = [&](double u) { return (u >= a && u <= b) ? 0.0 : kInf; };
  for (int k = 0; k < 200; ++k) {
    double v = -4.0 + 8.0 * k / 199.0;
    ConjugateOracleResult o = oracle_conjugate(f_box, v, 10.0);
    CHECK(box_conjugate(a, b, v).value == doctest::Approx(o.value).epsilon(1e-6));
  }
}

TEST_CASE("closed-form conjugate examples") {
  CHECK(f_conjugate(FGenerator::kl, 1.0).value == doctest::Approx(1.0));
  CHECK(f_conjugate(FGenerator::kl, 0.0).value == doctest::Approx(std::exp(-1.0)));
  CHECK(f_conjugate(FGenerator::pearson_chi2, 0.0).value == doctest::Approx(0.0));
  CHECK(f_conjugate(FGenerator::reverse_kl, 0.5).value == kInf);
  CHECK(f_conjugate(FGenerator::total_variation, 0.6).value == kInf);
  // f(1) = 0 for every generator; f = +inf below zero (nonnegativity fold)
  for (FGenerator g : kGens) {
    CHECK(f_value(g, 1.0) == doctest::Approx(0.0));
    CHECK(f_value(g, -0.3) == kInf);
  }
}

TEST_CASE("conjugates match the grid oracle") {
  for (FGenerator g : kGens) {
    auto [vlo, vhi] = oracle_v_range(g);
    auto f = [g](double u) { return f_value(g, u); };
    for (int k = 0; k < 200; ++k) {
      double v = vlo + (vhi - vlo) * k / 199.0;
      ConjugateValue c = f_conjugate(g, v);
      REQUIRE(std::isfinite(c.value));
      ConjugateOracleResult o = oracle_conjugate(f, v);
      INFO(generator_name(g), " v=", v);
      CHECK(c.value == doctest::Approx(o.value).epsilon(1e-8).scale(1.0));
      CHECK(std::abs(c.value - o.value) <= 1e-6);
    }
  }
}

TEST_CASE("Fenchel-Young inequality on random pairs") {
  for (FGenerator g : kGens) {
    RngStream rng(42, generator_name(g));
    auto [vlo, vhi] = oracle_v_range(g);
    for (int k = 0; k < 10000; ++k) {
      double u = 10.0 * rng.uniform() + 1e-9;
      double v = vlo + (vhi - vlo) * rng.uniform();
      double fv = f_value(g, u);
      double cv = f_conjugate(g, v).value;
      if (!std::isfinite(fv) || !std::isfinite(cv)) continue;
      CHECK(cv >= u * v - fv - 1e-9);
    }
  }
}

TEST_CASE("subgradient monotone in v") {
  for (FGenerator g : kGens) {
    auto [vlo, vhi] = oracle_v_range(g);
    double prev_hi = -kInf;
    for (int k = 0; k < 400; ++k) {
      double v = vlo + (vhi - vlo) * k / 399.0;
      ConjugateValue c = f_conjugate(g, v);
      if (!std::isfinite(c.value)) continue;
      CHECK(c.sub_lo >= prev_hi - 1e-10);
      CHECK(c.sub_hi >= c.sub_lo - 1e-12);
      prev_hi = c.sub_hi;
    }
  }
  double prev = -kInf;
  for (int k = 0; k < 400; ++k) {
    double v = -2.0 + 4.0 * k / 399.0;
    ConjugateValue c = box_conjugate(0.5, 2.0, v);
    CHECK(c.sub_lo >= prev - 1e-12);
    prev = c.sub_hi;
  }
}

TEST_CASE("conjugate curvature matches finite differences") {
  const double h = 1e-5;
  for (FGenerator g : kGens) {
    auto [vlo, vhi] = oracle_v_range(g);
    for (int k = 1; k < 40; ++k) {
      double v = vlo + (vhi - vlo) * k / 40.0;
      double f0 = f_conjugate(g, v).value;
      double fp = f_conjugate(g, v + h).value;
      double fm = f_conjugate(g, v - h).value;
      if (!std::isfinite(f0) || !std::isfinite(fp) || !std::isfinite(fm)) continue;
      if (g == FGenerator::total_variation && std::abs(std::abs(v) - 0.5) < 2 * h)
        continue;  // kink
      double fd = (fp - 2 * f0 + fm) / (h * h);
      double an = f_conjugate_hess(g, v);
      INFO(generator_name(g), " v=", v);
      CHECK(std::abs(fd - an) <= 1e-4 * (1.0 + std::abs(an)));
    }
  }
}

TEST_CASE("domain walls") {
  CHECK(f_domain_wall(FGenerator::reverse_kl) == doctest::Approx(0.0));
  CHECK(f_domain_wall(FGenerator::squared_hellinger) == doctest::Approx(1.0));
  CHECK(f_domain_wall(FGenerator::neyman_chi2) == doctest::Approx(1.0));
  CHECK(f_domain_wall(FGenerator::total_variation) == doctest::Approx(0.5));
  CHECK(f_domain_wall(FGenerator::kl) == kInf);
  CHECK(f_domain_wall(FGenerator::pearson_chi2) == kInf);
}

TEST_CASE("model string parsing") {
  SensitivityModel m = parse_model("tan:1.5");
  CHECK(m.type == SensitivityModel::Type::box);
  CHECK(m.box_kind == BoxKind::tan_msm);
  CHECK(m.gamma_box == doctest::Approx(1.5));

  m = parse_model("ratio:2");
  CHECK(m.box_kind == BoxKind::ratio_box);
  CHECK(m.gamma_box == doctest::Approx(2.0));

  m = parse_model("KL:0.05");
  CHECK(m.type == SensitivityModel::Type::fdiv);
  CHECK(m.gen == FGenerator::kl);
  CHECK(m.budget == doctest::Approx(0.05));

  CHECK(parse_model("reverseKL:0.1").gen == FGenerator::reverse_kl);
  CHECK(parse_model("squaredHellinger:0.1").gen == FGenerator::squared_hellinger);
  CHECK(parse_model("pearsonChi2:0.1").gen == FGenerator::pearson_chi2);
  CHECK(parse_model("neymanChi2:0.1").gen == FGenerator::neyman_chi2);
  CHECK(parse_model("totalVariation:0.1").gen == FGenerator::total_variation);

  CHECK_THROWS_AS(parse_model("garbage"), std::invalid_argument);
  CHECK_THROWS_AS(parse_model("tan:0.3"), std::invalid_argument);
  CHECK_THROWS_AS(parse_model("KL:-1"), std::invalid_argument);
}
