#pragma once
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <utility>

namespace crisp {

enum class BoxKind { tan_msm, ratio_box };

/// Per-sample box [a,b] on the normalized weight w~ = p_obs * w.
/// tan_msm: a = p + (1/G)(1-p), b = p + G(1-p); ratio_box: (1/G, G).
std::pair<double, double> box_bounds(BoxKind kind, double gamma, double p_obs);

enum class FGenerator {
  kl,
  reverse_kl,
  squared_hellinger,
  pearson_chi2,
  neyman_chi2,
  total_variation
};

/// Generator value f(u); +inf outside the domain (nonnegativity of weights is
/// folded in: f = +inf for u < 0).
double f_value(FGenerator g, double u);

struct ConjugateValue {
  double value;   ///< f*(v), may be +inf
  double sub_lo;  ///< subgradient interval of f* at v
  double sub_hi;
};

/// Conjugate of the box indicator: a*v for v<0, 0 at v=0 (subgradient [a,b]),
/// b*v for v>0.
ConjugateValue box_conjugate(double a, double b, double v);

/// Closed-form conjugates of the six divergence generators, in w~ units.
ConjugateValue f_conjugate(FGenerator g, double v);

/// Second derivative of f* where it is twice differentiable.
double f_conjugate_hess(FGenerator g, double v);

/// Supremum of the domain of f* (+inf when the conjugate is finite everywhere).
/// reverse KL: 0, squared Hellinger: 1, total variation: 1/2, Neyman chi2: 1.
double f_domain_wall(FGenerator g);

struct ConjugateOracleResult {
  double value;
  double argmax;
};

/// Brute-force sup_u {u*v - f(u)} over a log-spaced grid on (0, u_max] refined
/// by golden-section search; test oracle for the closed forms above.
ConjugateOracleResult oracle_conjugate(const std::function<double(double)>& f,
                                       double v, double u_max = 50.0,
                                       int grid = 2000);

struct SensitivityModel {
  enum class Type { box, fdiv };
  Type type = Type::box;
  BoxKind box_kind = BoxKind::tan_msm;
  double gamma_box = 1.0;  ///< odds/ratio budget, >= 1
  FGenerator gen = FGenerator::kl;
  double budget = 0.0;  ///< f-divergence budget, >= 0
  bool add_mean_one_constraint = true;

  std::string describe() const;
};

/// Parse model strings of the form "tan:1.5", "ratio:2", "KL:0.05",
/// "reverseKL:0.1", "squaredHellinger:0.1", "pearsonChi2:0.1",
/// "neymanChi2:0.1", "totalVariation:0.1".
SensitivityModel parse_model(std::string_view s);

const char* generator_name(FGenerator g);

}  // namespace crisp
