#include "crisp/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace crisp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::pair<double, double> box_bounds(BoxKind kind, double gamma, double p_obs) {
  if (gamma < 1.0) throw std::invalid_argument("box_bounds: gamma must be >= 1");
  if (kind == BoxKind::tan_msm) {
    if (!(p_obs > 0.0 && p_obs <= 1.0))
      throw std::invalid_argument("box_bounds: tan model needs p_obs in (0,1]");
    double q = 1.0 - p_obs;
    return {p_obs + q / gamma, p_obs + q * gamma};
  }
  if (!(p_obs > 0.0)) throw std::invalid_argument("box_bounds: p_obs must be positive");
  return {1.0 / gamma, gamma};
}

double f_value(FGenerator g, double u) {
  if (u < 0.0) return kInf;
  switch (g) {
    case FGenerator::kl:
      return u == 0.0 ? 0.0 : u * std::log(u);
    case FGenerator::reverse_kl:
      return u == 0.0 ? kInf : -std::log(u);
    case FGenerator::squared_hellinger: {
      double s = std::sqrt(u) - 1.0;
      return s * s;
    }
    case FGenerator::pearson_chi2: {
      double s = u - 1.0;
      return s * s;
    }
    case FGenerator::neyman_chi2: {
      if (u == 0.0) return kInf;
      double s = 1.0 - u;
      return s * s / u;
    }
    case FGenerator::total_variation:
      return 0.5 * std::abs(u - 1.0);
  }
  return kInf;
}

ConjugateValue box_conjugate(double a, double b, double v) {
  if (v > 0.0) return {b * v, b, b};
  if (v < 0.0) return {a * v, a, a};
  return {0.0, a, b};
}

ConjugateValue f_conjugate(FGenerator g, double v) {
  switch (g) {
    case FGenerator::kl: {
      double e = std::exp(v - 1.0);
      return {e, e, e};
    }
    case FGenerator::reverse_kl: {
      if (v >= 0.0) return {kInf, 0, 0};
      return {-1.0 - std::log(-v), -1.0 / v, -1.0 / v};
    }
    case FGenerator::squared_hellinger: {
      if (v >= 1.0) return {kInf, 0, 0};
      double d = 1.0 - v;
      return {v / d, 1.0 / (d * d), 1.0 / (d * d)};
    }
    case FGenerator::pearson_chi2: {
      if (v < -2.0) return {-1.0, 0.0, 0.0};
      double s = 1.0 + 0.5 * v;
      return {v + 0.25 * v * v, s, s};
    }
    case FGenerator::neyman_chi2: {
      if (v > 1.0) return {kInf, 0, 0};
      double s = std::sqrt(1.0 - v);
      double d = s > 0 ? 1.0 / s : kInf;
      return {2.0 - 2.0 * s, d, d};
    }
    case FGenerator::total_variation: {
      if (v > 0.5) return {kInf, 0, 0};
      if (v == 0.5) return {0.5, 1.0, kInf};
      if (v > -0.5) return {v, 1.0, 1.0};
      if (v == -0.5) return {-0.5, 0.0, 1.0};
      return {-0.5, 0.0, 0.0};
    }
  }
  return {kInf, 0, 0};
}

double f_conjugate_hess(FGenerator g, double v) {
  switch (g) {
    case FGenerator::kl:
      return std::exp(v - 1.0);
    case FGenerator::reverse_kl:
      return v < 0.0 ? 1.0 / (v * v) : kInf;
    case FGenerator::squared_hellinger: {
      if (v >= 1.0) return kInf;
      double d = 1.0 - v;
      return 2.0 / (d * d * d);
    }
    case FGenerator::pearson_chi2:
      return v > -2.0 ? 0.5 : 0.0;
    case FGenerator::neyman_chi2:
      return v < 1.0 ? 0.5 * std::pow(1.0 - v, -1.5) : kInf;
    case FGenerator::total_variation:
      return 0.0;
  }
  return 0.0;
}

double f_domain_wall(FGenerator g) {
  switch (g) {
    case FGenerator::reverse_kl:
      return 0.0;
    case FGenerator::squared_hellinger:
      return 1.0;
    case FGenerator::neyman_chi2:
      return 1.0;
    case FGenerator::total_variation:
      return 0.5;
    default:
      return kInf;
  }
}

ConjugateOracleResult oracle_conjugate(const std::function<double(double)>& f,
                                       double v, double u_max, int grid) {
  // coarse log-spaced scan of u in (0, u_max], plus u=0 explicitly
  double best_u = 0.0;
  double best = -f(0.0);
  if (!std::isfinite(best)) best = -kInf;
  double lo = 1e-9;
  std::vector<double> us;
  us.reserve(static_cast<size_t>(grid));
  for (int i = 0; i < grid; ++i) {
    double s = static_cast<double>(i) / (grid - 1);
    us.push_back(lo * std::pow(u_max / lo, s));
  }
  for (double u : us) {
    double val = u * v - f(u);
    if (val > best) {
      best = val;
      best_u = u;
    }
  }
  // golden-section refinement around the incumbent
  double a = best_u / 3.0, b = std::min(u_max, best_u * 3.0 + 1e-9);
  if (best_u == 0.0) { a = 0.0; b = us.front(); }
  const double gr = 0.6180339887498949;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  auto obj = [&](double u) {
    double val = u * v - f(u);
    return std::isfinite(val) ? val : -kInf;
  };
  double f1 = obj(x1), f2 = obj(x2);
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + gr * (b - a); f2 = obj(x2);
    } else {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - gr * (b - a); f1 = obj(x1);
    }
  }
  // the final bracket may straddle a domain boundary, so probe all of it
  for (double u : {0.5 * (a + b), x1, x2, a, b}) {
    double fu = obj(u);
    if (fu > best) { best = fu; best_u = u; }
  }
  return {best, best_u};
}

const char* generator_name(FGenerator g) {
  switch (g) {
    case FGenerator::kl: return "KL";
    case FGenerator::reverse_kl: return "reverseKL";
    case FGenerator::squared_hellinger: return "squaredHellinger";
    case FGenerator::pearson_chi2: return "pearsonChi2";
    case FGenerator::neyman_chi2: return "neymanChi2";
    case FGenerator::total_variation: return "totalVariation";
  }
  return "?";
}

std::string SensitivityModel::describe() const {
  if (type == Type::box)
    return std::string(box_kind == BoxKind::tan_msm ? "tan:" : "ratio:") +
           std::to_string(gamma_box);
  return std::string(generator_name(gen)) + ":" + std::to_string(budget);
}

SensitivityModel parse_model(std::string_view s) {
  auto colon = s.find(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("parse_model: expected '<name>:<value>', got '" +
                                std::string(s) + "'");
  std::string name(s.substr(0, colon));
  double val = std::stod(std::string(s.substr(colon + 1)));
  SensitivityModel m;
  if (name == "tan" || name == "ratio") {
    m.type = SensitivityModel::Type::box;
    m.box_kind = name == "tan" ? BoxKind::tan_msm : BoxKind::ratio_box;
    if (val < 1.0) throw std::invalid_argument("parse_model: box gamma must be >= 1");
    m.gamma_box = val;
    return m;
  }
  m.type = SensitivityModel::Type::fdiv;
  if (val < 0.0) throw std::invalid_argument("parse_model: budget must be >= 0");
  m.budget = val;
  if (name == "KL") m.gen = FGenerator::kl;
  else if (name == "reverseKL") m.gen = FGenerator::reverse_kl;
  else if (name == "squaredHellinger") m.gen = FGenerator::squared_hellinger;
  else if (name == "pearsonChi2") m.gen = FGenerator::pearson_chi2;
  else if (name == "neymanChi2") m.gen = FGenerator::neyman_chi2;
  else if (name == "totalVariation") m.gen = FGenerator::total_variation;
  else throw std::invalid_argument("parse_model: unknown model '" + name + "'");
  return m;
}

}  // namespace crisp
