#include "crisp/dataset.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "crisp/rng.hpp"
#include "crisp/sensitivity.hpp"
#include "crisp/stats.hpp"

namespace crisp {

namespace {
constexpr double kPropensityFloor = 1e-6;

SyntheticTruth paper_truth(ActionKind kind) {
  SyntheticTruth tr;
  tr.mu_x = (Eigen::VectorXd(5) << -1, 0.5, -1, 0, -1).finished();
  tr.beta_x0 = (Eigen::VectorXd(5) << 0, 0.5, -0.5, 0, 0).finished();
  tr.beta_x1 = (Eigen::VectorXd(5) << -1.5, 1.5, -2, 1, 0.5).finished();
  tr.beta_t = (Eigen::VectorXd(5) << 0, 0.75, -0.5, 0, -1).finished();
  tr.kind = kind;
  return tr;
}
}  // namespace

void Dataset::validate() const {
  const Eigen::Index m = y.size();
  if (m < 1) throw std::invalid_argument("Dataset: empty");
  if (t.size() != m || x.rows() != m || (has_propensity && p_obs.size() != m))
    throw std::invalid_argument("Dataset: array length mismatch");
  if (has_propensity && (p_obs.array() <= 0.0).any())
    throw std::invalid_argument("Dataset: p_obs must be strictly positive");
  if (action_kind == ActionKind::binary)
    for (Eigen::Index i = 0; i < m; ++i)
      if (t[i] != 0.0 && t[i] != 1.0)
        throw std::invalid_argument("Dataset: binary actions must be 0/1");
}

double SyntheticTruth::propensity1(const Eigen::VectorXd& x) const {
  return logistic(beta_t.dot(x));
}

double SyntheticTruth::behavior_density(double t, const Eigen::VectorXd& x) const {
  double m = propensity1(x);
  if (kind == ActionKind::binary) return t > 0.5 ? m : 1.0 - m;
  return norm_pdf(t - m);  // unit-variance Gaussian location model
}

static std::pair<Dataset, SyntheticTruth> generate_synthetic(Eigen::Index n,
                                                             std::uint64_t seed,
                                                             ActionKind kind) {
  if (n < 1) throw std::invalid_argument("generate_synthetic: n must be >= 1");
  SyntheticTruth tr = paper_truth(kind);
  const Eigen::Index p = tr.mu_x.size();
  Dataset d;
  d.action_kind = kind;
  d.y.resize(n);
  d.t.resize(n);
  d.x.resize(n, p);
  d.p_obs.resize(n);

  RngStream sx(seed, "x"), sy0(seed, "y0"), sy1(seed, "y1"), st(seed, "t");
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd xi(p);
    for (Eigen::Index j = 0; j < p; ++j) xi[j] = tr.mu_x[j] + sx.normal();
    d.x.row(i) = xi;
    double y0 = tr.outcome_mean(0, xi) + tr.outcome_sd * sy0.normal();
    double y1 = tr.outcome_mean(1, xi) + tr.outcome_sd * sy1.normal();
    double m = tr.propensity1(xi);
    if (kind == ActionKind::binary) {
      double ti = st.bernoulli(m) ? 1.0 : 0.0;
      d.t[i] = ti;
      d.y[i] = ti > 0.5 ? y1 : y0;
      d.p_obs[i] = ti > 0.5 ? m : 1.0 - m;
    } else {
      double ti = m + st.normal();
      d.t[i] = ti;
      d.y[i] = (1.0 - ti) * y0 + ti * y1;
      d.p_obs[i] = norm_pdf(ti - m);
    }
  }
  return {std::move(d), std::move(tr)};
}

std::pair<Dataset, SyntheticTruth> generate_binary_synthetic(Eigen::Index n, std::uint64_t seed) {
  return generate_synthetic(n, seed, ActionKind::binary);
}

std::pair<Dataset, SyntheticTruth> generate_continuous_synthetic(Eigen::Index n, std::uint64_t seed) {
  return generate_synthetic(n, seed, ActionKind::continuous);
}

Dataset load_csv(const std::string& path, ActionKind kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  int iy = -1, it = -1, ip = -1;
  std::vector<int> ix;
  for (size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h == "y") iy = static_cast<int>(c);
    else if (h == "t") it = static_cast<int>(c);
    else if (h == "p_obs") ip = static_cast<int>(c);
    else if (h.size() > 1 && h[0] == 'x') ix.push_back(static_cast<int>(c));
  }
  if (iy < 0) throw std::runtime_error("load_csv: missing column 'y'");
  if (it < 0) throw std::runtime_error("load_csv: missing column 't'");
  if (ix.empty()) throw std::runtime_error("load_csv: missing context columns x0..");

  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> row;
    size_t col = 0;
    while (std::getline(ss, tok, ',')) {
      ++col;
      try {
        size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("trailing");
        row.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: non-numeric cell at row " +
                                 std::to_string(lineno) + ", column " +
                                 std::to_string(col) + " ('" + tok + "')");
      }
    }
    if (row.size() != header.size())
      throw std::runtime_error("load_csv: row " + std::to_string(lineno) +
                               " has " + std::to_string(row.size()) +
                               " cells, expected " + std::to_string(header.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index p = static_cast<Eigen::Index>(ix.size());
  Dataset d;
  d.action_kind = kind;
  d.y.resize(n);
  d.t.resize(n);
  d.x.resize(n, p);
  d.has_propensity = ip >= 0;
  if (d.has_propensity) d.p_obs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<size_t>(i)];
    d.y[i] = row[static_cast<size_t>(iy)];
    d.t[i] = row[static_cast<size_t>(it)];
    for (Eigen::Index j = 0; j < p; ++j)
      d.x(i, j) = row[static_cast<size_t>(ix[static_cast<size_t>(j)])];
    if (d.has_propensity) d.p_obs[i] = row[static_cast<size_t>(ip)];
  }
  d.validate();
  return d;
}

void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot write " + path);
  out.precision(17);
  out << "y,t";
  for (Eigen::Index j = 0; j < d.dim(); ++j) out << ",x" << j;
  if (d.has_propensity) out << ",p_obs";
  out << "\n";
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << d.y[i] << "," << d.t[i];
    for (Eigen::Index j = 0; j < d.dim(); ++j) out << "," << d.x(i, j);
    if (d.has_propensity) out << "," << d.p_obs[i];
    out << "\n";
  }
}

Dataset fit_propensity_logistic(const Dataset& d, bool* ridged) {
  if (d.action_kind != ActionKind::binary)
    throw std::invalid_argument("fit_propensity_logistic: binary actions required");
  const Eigen::Index n = d.n(), p = d.dim();
  Eigen::MatrixXd Z(n, p + 1);
  Z.col(0).setOnes();
  Z.rightCols(p) = d.x;

  auto irls = [&](double ridge, Eigen::VectorXd& beta) -> bool {
    beta.setZero(p + 1);
    for (int it = 0; it < 100; ++it) {
      Eigen::VectorXd eta = Z * beta;
      Eigen::VectorXd mu = eta.unaryExpr([](double z) { return logistic(z); });
      Eigen::VectorXd grad = Z.transpose() * (d.t - mu) / static_cast<double>(n) -
                             ridge * beta;
      if (grad.lpNorm<Eigen::Infinity>() <= 1e-8) {
        // converged; every observed action fitted with probability ~1 means
        // the likelihood has no interior optimum (perfect separation)
        if (ridge == 0.0 && (d.t - mu).lpNorm<Eigen::Infinity>() < 1e-4) return false;
        return true;
      }
      Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
      Eigen::MatrixXd H = Z.transpose() * w.asDiagonal() * Z / static_cast<double>(n);
      H.diagonal().array() += ridge + 1e-12;
      Eigen::VectorXd step = H.ldlt().solve(grad);
      if (!step.allFinite()) return false;
      beta += step;
      if (beta.lpNorm<Eigen::Infinity>() > 1e3) return false;  // separation blow-up
    }
    return false;
  };

  Eigen::VectorXd beta;
  bool used_ridge = false;
  if (!irls(0.0, beta)) {
    used_ridge = true;
    irls(1e-6, beta);
  }
  if (ridged) *ridged = used_ridge;

  Dataset out = d;
  out.has_propensity = true;
  out.p_obs.resize(n);
  Eigen::VectorXd mu = (Z * beta).unaryExpr([](double z) { return logistic(z); });
  for (Eigen::Index i = 0; i < n; ++i) {
    double pi = d.t[i] > 0.5 ? mu[i] : 1.0 - mu[i];
    out.p_obs[i] = std::max(pi, kPropensityFloor);
  }
  return out;
}

double true_sharp_bound_mc(const SyntheticTruth& truth, const Policy& policy,
                           double gamma, Direction dir, Eigen::Index n_mc,
                           std::uint64_t seed) {
  if (gamma < 1.0) throw std::invalid_argument("true_sharp_bound_mc: gamma must be >= 1");
  if (truth.kind != ActionKind::binary)
    throw std::invalid_argument("true_sharp_bound_mc: binary synthetic truth required");
  RngStream rs(seed, "oracle");
  const Eigen::Index p = truth.mu_x.size();
  const double sd = truth.outcome_sd;
  double acc = 0;
  Eigen::VectorXd xi(p);
  for (Eigen::Index i = 0; i < n_mc; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) xi[j] = truth.mu_x[j] + rs.normal();
    double e1 = truth.propensity1(xi);
    // T integrated exactly: sum_t p(t|x) * (pi/p) * E[w* Y | t,x] = sum_t pi_t * inner_t
    for (int tv = 0; tv <= 1; ++tv) {
      double pt = tv ? e1 : 1.0 - e1;
      double pit = policy.prob(tv, xi);
      if (pit == 0.0) continue;
      auto [a, b] = box_bounds(BoxKind::tan_msm, gamma, pt);
      double mu = truth.outcome_mean(tv, xi);
      double inner;
      if (b - a < 1e-14) {
        inner = mu;
      } else {
        double tau = dir == Direction::lower ? (1.0 - a) / (b - a) : (b - 1.0) / (b - a);
        double z = norm_quantile(tau);
        double elo = mu * norm_cdf(z) - sd * norm_pdf(z);  // E[Y 1{Y<=Q}]
        double ehi = mu - elo;
        inner = dir == Direction::lower ? b * elo + a * ehi : a * elo + b * ehi;
      }
      acc += pit * inner;
    }
  }
  return acc / static_cast<double>(n_mc);
}

Eigen::VectorXd default_eval_beta() {
  return (Eigen::VectorXd(5) << 1, 0.5, -0.5, 0, 0).finished();
}

}  // namespace crisp
