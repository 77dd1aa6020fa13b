#include "crisp/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "crisp/stats.hpp"

namespace crisp {

Policy Policy::logistic(Eigen::VectorXd beta) {
  Policy p;
  p.kind_ = Kind::logistic;
  p.beta_ = std::move(beta);
  return p;
}

Policy Policy::gaussian(Eigen::VectorXd beta, double variance) {
  if (variance <= 0) throw std::invalid_argument("Policy::gaussian: variance must be positive");
  Policy p;
  p.kind_ = Kind::gaussian;
  p.beta_ = std::move(beta);
  p.variance_ = variance;
  return p;
}

Policy Policy::mixture(std::vector<Policy> components, Eigen::VectorXd weights) {
  if (components.empty() || weights.size() != static_cast<Eigen::Index>(components.size()))
    throw std::invalid_argument("Policy::mixture: component/weight size mismatch");
  Policy p;
  p.kind_ = Kind::mixed;
  p.components_ = std::move(components);
  p.weights_ = project_simplex(weights);
  return p;
}

double Policy::prob(double t, const Eigen::VectorXd& x) const {
  switch (kind_) {
    case Kind::logistic: {
      double p1 = crisp::logistic(beta_.dot(x));
      return t > 0.5 ? p1 : 1.0 - p1;
    }
    case Kind::gaussian: {
      double mu = crisp::logistic(beta_.dot(x));
      double sd = std::sqrt(variance_);
      return norm_pdf((t - mu) / sd) / sd;
    }
    case Kind::mixed: {
      double acc = 0;
      for (size_t k = 0; k < components_.size(); ++k)
        acc += weights_[static_cast<Eigen::Index>(k)] * components_[k].prob(t, x);
      return acc;
    }
  }
  return 0;
}

Eigen::VectorXd Policy::grad_param(double t, const Eigen::VectorXd& x) const {
  switch (kind_) {
    case Kind::logistic: {
      double p1 = crisp::logistic(beta_.dot(x));
      double s = p1 * (1.0 - p1);
      return (t > 0.5 ? s : -s) * x;
    }
    case Kind::gaussian: {
      double mu = crisp::logistic(beta_.dot(x));
      double s = mu * (1.0 - mu);
      double sd = std::sqrt(variance_);
      double dens = norm_pdf((t - mu) / sd) / sd;
      // d/dmu of N(t; mu, v) = dens * (t-mu)/v, chained through the logistic map
      return dens * (t - mu) / variance_ * s * x;
    }
    case Kind::mixed: {
      Eigen::VectorXd g(weights_.size());
      for (size_t k = 0; k < components_.size(); ++k)
        g[static_cast<Eigen::Index>(k)] = components_[k].prob(t, x);
      return g;
    }
  }
  return {};
}

int Policy::param_dim() const {
  return kind_ == Kind::mixed ? static_cast<int>(weights_.size())
                              : static_cast<int>(beta_.size());
}

Eigen::VectorXd Policy::params() const {
  return kind_ == Kind::mixed ? weights_ : beta_;
}

void Policy::set_params(const Eigen::VectorXd& p) {
  if (p.size() != param_dim()) throw std::invalid_argument("Policy::set_params: size mismatch");
  if (kind_ == Kind::mixed)
    weights_ = project_simplex(p);
  else
    beta_ = p;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0, tau = 0;
  int rho = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    css += u[static_cast<size_t>(i)];
    double t = (css - 1.0) / static_cast<double>(i + 1);
    if (u[static_cast<size_t>(i)] - t > 0) {
      rho = static_cast<int>(i + 1);
      tau = t;
    }
  }
  (void)rho;
  return (v.array() - tau).cwiseMax(0.0);
}

}  // namespace crisp
