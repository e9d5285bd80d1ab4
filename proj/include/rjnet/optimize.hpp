#pragma once

// Quasi-Newton maximization on finite-difference gradients, and the
// finite-difference Hessian used for Laplace approximations.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace rjnet {

struct OptimizerConfig {
  int n_starts = 3;
  int max_evaluations = 200;  // per start
  double grad_tol = 1e-5;
  double fd_step = 1e-5;  // gradient step, log10 units

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (n_starts < 1 || n_starts > 3) out.push_back("optimizer.n_starts must be 1, 2 or 3");
    if (max_evaluations < 1) out.push_back("optimizer.max_evaluations must be positive");
    if (!(grad_tol > 0.0)) out.push_back("optimizer.grad_tol must be positive");
    if (!(fd_step > 0.0)) out.push_back("optimizer.fd_step must be positive");
    return out;
  }
};

struct FiniteDifferenceConfig {
  double h = 1e-4;  // Hessian step, log10 units

  std::vector<std::string> violations() const {
    if (!(h > 0.0)) return {"fd.h must be positive"};
    return {};
  }
};

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = -std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  int evaluations = 0;
};

namespace detail {

template <class F>
class CountingObjective {
 public:
  explicit CountingObjective(F& f) : f_(f) {}
  double operator()(const Eigen::VectorXd& x) {
    ++count;
    const double v = f_(x);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  }
  int count = 0;

 private:
  F& f_;
};

// Central differences; one-sided where one side is infeasible.
template <class F>
bool fd_gradient(F& f, const Eigen::VectorXd& x, double fx, double h, Eigen::VectorXd& g) {
  g.resize(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    if (std::isfinite(fp) && std::isfinite(fm))
      g[i] = (fp - fm) / (2 * h);
    else if (std::isfinite(fp))
      g[i] = (fp - fx) / h;
    else if (std::isfinite(fm))
      g[i] = (fx - fm) / h;
    else
      return false;
  }
  return true;
}

}  // namespace detail

// BFGS ascent from x0 with a backtracking line search. inv_hessian0 seeds the
// inverse curvature (e.g. prior variances). Returns the best point seen.
template <class F>
OptimizeResult maximize_bfgs(F&& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& inv_hessian0,
                             const OptimizerConfig& cfg) {
  detail::CountingObjective<std::remove_reference_t<F>> obj(f);
  OptimizeResult res;
  const auto n = x0.size();
  Eigen::VectorXd x = x0;
  double fx = obj(x);
  res.x = x;
  res.value = fx;
  if (!std::isfinite(fx)) {
    res.evaluations = obj.count;
    return res;
  }
  Eigen::MatrixXd Hinv = inv_hessian0.asDiagonal();
  Eigen::VectorXd g;
  if (!detail::fd_gradient(obj, x, fx, cfg.fd_step, g)) {
    res.evaluations = obj.count;
    return res;
  }
  res.grad_norm = g.norm();

  while (obj.count < cfg.max_evaluations) {
    if (g.norm() <= cfg.grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd p = Hinv * g;  // ascent direction
    double slope = g.dot(p);
    if (!(slope > 0.0)) {
      Hinv = inv_hessian0.asDiagonal();
      p = Hinv * g;
      slope = g.dot(p);
    }
    double t = 1.0;
    Eigen::VectorXd xn;
    double fn = -std::numeric_limits<double>::infinity();
    bool stepped = false;
    for (int k = 0; k < 30 && obj.count < cfg.max_evaluations; ++k) {
      xn = x + t * p;
      fn = obj(xn);
      if (std::isfinite(fn) && fn >= fx + 1e-4 * t * slope) {
        stepped = true;
        break;
      }
      t *= 0.5;
    }
    if (!stepped) break;
    Eigen::VectorXd gn;
    if (!detail::fd_gradient(obj, xn, fn, cfg.fd_step, gn)) break;
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = g - gn;  // gradient of the minimized function is -g
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    const bool stalled = s.norm() < 1e-12 || std::abs(fn - fx) < 1e-14 * std::max(1.0, std::abs(fx));
    x = xn;
    fx = fn;
    g = gn;
    if (fx > res.value) {
      res.x = x;
      res.value = fx;
      res.grad_norm = g.norm();
    }
    if (stalled) break;
  }
  if (g.norm() <= cfg.grad_tol) res.converged = true;
  res.grad_norm = std::min(res.grad_norm, g.norm());
  res.evaluations = obj.count;
  return res;
}

// Central finite-difference Hessian of f at x.
template <class F>
Eigen::MatrixXd fd_hessian(F&& f, const Eigen::VectorXd& x, double fx, double h) {
  const auto n = x.size();
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    H(i, i) = (fp - 2 * fx + fm) / (h * h);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      auto at = [&](double si, double sj) {
        Eigen::VectorXd z = x;
        z[i] += si * h;
        z[j] += sj * h;
        return f(z);
      };
      H(i, j) = H(j, i) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * h * h);
    }
  return H;
}

}  // namespace rjnet
