#pragma once

// Adaptive linearly-implicit (Rosenbrock) integrator for stiff autonomous
// systems. Six-stage, order 4 with an embedded order-3 error estimate
// (the Hairer-Wanner RODAS4 coefficient set), Gustafsson step-size control.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rjnet/error.hpp"

namespace rjnet {

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  long max_steps = 100000;

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) out.push_back("integrator.rel_tol must lie in (0, 1)");
    if (!(abs_tol > 0.0 && abs_tol < 1.0)) out.push_back("integrator.abs_tol must lie in (0, 1)");
    if (max_steps <= 0) out.push_back("integrator.max_steps must be positive");
    return out;
  }
};

struct IntegrationStats {
  long accepted = 0;
  long rejected = 0;
};

// System requirements:
//   std::size_t size() const;
//   void rhs(const Eigen::VectorXd& y, Eigen::VectorXd& dydt) const;
//   void jacobian(const Eigen::VectorXd& y, Eigen::MatrixXd& J) const;
template <class System>
class RosenbrockIntegrator {
 public:
  RosenbrockIntegrator(const System& system, IntegratorConfig cfg) : sys_(system), cfg_(cfg) {
    const auto n = static_cast<Eigen::Index>(sys_.size());
    for (auto* v : {&f_, &g1_, &g2_, &g3_, &g4_, &g5_, &err_, &tmp_, &ynew_}) v->resize(n);
    jac_.resize(n, n);
    lhs_.resize(n, n);
  }

  // Integrates from y0 at t = 0 and returns the state at each requested time
  // (columns). Requested times must be non-decreasing and non-negative.
  Eigen::MatrixXd solve(const Eigen::VectorXd& y0, std::span<const double> times) {
    const auto n = static_cast<Eigen::Index>(sys_.size());
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(times.size()));
    Eigen::VectorXd y = y0;
    double t = 0.0;
    double h = initial_step(y, times.empty() ? 1.0 : times.back());
    stats_ = {};
    first_step_ = true;
    last_rejected_ = false;

    for (std::size_t k = 0; k < times.size(); ++k) {
      const double t_out = times[k];
      while (t < t_out) {
        if (stats_.accepted + stats_.rejected >= cfg_.max_steps)
          throw IntegrationError("step budget of " + std::to_string(cfg_.max_steps) + " exhausted at t=" +
                                 std::to_string(t));
        const double remaining = t_out - t;
        const bool lands = h >= remaining * (1.0 - 1e-12);
        const double hs = lands ? remaining : h;
        step(y, hs);
        const double err = error_norm(y, ynew_, err_);
        const bool negative = (ynew_.array() < -cfg_.abs_tol).any();
        double fac = controller_factor(err);
        if (std::isfinite(err) && err <= 1.0 && !negative) {
          if (!first_step_) {
            double pred = (h_old_ / hs) * std::pow(err * err / err_old_, 0.25) / safety;
            pred = std::clamp(pred, min_factor, max_factor);
            fac = std::max(fac, pred);
          }
          first_step_ = false;
          h_old_ = hs;
          err_old_ = std::max(0.01, err);
          double h_new = hs / fac;
          if (last_rejected_) h_new = std::min(h_new, hs);
          // a step shortened to land on an output time should not shrink the next one
          if (lands && hs < h) h_new = std::max(h_new, h);
          y = ynew_;
          t = lands ? t_out : t + hs;
          h = h_new;
          last_rejected_ = false;
          ++stats_.accepted;
        } else {
          h = std::isfinite(err) && !negative ? hs / fac : hs * 0.25;
          last_rejected_ = true;
          ++stats_.rejected;
          if (!(h > 1e-14 * std::max(1.0, t_out)))
            throw IntegrationError("step size underflow at t=" + std::to_string(t));
        }
      }
      if (!y.allFinite()) throw IntegrationError("non-finite state at t=" + std::to_string(t));
      out.col(static_cast<Eigen::Index>(k)) = y;
    }
    return out;
  }

  const IntegrationStats& stats() const { return stats_; }

 private:
  static constexpr double safety = 0.9;
  static constexpr double max_factor = 5.0;        // largest shrink divisor
  static constexpr double min_factor = 1.0 / 6.0;  // largest growth

  // RODAS4 coefficients (autonomous form: time-derivative terms vanish).
  static constexpr double gamma = 0.25;
  static constexpr double a21 = 0.1544000000000000e+01;
  static constexpr double a31 = 0.9466785280815826e+00, a32 = 0.2557011698983284e+00;
  static constexpr double a41 = 0.3314825187068521e+01, a42 = 0.2896124015972201e+01,
                          a43 = 0.9986419139977817e+00;
  static constexpr double a51 = 0.1221224509226641e+01, a52 = 0.6019134481288629e+01,
                          a53 = 0.1253708332932087e+02, a54 = -0.6878860361058950e+00;
  static constexpr double c21 = -0.5668800000000000e+01;
  static constexpr double c31 = -0.2430093356833875e+01, c32 = -0.2063599157091915e+00;
  static constexpr double c41 = -0.1073529058151375e+00, c42 = -0.9594562251023355e+01,
                          c43 = -0.2047028614809616e+02;
  static constexpr double c51 = 0.7496443313967647e+01, c52 = -0.1024680431464352e+02,
                          c53 = -0.3399990352819905e+02, c54 = 0.1170890893206160e+02;
  static constexpr double c61 = 0.8083246795921522e+01, c62 = -0.7981132988064893e+01,
                          c63 = -0.3152159432874371e+02, c64 = 0.1631930543123136e+02,
                          c65 = -0.6058818238834054e+01;

  void step(const Eigen::VectorXd& y, double h) {
    sys_.jacobian(y, jac_);
    lhs_.noalias() = -jac_;
    lhs_.diagonal().array() += 1.0 / (gamma * h);
    lu_.compute(lhs_);

    sys_.rhs(y, f_);
    g1_ = lu_.solve(f_);

    tmp_ = y + a21 * g1_;
    sys_.rhs(tmp_, f_);
    g2_ = lu_.solve(f_ + (c21 / h) * g1_);

    tmp_ = y + a31 * g1_ + a32 * g2_;
    sys_.rhs(tmp_, f_);
    g3_ = lu_.solve(f_ + (c31 * g1_ + c32 * g2_) / h);

    tmp_ = y + a41 * g1_ + a42 * g2_ + a43 * g3_;
    sys_.rhs(tmp_, f_);
    g4_ = lu_.solve(f_ + (c41 * g1_ + c42 * g2_ + c43 * g3_) / h);

    tmp_ = y + a51 * g1_ + a52 * g2_ + a53 * g3_ + a54 * g4_;
    sys_.rhs(tmp_, f_);
    g5_ = lu_.solve(f_ + (c51 * g1_ + c52 * g2_ + c53 * g3_ + c54 * g4_) / h);

    tmp_ += g5_;
    sys_.rhs(tmp_, f_);
    err_ = lu_.solve(f_ + (c61 * g1_ + c62 * g2_ + c63 * g3_ + c64 * g4_ + c65 * g5_) / h);
    ynew_ = tmp_ + err_;
  }

  double error_norm(const Eigen::VectorXd& y, const Eigen::VectorXd& ynew, const Eigen::VectorXd& err) const {
    if (y.size() == 0) return 0.0;
    const Eigen::ArrayXd scale = cfg_.abs_tol + cfg_.rel_tol * y.array().abs().max(ynew.array().abs());
    return std::sqrt((err.array() / scale).square().mean());
  }

  static double controller_factor(double err) {
    if (!std::isfinite(err)) return max_factor;
    return std::clamp(std::pow(err, 0.25) / safety, min_factor, max_factor);
  }

  double initial_step(const Eigen::VectorXd& y0, double horizon) {
    if (y0.size() == 0 || horizon <= 0.0) return std::max(horizon, 1e-6);
    sys_.rhs(y0, f_);
    const Eigen::ArrayXd scale = cfg_.abs_tol + cfg_.rel_tol * y0.array().abs();
    const double d0 = std::sqrt((y0.array() / scale).square().mean());
    const double d1 = std::sqrt((f_.array() / scale).square().mean());
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    return std::min(h, horizon);
  }

  const System& sys_;
  IntegratorConfig cfg_;
  IntegrationStats stats_;
  Eigen::VectorXd f_, g1_, g2_, g3_, g4_, g5_, err_, tmp_, ynew_;
  Eigen::MatrixXd jac_, lhs_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  bool first_step_ = true;
  bool last_rejected_ = false;
  double h_old_ = 0.0;
  double err_old_ = 1.0;
};

}  // namespace rjnet
