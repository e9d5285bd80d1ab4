#pragma once

// Deterministic forward model: per-reaction rate laws, right-hand-side
// assembly and the stiff solve producing observable predictions G(M, k).

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rjnet/error.hpp"
#include "rjnet/integrator.hpp"
#include "rjnet/network.hpp"

namespace rjnet {

// log10 rate constants and Michaelis constants, indexed by reaction index.
struct RateParameters {
  std::vector<double> log10_k;
  std::vector<double> log10_k_reverse;  // meaningful for reversible reactions only
  std::vector<double> michaelis;        // meaningful for Michaelis-Menten reactions only

  static RateParameters base(const ReactionNetwork& net) {
    RateParameters p;
    for (const auto& r : net.reactions()) {
      p.log10_k.push_back(r.base_log10_k);
      p.log10_k_reverse.push_back(r.base_log10_k_reverse);
      p.michaelis.push_back(r.michaelis_constant);
    }
    return p;
  }

  // Copy with the uncertain coordinates overwritten; NaN entries are skipped.
  RateParameters with_coordinates(const ReactionNetwork& net, std::span<const double> coords) const {
    RateParameters p = *this;
    p.assign_coordinates(net, coords);
    return p;
  }

  void assign_coordinates(const ReactionNetwork& net, std::span<const double> coords) {
    for (std::size_t c = 0; c < coords.size() && c < net.n_coordinates(); ++c) {
      if (std::isnan(coords[c])) continue;
      const auto& coord = net.coordinate(c);
      auto& slot = coord.reverse ? log10_k_reverse : log10_k;
      slot[static_cast<std::size_t>(coord.reaction)] = coords[c];
    }
  }
};

struct ConcentrationState {
  std::vector<double> values;
  double time = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ConcentrationState> states;
};

struct DirectionalRates {
  double forward = 0.0;
  double reverse = 0.0;
  double net() const { return forward - reverse; }
};

namespace detail {
inline double clamp_conc(double c) { return c > 0.0 ? c : 0.0; }
}  // namespace detail

// Directional rates of one reaction at the given concentrations (indexed by species).
// Mass action: k * product of reactant (and enzyme) concentrations, per direction.
// Michaelis-Menten: k * product of enzyme concentrations * [S] / (K_M + [S]).
// Negative concentrations are treated as zero.
inline DirectionalRates reaction_rate(const IndexedReaction& r, double k_forward, double k_reverse, double michaelis,
                                      std::span<const double> conc) {
  auto c = [&](int s) { return detail::clamp_conc(conc[static_cast<std::size_t>(s)]); };
  DirectionalRates out;
  double enzymes = 1.0;
  for (int e : r.enzymes) enzymes *= c(e);
  if (r.rate_law == RateLaw::michaelis_menten) {
    const double s = c(r.reactants.front());
    out.forward = k_forward * enzymes * s / (michaelis + s);
    return out;
  }
  double fwd = k_forward * enzymes;
  for (int s : r.reactants) fwd *= c(s);
  out.forward = fwd;
  if (r.reversible) {
    double rev = k_reverse * enzymes;
    for (int s : r.products) rev *= c(s);
    out.reverse = rev;
  }
  return out;
}

inline DirectionalRates reaction_rate(const ReactionNetwork& net, int reaction_index, const RateParameters& params,
                                      std::span<const double> conc) {
  const auto i = static_cast<std::size_t>(reaction_index);
  return reaction_rate(net.reaction(reaction_index), std::pow(10.0, params.log10_k[i]),
                       std::pow(10.0, params.log10_k_reverse[i]), params.michaelis[i], conc);
}

// Mass-balance right-hand side over all species for the model's included reactions.
inline std::vector<double> assemble_rhs(const ReactionNetwork& net, const ModelIndicator& model,
                                        const RateParameters& params, std::span<const double> conc) {
  std::vector<double> dydt(net.n_species(), 0.0);
  for (int i : net.included_reactions(model)) {
    const double rate = reaction_rate(net, i, params, conc).net();
    const auto& r = net.reaction(i);
    for (int s : r.reactants) dydt[static_cast<std::size_t>(s)] -= rate;
    for (int s : r.products) dydt[static_cast<std::size_t>(s)] += rate;
  }
  return dydt;
}

// ODE system restricted to a reaction subset, over the species those reactions touch.
// Untouched species keep their initial concentration.
class KineticSystem {
 public:
  KineticSystem(const ReactionNetwork& net, const std::vector<int>& reaction_indices, const RateParameters& params)
      : net_(&net), local_of_(net.n_species(), -1) {
    for (int i : reaction_indices) {
      const auto& r = net.reaction(i);
      for (const auto* list : {&r.reactants, &r.products, &r.enzymes})
        for (int s : *list) touch(s);
    }
    for (int i : reaction_indices) {
      const auto& r = net.reaction(i);
      const auto ri = static_cast<std::size_t>(i);
      Term t;
      t.law = r.rate_law;
      t.reversible = r.reversible;
      t.k_forward = std::pow(10.0, params.log10_k[ri]);
      t.k_reverse = r.reversible ? std::pow(10.0, params.log10_k_reverse[ri]) : 0.0;
      t.michaelis = params.michaelis[ri];
      for (int s : r.reactants) t.reactants.push_back(local_of_[static_cast<std::size_t>(s)]);
      for (int s : r.products) t.products.push_back(local_of_[static_cast<std::size_t>(s)]);
      for (int s : r.enzymes) t.enzymes.push_back(local_of_[static_cast<std::size_t>(s)]);
      terms_.push_back(std::move(t));
    }
  }

  std::size_t size() const { return global_of_.size(); }
  const std::vector<int>& species() const { return global_of_; }
  // Local index of a global species, -1 when untouched.
  int local_index(int species) const { return local_of_[static_cast<std::size_t>(species)]; }

  Eigen::VectorXd initial_state() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i)
      y[static_cast<Eigen::Index>(i)] = net_->species()[static_cast<std::size_t>(global_of_[i])].initial_concentration;
    return y;
  }

  void rhs(const Eigen::VectorXd& y, Eigen::VectorXd& dydt) const {
    dydt.setZero(y.size());
    for (const auto& t : terms_) {
      const double rate = t.rate(y);
      for (int s : t.reactants) dydt[s] -= rate;
      for (int s : t.products) dydt[s] += rate;
    }
  }

  void jacobian(const Eigen::VectorXd& y, Eigen::MatrixXd& J) const {
    J.setZero(y.size(), y.size());
    grad_.resize(y.size());
    for (const auto& t : terms_) {
      t.rate_gradient(y, grad_, touched_);
      for (int col : touched_) {
        const double g = grad_[col];
        if (g == 0.0) continue;
        for (int s : t.reactants) J(s, col) -= g;
        for (int s : t.products) J(s, col) += g;
      }
    }
  }

  // States at the requested times, one column per time.
  Eigen::MatrixXd simulate(std::span<const double> times, const IntegratorConfig& cfg) const {
    RosenbrockIntegrator<KineticSystem> solver(*this, cfg);
    return solver.solve(initial_state(), times);
  }

 private:
  struct Term {
    RateLaw law = RateLaw::mass_action;
    bool reversible = false;
    double k_forward = 0.0, k_reverse = 0.0, michaelis = 0.0;
    std::vector<int> reactants, products, enzymes;

    static double c(const Eigen::VectorXd& y, int s) { return y[s] > 0.0 ? y[s] : 0.0; }

    double rate(const Eigen::VectorXd& y) const {
      double enz = 1.0;
      for (int e : enzymes) enz *= c(y, e);
      if (law == RateLaw::michaelis_menten) {
        const double s = c(y, reactants.front());
        return k_forward * enz * s / (michaelis + s);
      }
      double fwd = k_forward * enz;
      for (int s : reactants) fwd *= c(y, s);
      if (!reversible) return fwd;
      double rev = k_reverse * enz;
      for (int s : products) rev *= c(y, s);
      return fwd - rev;
    }

    // d(net rate)/d y_j for every species j the rate depends on.
    void rate_gradient(const Eigen::VectorXd& y, Eigen::VectorXd& g, std::vector<int>& touched) const {
      touched.clear();
      auto product_except = [&](const std::vector<int>& a, const std::vector<int>& b, int skip) {
        double p = 1.0;
        for (int s : a)
          if (s != skip) p *= c(y, s);
        for (int s : b)
          if (s != skip) p *= c(y, s);
        return p;
      };
      auto set = [&](int s, double v) {
        if (y[s] < 0.0) v = 0.0;
        if (std::find(touched.begin(), touched.end(), s) == touched.end()) {
          touched.push_back(s);
          g[s] = v;
        } else {
          g[s] += v;
        }
      };
      if (law == RateLaw::michaelis_menten) {
        const int sub = reactants.front();
        const double s = c(y, sub);
        double enz = 1.0;
        for (int e : enzymes) enz *= c(y, e);
        const double denom = michaelis + s;
        set(sub, k_forward * enz * michaelis / (denom * denom));
        for (int e : enzymes) set(e, k_forward * product_except(enzymes, {}, e) * s / denom);
        return;
      }
      for (int s : reactants) set(s, k_forward * product_except(reactants, enzymes, s));
      for (int e : enzymes) set(e, k_forward * product_except(reactants, enzymes, e));
      if (reversible) {
        for (int s : products) set(s, -k_reverse * product_except(products, enzymes, s));
        for (int e : enzymes) set(e, -k_reverse * product_except(products, enzymes, e));
      }
    }
  };

  void touch(int s) {
    auto& slot = local_of_[static_cast<std::size_t>(s)];
    if (slot < 0) {
      slot = static_cast<int>(global_of_.size());
      global_of_.push_back(s);
    }
  }

  const ReactionNetwork* net_;
  std::vector<int> local_of_;
  std::vector<int> global_of_;
  std::vector<Term> terms_;
  mutable Eigen::VectorXd grad_;
  mutable std::vector<int> touched_;
};

namespace detail {

inline void check_times(std::span<const double> times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0) || !std::isfinite(times[i]))
      throw std::invalid_argument("observation times must be finite and non-negative");
    if (i > 0 && !(times[i] > times[i - 1])) throw std::invalid_argument("observation times must be strictly increasing");
  }
}

inline std::string describe(const ReactionNetwork& net, const std::vector<int>& reactions, const RateParameters& p) {
  std::ostringstream os;
  os << "reactions {";
  for (std::size_t i = 0; i < reactions.size(); ++i) {
    const auto r = static_cast<std::size_t>(reactions[i]);
    os << (i ? ", " : "") << net.reaction(reactions[i]).id << ":" << p.log10_k[r];
  }
  os << "}";
  return os.str();
}

}  // namespace detail

// Full-species trajectory of the given reactions at the requested times.
inline Trajectory integrate_reactions(const ReactionNetwork& net, const std::vector<int>& reaction_indices,
                                      const RateParameters& params, std::span<const double> times,
                                      const IntegratorConfig& cfg) {
  detail::check_times(times);
  KineticSystem sys(net, reaction_indices, params);
  Eigen::MatrixXd local;
  try {
    local = sys.simulate(times, cfg);
  } catch (const IntegrationError& e) {
    throw IntegrationError(std::string(e.what()) + " for " + detail::describe(net, reaction_indices, params));
  }
  Trajectory traj;
  traj.times.assign(times.begin(), times.end());
  for (std::size_t k = 0; k < times.size(); ++k) {
    ConcentrationState st;
    st.time = times[k];
    st.values.resize(net.n_species());
    for (std::size_t s = 0; s < net.n_species(); ++s) {
      const int li = sys.local_index(static_cast<int>(s));
      st.values[s] = li < 0 ? net.species()[s].initial_concentration : local(li, static_cast<Eigen::Index>(k));
    }
    traj.states.push_back(std::move(st));
  }
  return traj;
}

inline Trajectory integrate(const ReactionNetwork& net, const ModelIndicator& model, const RateParameters& params,
                            std::span<const double> times, const IntegratorConfig& cfg = {}) {
  return integrate_reactions(net, net.included_reactions(model), params, times, cfg);
}

// Observed-species values, time-major then species index: the prediction G.
inline std::vector<double> predict_observables_for(const ReactionNetwork& net, const std::vector<int>& reaction_indices,
                                                   const RateParameters& params, std::span<const double> times,
                                                   const IntegratorConfig& cfg) {
  detail::check_times(times);
  const auto& observed = net.observed_species();
  std::vector<double> out;
  out.reserve(times.size() * observed.size());
  KineticSystem sys(net, reaction_indices, params);
  bool any_dynamic = false;
  for (int s : observed) any_dynamic = any_dynamic || sys.local_index(s) >= 0;
  Eigen::MatrixXd local;
  if (any_dynamic) {
    try {
      local = sys.simulate(times, cfg);
    } catch (const IntegrationError& e) {
      throw IntegrationError(std::string(e.what()) + " for " + detail::describe(net, reaction_indices, params));
    }
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (int s : observed) {
      const int li = sys.local_index(s);
      out.push_back(li < 0 ? net.species()[static_cast<std::size_t>(s)].initial_concentration
                           : local(li, static_cast<Eigen::Index>(k)));
    }
  }
  return out;
}

inline std::vector<double> predict_observables(const ReactionNetwork& net, const ModelIndicator& model,
                                               const RateParameters& params, std::span<const double> times,
                                               const IntegratorConfig& cfg = {}) {
  return predict_observables_for(net, net.included_reactions(model), params, times, cfg);
}

}  // namespace rjnet
