#pragma once

// Prior, Gaussian likelihood and posterior over (model, log10 rate constants),
// plus the conditional Laplace approximations that center between-model
// proposals.
//
// Parameter vectors are full length (one entry per coordinate of the network,
// forward then reverse per uncertain reaction); entries of reactions the model
// excludes are NaN.

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <deque>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rjnet/error.hpp"
#include "rjnet/kinetics.hpp"
#include "rjnet/network.hpp"
#include "rjnet/optimize.hpp"

namespace rjnet {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

struct Dataset {
  std::vector<double> times;
  std::vector<double> observations;  // time-major, then observed species
  double noise_variance = 1.0;

  std::size_t size() const { return observations.size(); }
};

inline std::vector<std::string> validate_dataset(const ReactionNetwork& net, const Dataset& data) {
  std::vector<std::string> out;
  const std::size_t n_obs = net.observed_species().size();
  if (data.observations.size() != data.times.size() * n_obs)
    out.push_back("dataset has " + std::to_string(data.observations.size()) + " observations, expected " +
                  std::to_string(data.times.size() * n_obs));
  if (!(data.noise_variance > 0.0) || !std::isfinite(data.noise_variance))
    out.push_back("noise_variance must be positive and finite");
  for (std::size_t i = 0; i < data.times.size(); ++i) {
    if (!(data.times[i] >= 0.0) || !std::isfinite(data.times[i]))
      out.push_back("dataset time " + std::to_string(i) + " is invalid");
    if (i > 0 && !(data.times[i] > data.times[i - 1])) out.push_back("dataset times must be strictly increasing");
  }
  for (double v : data.observations)
    if (!std::isfinite(v)) {
      out.push_back("dataset contains a non-finite observation");
      break;
    }
  return out;
}

// Observations of `model` at `params` plus N(0, noise_variance) noise; noise-free when rng is null.
template <class Rng = std::mt19937_64>
Dataset simulate_dataset(const ReactionNetwork& net, const ModelIndicator& model, const RateParameters& params,
                         std::vector<double> times, double noise_variance, Rng* rng = nullptr,
                         const IntegratorConfig& cfg = {}) {
  if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
    throw ValidationError({"noise_variance must be non-negative and finite"});
  Dataset d;
  d.noise_variance = noise_variance;
  d.observations = predict_observables(net, model, params, times, cfg);
  d.times = std::move(times);
  if (rng && noise_variance > 0.0) {
    std::normal_distribution<double> noise(0.0, std::sqrt(noise_variance));
    for (double& v : d.observations) v += noise(*rng);
  }
  // A zero-variance dataset is valid output but cannot drive a likelihood.
  Dataset check = d;
  if (check.noise_variance == 0.0) check.noise_variance = 1.0;
  if (auto v = validate_dataset(net, check); !v.empty()) throw ValidationError(v);
  return d;
}

inline std::vector<double> uniform_times(double dt, int n) {
  std::vector<double> t;
  for (int i = 1; i <= n; ++i) t.push_back(dt * i);
  return t;
}

inline double normal_log_density(double x, double mean, double variance) {
  const double z = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + z * z / variance);
}

// Independent Bernoulli inclusion per uncertain reaction; 0.5 everywhere is uniform.
struct ModelPrior {
  std::vector<double> inclusion;

  static ModelPrior uniform(std::size_t n) { return {std::vector<double>(n, 0.5)}; }

  double log_prob(const ModelIndicator& m) const {
    double lp = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) lp += std::log(m[i] ? inclusion[i] : 1.0 - inclusion[i]);
    return lp;
  }

  std::vector<std::string> violations(std::size_t n) const {
    std::vector<std::string> out;
    if (inclusion.size() != n) out.push_back("model prior must give one inclusion probability per uncertain reaction");
    for (double p : inclusion)
      if (!(p > 0.0 && p < 1.0)) {
        out.push_back("model prior inclusion probabilities must lie in (0, 1)");
        break;
      }
    return out;
  }
};

// Coordinate indices belonging to reactions the model includes.
inline std::vector<std::size_t> model_coordinates(const ReactionNetwork& net, const ModelIndicator& model) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < net.n_coordinates(); ++c)
    if (net.coordinate_included(model, c)) out.push_back(c);
  return out;
}

// Coordinate indices of uncertain reactions in an effective network.
inline std::vector<std::size_t> key_coordinates(const ReactionNetwork& net, const EffectiveNetworkKey& key) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < net.n_coordinates(); ++c)
    if (key.contains(net.reaction(net.coordinate(c).reaction).id)) out.push_back(c);
  return out;
}

inline std::vector<int> key_reaction_indices(const ReactionNetwork& net, const EffectiveNetworkKey& key) {
  std::vector<int> out;
  for (int id : key.reaction_ids) out.push_back(net.reaction_index(id));
  return out;
}

inline std::vector<double> prior_means(const ReactionNetwork& net, const ModelIndicator& model) {
  std::vector<double> x(net.n_coordinates(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c : model_coordinates(net, model)) x[c] = net.coordinate(c).prior.mean;
  return x;
}

// Sum of Normal log densities over the model's coordinates (log10 space, no Jacobian).
inline double log_prior(const ReactionNetwork& net, const ModelIndicator& model, std::span<const double> coords) {
  net.check_model(model);
  if (coords.size() != net.n_coordinates())
    throw ValidationError({"parameter vector has length " + std::to_string(coords.size()) + ", expected " +
                           std::to_string(net.n_coordinates())});
  double lp = 0.0;
  for (std::size_t c : model_coordinates(net, model)) {
    if (std::isnan(coords[c]))
      throw ValidationError({"no value for included coordinate of reaction " +
                             std::to_string(net.reaction(net.coordinate(c).reaction).id)});
    const auto& prior = net.coordinate(c).prior;
    lp += normal_log_density(coords[c], prior.mean, prior.variance);
  }
  return lp;
}

inline double gaussian_log_likelihood(const Dataset& data, std::span<const double> predicted) {
  const double d = static_cast<double>(data.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = data.observations[i] - predicted[i];
    ss += r * r;
  }
  const double ll = -0.5 * d * std::log(2.0 * std::numbers::pi * data.noise_variance) - ss / (2.0 * data.noise_variance);
  return std::isfinite(ll) ? ll : neg_inf;
}

// Log-likelihood with only the given reactions integrated; -inf on integration failure.
inline double log_likelihood_for(const ReactionNetwork& net, const std::vector<int>& reaction_indices,
                                 std::span<const double> coords, const Dataset& data, const IntegratorConfig& cfg) {
  if (data.size() == 0) return 0.0;
  const auto params = RateParameters::base(net).with_coordinates(net, coords);
  try {
    const auto g = predict_observables_for(net, reaction_indices, params, data.times, cfg);
    return gaussian_log_likelihood(data, g);
  } catch (const IntegrationError&) {
    return neg_inf;
  }
}

inline double log_likelihood(const ReactionNetwork& net, const ModelIndicator& model, std::span<const double> coords,
                             const Dataset& data, const IntegratorConfig& cfg = {}) {
  return log_likelihood_for(net, net.included_reactions(model), coords, data, cfg);
}

inline double log_posterior(const ReactionNetwork& net, const ModelIndicator& model, std::span<const double> coords,
                            const Dataset& data, const IntegratorConfig& cfg = {},
                            const ModelPrior* model_prior = nullptr) {
  const double lp = log_prior(net, model, coords);
  const double lm = model_prior ? model_prior->log_prob(model) : ModelPrior::uniform(net.n_uncertain()).log_prob(model);
  const double ll = log_likelihood(net, model, coords, data, cfg);
  if (ll == neg_inf) return neg_inf;
  return lp + ll + lm;
}

// Multivariate Normal over a set of coordinates, with its Cholesky factor.
struct ConditionalGaussian {
  std::vector<std::size_t> coords;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;  // lower
  double log_det = 0.0;
  bool optimizer_converged = true;
  int regularized_directions = 0;

  static ConditionalGaussian make(std::vector<std::size_t> coords, Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    ConditionalGaussian g;
    g.coords = std::move(coords);
    g.mean = std::move(mean);
    g.cov = 0.5 * (cov + cov.transpose());
    if (g.mean.size() > 0) {
      Eigen::LLT<Eigen::MatrixXd> llt(g.cov);
      if (llt.info() != Eigen::Success) throw ProposalError("conditional covariance is not positive definite");
      g.chol = llt.matrixL();
      g.log_det = 2.0 * g.chol.diagonal().array().log().sum();
    }
    return g;
  }

  std::size_t dim() const { return coords.size(); }

  double log_density(const Eigen::VectorXd& u) const {
    if (dim() == 0) return 0.0;
    const Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(u - mean);
    return -0.5 * (static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
  }

  template <class Rng>
  Eigen::VectorXd sample(Rng& rng) const {
    std::normal_distribution<double> n01;
    Eigen::VectorXd z(static_cast<Eigen::Index>(dim()));
    for (auto& v : z) v = n01(rng);
    return mean + chol * z;
  }

  // Values of this Gaussian's coordinates read from a full-length vector.
  Eigen::VectorXd gather(std::span<const double> full) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) u[static_cast<Eigen::Index>(i)] = full[coords[i]];
    return u;
  }

  void scatter(const Eigen::VectorXd& u, std::span<double> full) const {
    for (std::size_t i = 0; i < dim(); ++i) full[coords[i]] = u[static_cast<Eigen::Index>(i)];
  }
};

// Sigma = (-H)^-1, replacing the curvature of directions with eigenvalue < eps
// by the prior precision along that direction.
inline Eigen::MatrixXd regularized_inverse(const Eigen::MatrixXd& neg_hessian, const Eigen::VectorXd& prior_variance,
                                           int* n_regularized = nullptr, double eps = 1e-8) {
  const Eigen::MatrixXd sym = 0.5 * (neg_hessian + neg_hessian.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw ProposalError("eigen-decomposition of the Hessian failed");
  Eigen::VectorXd lambda = es.eigenvalues();
  const Eigen::MatrixXd& V = es.eigenvectors();
  int fixed = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (!(lambda[i] >= eps) || !std::isfinite(lambda[i])) {
      const Eigen::VectorXd v = V.col(i);
      lambda[i] = (v.array().square() / prior_variance.array()).sum();
      ++fixed;
    }
  }
  if (n_regularized) *n_regularized = fixed;
  return V * lambda.cwiseInverse().asDiagonal() * V.transpose();
}

// Laplace approximation of a log density over `coords`: multistart BFGS from
// the prior mean and the mean +/- one prior sd, FD Hessian at the best point.
template <class F>
ConditionalGaussian laplace_approximation(F&& log_density, std::vector<std::size_t> coords,
                                          const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_variance,
                                          const OptimizerConfig& opt, const FiniteDifferenceConfig& fd) {
  const Eigen::VectorXd sd = prior_variance.cwiseSqrt();
  const Eigen::VectorXd starts[3] = {prior_mean, prior_mean + sd, prior_mean - sd};
  OptimizeResult best;
  for (int s = 0; s < opt.n_starts; ++s) {
    auto r = maximize_bfgs(log_density, starts[s], prior_variance, opt);
    if (r.value > best.value || best.x.size() == 0) best = std::move(r);
  }
  if (!std::isfinite(best.value)) throw ProposalError("conditional mode search found no feasible point");
  const Eigen::MatrixXd H = fd_hessian(log_density, best.x, best.value, fd.h);
  if (!H.allFinite()) throw ProposalError("Hessian at the conditional mode is not finite");
  int n_reg = 0;
  const Eigen::MatrixXd cov = regularized_inverse(-H, prior_variance, &n_reg);
  auto g = ConditionalGaussian::make(std::move(coords), best.x, cov);
  g.optimizer_converged = best.converged;
  g.regularized_directions = n_reg;
  return g;
}

struct EvaluatorStats {
  long likelihood_solves = 0;
  long likelihood_hits = 0;
  long gaussian_builds = 0;
  long gaussian_hits = 0;
};

struct PosteriorParts {
  double log_prior = 0.0;
  double log_likelihood = 0.0;
  double log_model_prior = 0.0;

  double total() const {
    if (log_likelihood == neg_inf || log_prior == neg_inf) return neg_inf;
    return log_prior + log_likelihood + log_model_prior;
  }
};

// Posterior evaluation bound to one network and dataset. Likelihoods integrate
// the effective network only and are memoized by exact coordinate values, as
// are conditional Gaussians; both caches are bounded and per instance.
class PosteriorEvaluator {
 public:
  PosteriorEvaluator(const ReactionNetwork& net, Dataset data, IntegratorConfig icfg = {}, ModelPrior model_prior = {},
                     OptimizerConfig opt = {}, FiniteDifferenceConfig fd = {}, EffectiveNetworkCache* en_cache = nullptr)
      : net_(&net),
        data_(std::move(data)),
        icfg_(icfg),
        model_prior_(model_prior.inclusion.empty() ? ModelPrior::uniform(net.n_uncertain()) : std::move(model_prior)),
        opt_(opt),
        fd_(fd),
        shared_en_(en_cache),
        own_en_(net) {
    std::vector<std::string> errors = validate_dataset(net, data_);
    for (auto& v : icfg_.violations()) errors.push_back(std::move(v));
    for (auto& v : model_prior_.violations(net.n_uncertain())) errors.push_back(std::move(v));
    for (auto& v : opt_.violations()) errors.push_back(std::move(v));
    for (auto& v : fd_.violations()) errors.push_back(std::move(v));
    if (!errors.empty()) throw ValidationError(errors);
  }

  const ReactionNetwork& network() const { return *net_; }
  const Dataset& data() const { return data_; }
  const IntegratorConfig& integrator() const { return icfg_; }
  const ModelPrior& model_prior() const { return model_prior_; }
  const OptimizerConfig& optimizer() const { return opt_; }
  const FiniteDifferenceConfig& fd() const { return fd_; }
  const EvaluatorStats& stats() const { return stats_; }

  EffectiveNetworkKey effective(const ModelIndicator& m) const {
    return shared_en_ ? shared_en_->get(m) : own_en_.get(m);
  }

  double log_prior(const ModelIndicator& m, std::span<const double> coords) const {
    return rjnet::log_prior(*net_, m, coords);
  }

  double log_model_prior(const ModelIndicator& m) const { return model_prior_.log_prob(m); }

  // Likelihood of the effective network `key` at `coords` (only EN coordinates are read).
  double log_likelihood(const EffectiveNetworkKey& key, std::span<const double> coords) {
    std::string k = key.to_string();
    k.push_back('|');
    for (std::size_t c : key_coordinates(*net_, key)) append_bits(k, coords[c]);
    if (auto it = ll_cache_.find(k); it != ll_cache_.end()) {
      ++stats_.likelihood_hits;
      return it->second;
    }
    ++stats_.likelihood_solves;
    const double ll = log_likelihood_for(*net_, key_reaction_indices(*net_, key), coords, data_, icfg_);
    remember(ll_cache_, ll_order_, std::move(k), ll, ll_capacity);
    return ll;
  }

  PosteriorParts evaluate(const ModelIndicator& m, std::span<const double> coords) {
    PosteriorParts p;
    p.log_prior = log_prior(m, coords);
    p.log_model_prior = log_model_prior(m);
    p.log_likelihood = log_likelihood(effective(m), coords);
    return p;
  }

  double log_posterior(const ModelIndicator& m, std::span<const double> coords) { return evaluate(m, coords).total(); }

  // Gaussian approximation of p(k_free | k_rest, M, D). `base` supplies the
  // conditioning values (full length); free coordinates outside EN(M) get
  // their prior exactly, the rest a Laplace approximation.
  ConditionalGaussian conditional(const ModelIndicator& m, std::span<const double> base,
                                  const std::vector<std::size_t>& free) {
    const auto key = effective(m);
    std::vector<std::size_t> inside, outside;
    for (std::size_t c : free) {
      if (!net_->coordinate_included(m, c))
        throw std::invalid_argument("free coordinate belongs to a reaction the model excludes");
      (key.contains(net_->reaction(net_->coordinate(c).reaction).id) ? inside : outside).push_back(c);
    }

    ConditionalGaussian inner;
    if (!inside.empty()) inner = inner_conditional(key, base, inside);

    // block-diagonal assembly in the order of `free`
    const auto n = static_cast<Eigen::Index>(free.size());
    Eigen::VectorXd mean(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    std::vector<Eigen::Index> pos_inner(inside.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t c = free[static_cast<std::size_t>(i)];
      auto it = std::find(inside.begin(), inside.end(), c);
      if (it == inside.end()) {
        mean[i] = net_->coordinate(c).prior.mean;
        cov(i, i) = net_->coordinate(c).prior.variance;
      } else {
        pos_inner[static_cast<std::size_t>(it - inside.begin())] = i;
        mean[i] = inner.mean[it - inside.begin()];
      }
    }
    for (std::size_t a = 0; a < inside.size(); ++a)
      for (std::size_t b = 0; b < inside.size(); ++b)
        cov(pos_inner[a], pos_inner[b]) = inner.cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    auto g = ConditionalGaussian::make(free, mean, cov);
    g.optimizer_converged = inside.empty() || inner.optimizer_converged;
    g.regularized_directions = inner.regularized_directions;
    return g;
  }

  Eigen::VectorXd conditional_mode(const ModelIndicator& m, std::span<const double> base,
                                   const std::vector<std::size_t>& free) {
    return conditional(m, base, free).mean;
  }

  static constexpr std::size_t ll_capacity = 20000;
  static constexpr std::size_t cg_capacity = 2000;

 private:
  static void append_bits(std::string& s, double v) {
    char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof v);
    s.append(buf, sizeof buf);
  }

  template <class V>
  static void remember(std::unordered_map<std::string, V>& map, std::deque<std::string>& order, std::string key, V value,
                       std::size_t capacity) {
    if (map.size() >= capacity) {
      map.erase(order.front());
      order.pop_front();
    }
    order.push_back(key);
    map.emplace(std::move(key), std::move(value));
  }

  ConditionalGaussian inner_conditional(const EffectiveNetworkKey& key, std::span<const double> base,
                                        const std::vector<std::size_t>& inside) {
    // cache key: EN, free set, and the conditioning EN values
    std::string k = key.to_string();
    k.push_back('|');
    for (std::size_t c : inside) k += std::to_string(c) + ',';
    k.push_back('|');
    std::vector<double> work(base.begin(), base.end());
    for (std::size_t c : key_coordinates(*net_, key)) {
      if (std::find(inside.begin(), inside.end(), c) != inside.end()) continue;
      if (std::isnan(work[c])) throw std::invalid_argument("conditioning value missing for an effective coordinate");
      append_bits(k, work[c]);
    }
    if (auto it = cg_cache_.find(k); it != cg_cache_.end()) {
      ++stats_.gaussian_hits;
      return it->second;
    }
    ++stats_.gaussian_builds;

    const auto n = static_cast<Eigen::Index>(inside.size());
    Eigen::VectorXd mu(n), var(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& prior = net_->coordinate(inside[static_cast<std::size_t>(i)]).prior;
      mu[i] = prior.mean;
      var[i] = prior.variance;
    }
    auto objective = [&](const Eigen::VectorXd& u) {
      double lp = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        work[inside[static_cast<std::size_t>(i)]] = u[i];
        lp += normal_log_density(u[i], mu[i], var[i]);
      }
      const double ll = log_likelihood(key, work);
      return ll == neg_inf ? neg_inf : ll + lp;
    };
    auto g = laplace_approximation(objective, inside, mu, var, opt_, fd_);
    remember(cg_cache_, cg_order_, std::move(k), g, cg_capacity);
    return g;
  }

  const ReactionNetwork* net_;
  Dataset data_;
  IntegratorConfig icfg_;
  ModelPrior model_prior_;
  OptimizerConfig opt_;
  FiniteDifferenceConfig fd_;
  EffectiveNetworkCache* shared_en_;
  EffectiveNetworkCache own_en_;
  EvaluatorStats stats_;
  std::unordered_map<std::string, double> ll_cache_;
  std::deque<std::string> ll_order_;
  std::unordered_map<std::string, ConditionalGaussian> cg_cache_;
  std::deque<std::string> cg_order_;
};

}  // namespace rjnet
