#pragma once

// Reversible-jump MCMC over (model, log10 rate constants).
//
// Every between-model move toggles one uncertain reaction and maps parameters
// by identity on a kept coordinate set K shared by both models. The remaining
// coordinates of the proposed model are drawn from a conditional Gaussian given
// K; the density of the current model's remaining coordinates under the
// reverse conditional Gaussian enters the ratio. The four variants differ only
// in how K is chosen:
//   NuA      K = shared coordinates
//   NA       K = shared minus coordinates of reactions in EN(M) xor EN(M')
//   SensNuA  K = shared minus coordinates of the update set U
//   SensNA   K = shared minus coordinates of U and of EN(M) xor EN(M')

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rjnet/bayes.hpp"
#include "rjnet/error.hpp"
#include "rjnet/network.hpp"

namespace rjnet {

enum class Variant { nua, na, sens_nua, sens_na };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::nua: return "nua";
    case Variant::na: return "na";
    case Variant::sens_nua: return "sens_nua";
    case Variant::sens_na: return "sens_na";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "nua") return Variant::nua;
  if (s == "na") return Variant::na;
  if (s == "sens_nua") return Variant::sens_nua;
  if (s == "sens_na") return Variant::sens_na;
  throw ValidationError({"sampler.variant \"" + s + "\" is not one of nua, na, sens_nua, sens_na"});
}

inline bool network_aware(Variant v) { return v == Variant::na || v == Variant::sens_na; }
inline bool sensitivity_based(Variant v) { return v == Variant::sens_nua || v == Variant::sens_na; }

enum class MoveType { init, within, birth, death, swap_updated };

inline const char* to_string(MoveType m) {
  switch (m) {
    case MoveType::init: return "init";
    case MoveType::within: return "within";
    case MoveType::birth: return "birth";
    case MoveType::death: return "death";
    case MoveType::swap_updated: return "swap-updated";
  }
  return "?";
}

inline MoveType parse_move_type(const std::string& s) {
  for (MoveType m : {MoveType::init, MoveType::within, MoveType::birth, MoveType::death, MoveType::swap_updated})
    if (s == to_string(m)) return m;
  throw ValidationError({"unknown move type \"" + s + "\""});
}

struct SamplerConfig {
  Variant variant = Variant::na;
  double beta = 0.5;  // probability of a within-model move
  long n_steps = 1000;
  std::uint64_t seed = 1;
  double poisson_mean = 1.5;
  int n_sens_draws = 3;
  double sens_step = 1e-3;
  double rw_scale = 0.5;  // random-walk step in prior standard deviations
  bool adapt = true;
  double target_accept = 0.3;
  long burn_in = 0;           // adaptation stops here
  long snapshot_every = 0;    // parameter snapshot cadence, 0 = none
  bool check_reciprocity = false;

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (!(beta > 0.0 && beta < 1.0)) out.push_back("sampler.beta must lie in (0, 1)");
    if (n_steps < 0) out.push_back("sampler.n_steps must be non-negative");
    if (!(poisson_mean > 0.0)) out.push_back("sampler.poisson_mean must be positive");
    if (n_sens_draws < 1) out.push_back("sampler.n_sens_draws must be positive");
    if (!(sens_step > 0.0)) out.push_back("sampler.sens_step must be positive");
    if (!(rw_scale > 0.0)) out.push_back("sampler.rw_scale must be positive");
    if (!(target_accept > 0.0 && target_accept < 1.0)) out.push_back("sampler.target_accept must lie in (0, 1)");
    if (burn_in < 0) out.push_back("sampler.burn_in must be non-negative");
    if (snapshot_every < 0) out.push_back("sampler.snapshot_every must be non-negative");
    return out;
  }
};

struct ChainState {
  ModelIndicator model;
  std::vector<double> coords;  // full length, NaN where excluded
  EffectiveNetworkKey en;
  PosteriorParts parts;

  double log_post() const { return parts.total(); }
};

inline ChainState make_state(PosteriorEvaluator& ev, ModelIndicator model, std::vector<double> coords) {
  ChainState s;
  s.model = std::move(model);
  s.coords = std::move(coords);
  s.en = ev.effective(s.model);
  s.parts = ev.evaluate(s.model, s.coords);
  return s;
}

struct TraceRecord {
  long step = 0;
  ModelIndicator model;
  EffectiveNetworkKey en;
  double log_post = 0.0;
  MoveType move = MoveType::init;
  bool accepted = false;
  ModelIndicator proposed;  // equals model for within moves
  EffectiveNetworkKey proposed_en;
  double log_accept = std::numeric_limits<double>::quiet_NaN();
  int n_updated = 0;
  bool construction_failed = false;
  double reciprocity = std::numeric_limits<double>::quiet_NaN();  // log A_fwd + log A_rev when checked
};

struct MoveCounter {
  long attempted = 0;
  long accepted = 0;
};

struct Trace {
  std::vector<TraceRecord> records;  // records[0] is the initial state
  std::vector<std::pair<long, std::vector<double>>> snapshots;
  std::map<std::string, MoveCounter> counters;  // per move type
  long construction_failures = 0;

  std::size_t n_steps() const { return records.empty() ? 0 : records.size() - 1; }
};

struct SensitivityIndex {
  int reaction_id = 0;
  double index = 0.0;
};

struct ModelProposal {
  ModelIndicator proposed;
  std::size_t toggled = 0;
  double log_q_fwd = 0.0;
  double log_q_rev = 0.0;
};

// Uniform single-reaction toggle; symmetric.
template <class Rng>
ModelProposal propose_model(const ModelIndicator& current, Rng& rng) {
  if (current.size() == 0) throw std::invalid_argument("propose_model needs at least one uncertain reaction");
  std::uniform_int_distribution<std::size_t> pick(0, current.size() - 1);
  ModelProposal p;
  p.toggled = pick(rng);
  p.proposed = current.toggled(p.toggled);
  p.log_q_fwd = p.log_q_rev = -std::log(static_cast<double>(current.size()));
  return p;
}

// Expected |d log p(k_i | D, k*_rest, M) / d log10 k_i| over prior draws of k_i,
// others held at `nominal`. Reactions outside EN(M) (and fixed ones) get 0.
template <class Rng>
std::vector<SensitivityIndex> sensitivity_indices(PosteriorEvaluator& ev, const ModelIndicator& model,
                                                  std::span<const double> nominal, int n_draws, double step,
                                                  Rng& rng) {
  const auto& net = ev.network();
  const auto key = ev.effective(model);
  std::vector<SensitivityIndex> out;
  std::vector<double> x(nominal.begin(), nominal.end());
  for (std::size_t u = 0; u < net.n_uncertain(); ++u) {
    const int ri = net.uncertain_reaction(u);
    const int id = net.reaction(ri).id;
    SensitivityIndex si{id, 0.0};
    if (!model[u] || !key.contains(id)) {
      out.push_back(si);
      continue;
    }
    const auto [first, last] = net.coordinate_range(u);
    double total = 0.0;
    int used = 0;
    for (int d = 0; d < n_draws; ++d) {
      double draw_sum = 0.0;
      bool ok = true;
      std::vector<double> y = x;
      for (int c = first; c < last; ++c) {
        const auto& prior = net.coordinate(static_cast<std::size_t>(c)).prior;
        std::normal_distribution<double> nd(prior.mean, prior.sd());
        y[static_cast<std::size_t>(c)] = nd(rng);
      }
      for (int c = first; c < last && ok; ++c) {
        const auto cs = static_cast<std::size_t>(c);
        const auto& prior = net.coordinate(cs).prior;
        auto f = [&](double v) {
          std::vector<double> z = y;
          z[cs] = v;
          const double ll = ev.log_likelihood(key, z);
          return ll + normal_log_density(v, prior.mean, prior.variance);
        };
        const double fp = f(y[cs] + step), fm = f(y[cs] - step);
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
          ok = false;
          break;
        }
        draw_sum += std::abs((fp - fm) / (2 * step));
      }
      if (!ok) continue;
      total += draw_sum;
      ++used;
    }
    si.index = used > 0 ? total / used : 0.0;
    out.push_back(si);
  }
  return out;
}

// Reaction ids of `key` ranked by decreasing sensitivity, ties by ascending id.
inline std::vector<int> rank_by_sensitivity(const EffectiveNetworkKey& key, const std::vector<SensitivityIndex>& sens) {
  std::vector<std::pair<double, int>> ranked;
  for (const auto& s : sens)
    if (key.contains(s.reaction_id)) ranked.emplace_back(s.index, s.reaction_id);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> ids;
  for (const auto& r : ranked) ids.push_back(r.second);
  return ids;
}

// Union of the top-r1 reactions of EN(current) and top-r2 of EN(proposed),
// restricted to reactions common to both. `sens_*` list the candidate
// (uncertain) reactions of each network.
inline std::vector<int> select_common_update_set(const EffectiveNetworkKey& en_current,
                                                 const EffectiveNetworkKey& en_proposed,
                                                 const std::vector<SensitivityIndex>& sens_current,
                                                 const std::vector<SensitivityIndex>& sens_proposed, long r1, long r2) {
  const auto top_current = rank_by_sensitivity(en_current, sens_current);
  const auto top_proposed = rank_by_sensitivity(en_proposed, sens_proposed);
  std::vector<int> out;
  auto take = [&](const std::vector<int>& ranked, long r) {
    for (long i = 0; i < r && i < static_cast<long>(ranked.size()); ++i) {
      const int id = ranked[static_cast<std::size_t>(i)];
      if (en_current.contains(id) && en_proposed.contains(id)) out.push_back(id);
    }
  };
  take(top_current, r1);
  take(top_proposed, r2);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

template <class Rng>
std::vector<int> select_common_update_set(const EffectiveNetworkKey& en_current, const EffectiveNetworkKey& en_proposed,
                                          const std::vector<SensitivityIndex>& sens_current,
                                          const std::vector<SensitivityIndex>& sens_proposed, double poisson_mean,
                                          Rng& rng) {
  std::poisson_distribution<long> pois(poisson_mean);
  const long r1 = pois(rng);
  const long r2 = pois(rng);
  return select_common_update_set(en_current, en_proposed, sens_current, sens_proposed, r1, r2);
}

// Coordinate bookkeeping of one between-model move.
struct MovePlan {
  ModelIndicator to;
  EffectiveNetworkKey en_to;
  std::vector<std::size_t> kept;      // K
  std::vector<std::size_t> fwd_free;  // coordinates of `to` outside K
  std::vector<std::size_t> rev_free;  // coordinates of the current model outside K
  std::vector<int> updated;           // update set U (reaction ids)
};

struct MoveEvaluation {
  ChainState proposed;
  double log_accept = neg_inf;
  double log_q_fwd = 0.0;  // density of the drawn u
  double log_q_rev = 0.0;  // density of the dropped/re-drawn current values
  Eigen::VectorXd u;
  Eigen::VectorXd u_rev;
};

inline MovePlan plan_move(const ReactionNetwork& net, const ModelIndicator& from, const EffectiveNetworkKey& en_from,
                          const ModelIndicator& to, const EffectiveNetworkKey& en_to, Variant variant,
                          const std::vector<int>& updated) {
  MovePlan p;
  p.to = to;
  p.en_to = en_to;
  p.updated = updated;
  auto reaction_id = [&](std::size_t c) { return net.reaction(net.coordinate(c).reaction).id; };
  auto in_list = [](const std::vector<int>& v, int id) { return std::find(v.begin(), v.end(), id) != v.end(); };
  for (std::size_t c = 0; c < net.n_coordinates(); ++c) {
    const bool in_from = net.coordinate_included(from, c);
    const bool in_to = net.coordinate_included(to, c);
    const int id = reaction_id(c);
    bool keep = in_from && in_to;
    if (keep && network_aware(variant) && (en_from.contains(id) != en_to.contains(id))) keep = false;
    if (keep && sensitivity_based(variant) && in_list(updated, id)) keep = false;
    if (keep) p.kept.push_back(c);
    else {
      if (in_to) p.fwd_free.push_back(c);
      if (in_from) p.rev_free.push_back(c);
    }
  }
  return p;
}

// Builds and scores the move described by `plan` from `state`. `forced_u`
// replaces the random draw (used to score reverse moves exactly).
template <class Rng>
MoveEvaluation evaluate_move(PosteriorEvaluator& ev, const ChainState& state, const MovePlan& plan, Rng& rng,
                             const Eigen::VectorXd* forced_u = nullptr) {
  const auto& net = ev.network();
  MoveEvaluation out;
  std::vector<double> base(net.n_coordinates(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c : plan.kept) base[c] = state.coords[c];

  const auto q_fwd = ev.conditional(plan.to, base, plan.fwd_free);
  out.u = forced_u ? *forced_u : q_fwd.sample(rng);
  out.log_q_fwd = q_fwd.log_density(out.u);

  std::vector<double> coords = base;
  q_fwd.scatter(out.u, coords);

  const auto q_rev = ev.conditional(state.model, state.coords, plan.rev_free);
  out.u_rev = q_rev.gather(state.coords);
  out.log_q_rev = q_rev.log_density(out.u_rev);

  out.proposed = make_state(ev, plan.to, std::move(coords));
  const double lp_to = out.proposed.log_post();
  const double lp_from = state.log_post();
  out.log_accept = (lp_to == neg_inf) ? neg_inf : lp_to - lp_from + out.log_q_rev - out.log_q_fwd;
  return out;
}

// Reverse plan: same kept set, roles of the free sets swapped.
inline MovePlan reverse_plan(const MovePlan& fwd, const ModelIndicator& from, const EffectiveNetworkKey& en_from) {
  MovePlan r;
  r.to = from;
  r.en_to = en_from;
  r.kept = fwd.kept;
  r.fwd_free = fwd.rev_free;
  r.rev_free = fwd.fwd_free;
  r.updated = fwd.updated;
  return r;
}

struct BetweenOutcome {
  bool accepted = false;
  bool failed = false;
  double log_accept = std::numeric_limits<double>::quiet_NaN();
  double reciprocity = std::numeric_limits<double>::quiet_NaN();
  int n_updated = 0;
  EffectiveNetworkKey en_to;
};

class Sampler {
 public:
  Sampler(PosteriorEvaluator& ev, SamplerConfig cfg, std::uint64_t chain_index = 0)
      : ev_(&ev), cfg_(cfg), rng_(seed_for(cfg.seed, chain_index)) {
    if (auto v = cfg_.violations(); !v.empty()) throw ValidationError(v);
  }

  static std::mt19937_64 seed_for(std::uint64_t seed, std::uint64_t chain) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(chain >> 32)};
    return std::mt19937_64(seq);
  }

  const SamplerConfig& config() const { return cfg_; }
  std::mt19937_64& rng() { return rng_; }

  ChainState default_initial_state() {
    const auto& net = ev_->network();
    auto m = net.full_model();
    return make_state(*ev_, m, prior_means(net, m));
  }

  // Refreshes non-effective coordinates from the prior, then a Gaussian random
  // walk on the effective ones with a Metropolis-Hastings test.
  bool within_model_step(ChainState& state, bool adapting) {
    const auto& net = ev_->network();
    double delta_prior = 0.0;
    std::vector<std::size_t> walk;
    for (std::size_t c : model_coordinates(net, state.model)) {
      const auto& prior = net.coordinate(c).prior;
      if (state.en.contains(net.reaction(net.coordinate(c).reaction).id)) {
        walk.push_back(c);
        continue;
      }
      std::normal_distribution<double> nd(prior.mean, prior.sd());
      const double v = nd(rng_);
      delta_prior += normal_log_density(v, prior.mean, prior.variance) -
                     normal_log_density(state.coords[c], prior.mean, prior.variance);
      state.coords[c] = v;
    }
    if (walk.empty()) {
      if (delta_prior != 0.0) state.parts.log_prior = ev_->log_prior(state.model, state.coords);
      return true;
    }
    if (delta_prior != 0.0) state.parts.log_prior = ev_->log_prior(state.model, state.coords);

    double& scale = scales_.try_emplace(state.en, cfg_.rw_scale).first->second;
    std::normal_distribution<double> n01;
    std::vector<double> x = state.coords;
    for (std::size_t c : walk) x[c] += scale * net.coordinate(c).prior.sd() * n01(rng_);
    const auto parts = ev_->evaluate(state.model, x);
    const double log_a = parts.total() == neg_inf ? neg_inf : parts.total() - state.log_post();
    std::uniform_real_distribution<double> unif;
    const bool accept = log_a >= 0.0 || std::log(unif(rng_)) < log_a;
    if (adapting) {
      long& visits = visits_[state.en];
      ++visits;
      const double a = log_a >= 0.0 ? 1.0 : std::exp(log_a);
      scale *= std::exp((a - cfg_.target_accept) / std::sqrt(static_cast<double>(visits)));
    }
    if (accept) {
      state.coords = std::move(x);
      state.parts = parts;
    }
    return accept;
  }

  const std::vector<SensitivityIndex>& sensitivities(const ModelIndicator& model, const EffectiveNetworkKey& key) {
    if (auto it = sens_cache_.find(key); it != sens_cache_.end()) return it->second;
    // deterministic per network so update-set selection is symmetric in the move direction
    std::mt19937_64 local = seed_for(cfg_.seed ^ 0x5e5e5e5e5e5e5e5eull, std::hash<EffectiveNetworkKey>{}(key));
    const auto& net = ev_->network();
    std::vector<double> nominal = prior_means(net, net.full_model());
    auto s = sensitivity_indices(*ev_, model, nominal, cfg_.n_sens_draws, cfg_.sens_step, local);
    return sens_cache_.emplace(key, std::move(s)).first->second;
  }

  BetweenOutcome between_model_step(ChainState& state, const ModelIndicator& to) {
    BetweenOutcome out;
    const auto& net = ev_->network();
    const auto en_to = ev_->effective(to);
    out.en_to = en_to;
    std::vector<int> updated;
    if (sensitivity_based(cfg_.variant) && !(en_to == state.en)) {
      const auto& sc = sensitivities(state.model, state.en);
      const auto& sp = sensitivities(to, en_to);
      updated = select_common_update_set(state.en, en_to, sc, sp, cfg_.poisson_mean, rng_);
    }
    out.n_updated = static_cast<int>(updated.size());
    const auto plan = plan_move(net, state.model, state.en, to, en_to, cfg_.variant, updated);

    MoveEvaluation mv;
    try {
      mv = evaluate_move(*ev_, state, plan, rng_);
      out.log_accept = mv.log_accept;
      if (cfg_.check_reciprocity && mv.log_accept != neg_inf) {
        const auto rplan = reverse_plan(plan, state.model, state.en);
        const auto rev = evaluate_move(*ev_, mv.proposed, rplan, rng_, &mv.u_rev);
        out.reciprocity = mv.log_accept + rev.log_accept;
      }
    } catch (const ProposalError&) {
      out.failed = true;
      return out;
    }

    double log_alpha = mv.log_accept;
    if (network_aware(cfg_.variant) && en_to == state.en)
      log_alpha = ev_->log_model_prior(to) - ev_->log_model_prior(state.model);
    std::uniform_real_distribution<double> unif;
    out.accepted = log_alpha >= 0.0 || (log_alpha != neg_inf && std::log(unif(rng_)) < log_alpha);
    if (out.accepted) state = std::move(mv.proposed);
    return out;
  }

  // Runs n_steps transitions. `stop` may end the run early after any record.
  Trace run(std::optional<ChainState> init = std::nullopt,
            const std::function<bool(const TraceRecord&)>& stop = nullptr) {
    ChainState state = init ? std::move(*init) : default_initial_state();
    if (state.log_post() == neg_inf)
      throw IntegrationError("initial state has zero posterior density (integration failure or no prior support)");
    const auto& net = ev_->network();
    Trace trace;
    trace.records.reserve(static_cast<std::size_t>(cfg_.n_steps) + 1);
    TraceRecord first;
    first.model = first.proposed = state.model;
    first.en = first.proposed_en = state.en;
    first.log_post = state.log_post();
    first.accepted = true;
    trace.records.push_back(first);
    if (cfg_.snapshot_every > 0) trace.snapshots.emplace_back(0, state.coords);

    std::uniform_real_distribution<double> unif;
    for (long step = 1; step <= cfg_.n_steps; ++step) {
      TraceRecord rec;
      rec.step = step;
      const ModelIndicator from = state.model;
      if (net.n_uncertain() == 0 || unif(rng_) < cfg_.beta) {
        rec.move = MoveType::within;
        rec.proposed = from;
        rec.accepted = within_model_step(state, cfg_.adapt && step <= cfg_.burn_in);
        rec.proposed_en = state.en;
      } else {
        const auto proposal = propose_model(from, rng_);
        const auto out = between_model_step(state, proposal.proposed);
        rec.proposed = proposal.proposed;
        rec.proposed_en = out.en_to;
        rec.accepted = out.accepted;
        rec.log_accept = out.log_accept;
        rec.reciprocity = out.reciprocity;
        rec.n_updated = out.n_updated;
        rec.construction_failed = out.failed;
        if (out.failed) ++trace.construction_failures;
        rec.move = out.n_updated > 0 ? MoveType::swap_updated
                   : proposal.proposed.count() > from.count() ? MoveType::birth
                                                              : MoveType::death;
      }
      rec.model = state.model;
      rec.en = state.en;
      rec.log_post = state.log_post();
      auto& counter = trace.counters[to_string(rec.move)];
      ++counter.attempted;
      if (rec.accepted) ++counter.accepted;
      trace.records.push_back(std::move(rec));
      if (cfg_.snapshot_every > 0 && step % cfg_.snapshot_every == 0) trace.snapshots.emplace_back(step, state.coords);
      if (stop && stop(trace.records.back())) break;
    }
    return trace;
  }

 private:
  PosteriorEvaluator* ev_;
  SamplerConfig cfg_;
  std::mt19937_64 rng_;
  std::map<EffectiveNetworkKey, double> scales_;
  std::map<EffectiveNetworkKey, long> visits_;
  std::map<EffectiveNetworkKey, std::vector<SensitivityIndex>> sens_cache_;
};

inline Trace run_chain(PosteriorEvaluator& ev, const SamplerConfig& cfg, std::uint64_t chain_index = 0,
                       std::optional<ChainState> init = std::nullopt) {
  Sampler s(ev, cfg, chain_index);
  return s.run(std::move(init));
}

}  // namespace rjnet
