// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance [--nightly] [criterion ...]
// Without arguments runs every criterion of the default tier.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "rjnet/cli.hpp"
#include "support.hpp"

using namespace rjnet;
using rjnet::testing::data_path;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunConfig example_config(int n) { return load_run_config(data_path("example" + std::to_string(n) + "/config.json")); }

struct Problem {
  RunConfig cfg;
  ReactionNetwork net;
  Dataset data;

  explicit Problem(RunConfig c) : cfg(std::move(c)), net(load_config_network(cfg)), data(load_config_dataset(net, cfg)) {}

  PosteriorEvaluator evaluator() const {
    return PosteriorEvaluator(net, data, cfg.integrator, {}, cfg.optimizer, cfg.fd);
  }
};

// ------------------------------------------------------------------ criteria

Outcome cluster_counts() {
  auto t0 = std::chrono::steady_clock::now();
  const auto r1 = enumerate_report(rjnet::testing::example_network(1));
  const double s1 = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const auto r2 = enumerate_report(rjnet::testing::example_network(2));
  const double s2 = seconds_since(t0);
  const bool ok = r1["clusters"] == 5 && r1["models"] == 32 && r2["nonempty_networks"] == 24 && r2["models"] == 1024 &&
                  s1 < 1.0 && s2 < 30.0;
  return {ok, fmt("example1 %d clusters / %d models (%.3f s); example2 %d non-empty networks, %d clusters / %d models "
                  "(%.3f s)",
                  r1["clusters"].get<int>(), r1["models"].get<int>(), s1, r2["nonempty_networks"].get<int>(),
                  r2["clusters"].get<int>(), r2["models"].get<int>(), s2)};
}

Outcome figure_one_networks() {
  const auto net = rjnet::testing::example_network(2);
  const EffectiveNetworkKey expected{{1, 2, 8, 9, 10, 11, 12}};
  auto all_but = [&](int id) {
    std::vector<int> ids;
    for (int u : net.uncertain_ids())
      if (u != id) ids.push_back(u);
    return net.model_from_ids(ids);
  };
  const auto a = effective_network(net, all_but(3));
  const auto b = effective_network(net, all_but(6));
  return {a == expected && b == expected, "without 3: " + a.to_string() + "; without 6: " + b.to_string()};
}

Outcome conservation() {
  const auto net = rjnet::testing::example_network(1);
  const IntegratorConfig cfg;
  std::vector<double> times;
  for (int i = 1; i <= 50; ++i) times.push_back(0.2 * i);
  const auto tr = integrate(net, net.full_model(), RateParameters::base(net), times, cfg);
  const std::vector<std::vector<const char*>> families = {
      {"unboundEGFR", "boundEGFR", "degradedEGFR"}, {"EGF", "boundEGFR", "degradedEGFR"},
      {"inactiveSOS", "activeSOS"},                 {"inactiveRas", "activeRas"},
      {"inactiveRap1", "activeRap1"},               {"inactiveC3G", "activeC3G"},
      {"BRaf", "BRafPP"},                           {"Gap"}};
  auto total = [&](const std::vector<double>& x, const std::vector<const char*>& fam) {
    double s = 0.0;
    for (const char* name : fam) s += x[static_cast<std::size_t>(net.species_index(name))];
    return s;
  };
  std::vector<double> x0;
  for (const auto& sp : net.species()) x0.push_back(sp.initial_concentration);
  double worst = 0.0;
  for (const auto& st : tr.states)
    for (const auto& fam : families) {
      const double t0 = total(x0, fam);
      worst = std::max(worst, std::abs(total(st.values, fam) - t0) / t0);
    }
  return {tr.states.size() == 50 && worst <= 10 * cfg.rel_tol,
          fmt("8 totals over %zu times, worst relative drift %.2e (bound %.0e)", tr.states.size(), worst,
              10 * cfg.rel_tol)};
}

Outcome en_equivalence() {
  const auto net = rjnet::testing::all_uncertain_network();
  const IntegratorConfig cfg;
  std::mt19937_64 rng(2024);
  std::bernoulli_distribution coin(0.7);
  std::uniform_real_distribution<double> shift(-0.5, 0.5);
  std::vector<double> times;
  for (int i = 1; i <= 20; ++i) times.push_back(0.5 * i);
  double worst_reduce = 0.0, worst_perturb = 0.0;
  int perturbations = 0;
  auto rel_diff = [](const std::vector<double>& a, const std::vector<double>& b) {
    double w = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) w = std::max(w, std::abs(a[i] - b[i]) / std::max(std::abs(a[i]), 1e-300));
    return w;
  };
  for (int rep = 0; rep < 100; ++rep) {
    ModelIndicator m(net.n_uncertain());
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, coin(rng));
    auto p = RateParameters::base(net);
    for (auto& v : p.log10_k) v += shift(rng);
    for (auto& v : p.log10_k_reverse) v += shift(rng);
    const auto key = effective_network(net, m);
    const auto full = predict_observables(net, m, p, times, cfg);
    const auto reduced = predict_observables_for(net, key_reaction_indices(net, key), p, times, cfg);
    worst_reduce = std::max(worst_reduce, rel_diff(full, reduced));
    for (int idx = 0; idx < static_cast<int>(net.reactions().size()); ++idx) {
      if (key.contains(net.reaction(idx).id)) continue;
      auto q = p;
      q.log10_k[static_cast<std::size_t>(idx)] += 1.0;
      if (net.reaction(idx).reversible) q.log10_k_reverse[static_cast<std::size_t>(idx)] += 1.0;
      worst_perturb = std::max(worst_perturb, rel_diff(full, predict_observables(net, m, q, times, cfg)));
      ++perturbations;
    }
  }
  const double bound = 10 * cfg.rel_tol;
  return {worst_reduce <= bound && worst_perturb <= bound,
          fmt("100 pairs: model vs EN worst %.2e; %d x10 non-EN perturbations worst %.2e (bound %.0e)", worst_reduce,
              perturbations, worst_perturb, bound)};
}

// Log evidence of one model by trapezoid quadrature over mean +/- 7 sd per coordinate.
double quadrature_log_evidence(const ReactionNetwork& net, const ModelIndicator& m, const Dataset& d, int nodes,
                               const IntegratorConfig& ic) {
  const auto coords = model_coordinates(net, m);
  std::vector<double> x(net.n_coordinates(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> lo, h;
  for (auto c : coords) {
    const auto& pr = net.coordinate(c).prior;
    lo.push_back(pr.mean - 7 * pr.sd());
    h.push_back(14 * pr.sd() / (nodes - 1));
  }
  std::size_t total = 1;
  for (std::size_t i = 0; i < coords.size(); ++i) total *= static_cast<std::size_t>(nodes);
  std::vector<double> terms;
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t r = k;
    double logw = 0.0;
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const int j = static_cast<int>(r % static_cast<std::size_t>(nodes));
      r /= static_cast<std::size_t>(nodes);
      x[coords[i]] = lo[i] + j * h[i];
      logw += std::log(h[i]) + ((j == 0 || j == nodes - 1) ? std::log(0.5) : 0.0);
    }
    terms.push_back(log_posterior(net, m, x, d, ic) + logw);
  }
  const double mx = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

std::vector<double> quadrature_model_probs(const ReactionNetwork& net, const Dataset& d, int nodes,
                                           const IntegratorConfig& ic) {
  const std::size_t n_models = std::size_t{1} << net.n_uncertain();
  std::vector<double> le;
  for (std::size_t i = 0; i < n_models; ++i)
    le.push_back(quadrature_log_evidence(net, ModelIndicator::from_index(i, net.n_uncertain()), d, nodes, ic));
  const double mx = *std::max_element(le.begin(), le.end());
  double z = 0.0;
  for (double v : le) z += std::exp(v - mx);
  for (double& v : le) v = std::exp(v - mx) / z;
  return le;
}

Outcome posterior_oracle() {
  const long n_steps = 200000, burn_in = 20000;
  IntegratorConfig ic;
  ic.rel_tol = 1e-6;
  ic.abs_tol = 1e-6;
  bool ok = true;
  std::ostringstream out;
  for (const char* name : {"chain", "decoy", "gated"}) {
    const auto net = rjnet::testing::subproblem_network(name);
    std::mt19937_64 rng(1);
    const auto data = simulate_dataset(net, net.full_model(), RateParameters::base(net), uniform_times(1.0, 8), 0.25,
                                       &rng, ic);
    const auto exact = quadrature_model_probs(net, data, 81, ic);
    const auto coarse = quadrature_model_probs(net, data, 41, ic);
    double grid_err = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) grid_err = std::max(grid_err, std::abs(exact[i] - coarse[i]));
    if (grid_err > 2e-3) ok = false;
    out << name << " (grid " << fmt("%.0e", grid_err) << "):";
    for (Variant v : {Variant::nua, Variant::na, Variant::sens_nua, Variant::sens_na}) {
      PosteriorEvaluator ev(net, data, ic);
      SamplerConfig cfg;
      cfg.variant = v;
      cfg.n_steps = n_steps;
      cfg.burn_in = burn_in;
      cfg.seed = 11;
      const auto trace = run_chain(ev, cfg);
      double worst_excess = -1.0;
      for (std::size_t i = 0; i < exact.size(); ++i) {
        const auto m = ModelIndicator::from_index(i, net.n_uncertain());
        std::vector<double> ind;
        for (const auto& r : detail::kept_records(trace, burn_in)) ind.push_back(r.model == m ? 1.0 : 0.0);
        const double p = std::accumulate(ind.begin(), ind.end(), 0.0) / static_cast<double>(ind.size());
        const double tol = std::max(0.02, 2 * batch_means_se(ind));
        worst_excess = std::max(worst_excess, std::abs(p - exact[i]) / tol);
      }
      if (worst_excess > 1.0) ok = false;
      out << ' ' << to_string(v) << '=' << fmt("%.2f", worst_excess);
    }
    out << "; ";
  }
  return {ok, "worst |p - quadrature| / tolerance per variant: " + out.str()};
}

struct SameClusterStats {
  long moves = 0;
  long rejected = 0;
  double worst_log_accept = 0.0;
};

SameClusterStats same_cluster(const Trace& t) {
  SameClusterStats s;
  for (std::size_t i = 1; i < t.records.size(); ++i) {
    const auto& r = t.records[i];
    if (r.move == MoveType::within || r.construction_failed || !(r.proposed_en == t.records[i - 1].en)) continue;
    ++s.moves;
    if (!r.accepted) ++s.rejected;
    s.worst_log_accept = std::max(s.worst_log_accept, std::abs(r.log_accept));
  }
  return s;
}

Outcome same_cluster_acceptance() {
  Problem pr(example_config(1));
  pr.cfg.sampler.variant = Variant::na;
  pr.cfg.sampler.n_steps = 100000;
  pr.cfg.sampler.burn_in = 10000;
  auto ev = pr.evaluator();
  const auto s = same_cluster(run_chain(ev, pr.cfg.sampler));
  return {s.moves > 0 && s.rejected == 0 && s.worst_log_accept <= 1e-12,
          fmt("%ld same-EN moves in 100000 NA steps, %ld rejected, worst |log A| %.1e", s.moves, s.rejected,
              s.worst_log_accept)};
}

struct ReciprocityStats {
  long logged = 0;
  double worst = 0.0;
};

void add_reciprocity(ReciprocityStats& s, const Trace& t) {
  for (const auto& r : t.records) {
    if (r.move == MoveType::within || std::isnan(r.reciprocity)) continue;
    ++s.logged;
    s.worst = std::max(s.worst, std::abs(r.reciprocity));
  }
}

Outcome reciprocity() {
  ReciprocityStats s;
  std::ostringstream per;
  for (Variant v : {Variant::nua, Variant::na, Variant::sens_nua, Variant::sens_na}) {
    Problem pr(example_config(1));
    pr.cfg.sampler.variant = v;
    pr.cfg.sampler.n_steps = 5200;
    pr.cfg.sampler.check_reciprocity = true;
    auto ev = pr.evaluator();
    const long before = s.logged;
    add_reciprocity(s, run_chain(ev, pr.cfg.sampler));
    per << ' ' << to_string(v) << '=' << (s.logged - before);
  }
  return {s.logged >= 10000 && s.worst <= 1e-9,
          fmt("%ld proposals checked (", s.logged) + per.str() + fmt(" ), worst |log A_fwd + log A_rev| %.1e", s.worst)};
}

std::vector<Trace> example1_chains(Variant v, int n, long steps, long burn_in, std::uint64_t seed) {
  Problem pr(example_config(1));
  pr.cfg.sampler.variant = v;
  pr.cfg.sampler.n_steps = steps;
  pr.cfg.sampler.burn_in = burn_in;
  pr.cfg.sampler.seed = seed;
  std::vector<Trace> out;
  for (int i = 0; i < n; ++i) {
    auto ev = pr.evaluator();
    out.push_back(run_chain(ev, pr.cfg.sampler, static_cast<std::uint64_t>(i)));
  }
  return out;
}

Outcome mixing_gain() {
  const long burn = 5000;
  auto total_ess = [&](Variant v) {
    double e = 0.0;
    for (const auto& t : example1_chains(v, 5, 50000, burn, 1)) e += ess(model_size_series(t, burn)).ess;
    return e;
  };
  const double na = total_ess(Variant::na);
  const double nua = total_ess(Variant::nua);
  return {na >= 2 * nua, fmt("ESS of reaction count, 5 x 50000 steps: NA %.0f, NuA %.0f, ratio %.2f (need >= 2)", na,
                             nua, na / nua)};
}

Outcome full_model_probability() {
  const long burn = 30000;
  const auto net = rjnet::testing::example_network(1);
  const auto clusters = enumerate_clusters(net);
  const auto truth = net.full_model();
  double raw = 0.0, der = 0.0;
  const auto traces = example1_chains(Variant::na, 5, 400000, burn, 1);
  for (const auto& t : traces) {
    const auto r = raw_model_probs(t, burn);
    if (auto it = r.find(truth); it != r.end()) raw += it->second / 5.0;
    der += derandomized_model_probs(t, burn, clusters, ModelPrior::uniform(net.n_uncertain()))[truth] / 5.0;
  }
  return {std::abs(der - 0.754) <= 0.05,
          fmt("P(data-generating model): derandomized %.4f, raw %.4f (target 0.754 +/- 0.05)", der, raw)};
}

Outcome variance_reduction() {
  const long burn = 1000;
  const auto net = rjnet::testing::example_network(1);
  const auto clusters = enumerate_clusters(net);
  const auto prior = ModelPrior::uniform(net.n_uncertain());
  const auto traces = example1_chains(Variant::na, 20, 10000, burn, 3);
  std::map<ModelIndicator, double> pooled;
  for (const auto& t : traces)
    for (const auto& [m, p] : derandomized_model_probs(t, burn, clusters, prior)) pooled[m] += p / 20.0;
  std::vector<std::pair<ModelIndicator, double>> ranked(pooled.begin(), pooled.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<FeaturePredicate> top;
  for (std::size_t i = 0; i < 8 && i < ranked.size(); ++i) top.push_back(model_feature(ranked[i].first));
  const auto rep = replicate_variance(traces, burn, clusters, top, prior);
  bool ok = rep.features.size() == 8;
  double worst = 0.0;
  for (const auto& f : rep.features) {
    if (f.derandomized_variance > f.raw_variance) ok = false;
    worst = std::max(worst, f.raw_variance > 0 ? f.derandomized_variance / f.raw_variance : 0.0);
  }
  return {ok, fmt("20 NA replicates x 10000 steps, top-8 models: worst derandomized/raw variance ratio %.2e", worst)};
}

Outcome example2_pathways() {
  Problem pr(example_config(2));
  pr.cfg.sampler.variant = Variant::sens_na;
  pr.cfg.sampler.n_steps = 500000;
  pr.cfg.sampler.check_reciprocity = true;
  const long min_steps = 500;
  auto ev = pr.evaluator();
  Sampler sampler(ev, pr.cfg.sampler, 0);
  std::string prev = pathway_class(pr.net, pr.net.full_model(), pr.cfg.pathways);
  long crossings = 0, first = -1;
  std::string first_dir;
  const auto trace = sampler.run(std::nullopt, [&](const TraceRecord& r) {
    const auto cur = pathway_class(pr.net, r.model, pr.cfg.pathways);
    if (r.move != MoveType::within && r.accepted && cur != prev) {
      if (crossings++ == 0) {
        first = r.step;
        first_dir = prev + "->" + cur;
      }
    }
    prev = cur;
    return crossings > 0 && r.step >= min_steps;
  });
  ReciprocityStats rs;
  add_reciprocity(rs, trace);
  const auto sc = same_cluster(trace);
  const bool ok = crossings > 0 && rs.worst <= 1e-9 && sc.rejected == 0 && sc.worst_log_accept <= 1e-12;
  return {ok, fmt("%ld accepted between-pathway moves in %zu steps (first at step %ld, %s); reciprocity %ld checked, "
                  "worst %.1e; same-EN %ld moves, %ld rejected",
                  crossings, trace.n_steps(), first, first_dir.c_str(), rs.logged, rs.worst, sc.moves, sc.rejected)};
}

struct Criterion {
  int id;
  bool nightly;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, false, cluster_counts},         {2, false, figure_one_networks},   {3, false, conservation},
      {4, false, en_equivalence},         {5, false, posterior_oracle},      {6, false, same_cluster_acceptance},
      {7, false, reciprocity},            {8, true, mixing_gain},            {9, true, full_model_probability},
      {10, false, variance_reduction},    {11, false, example2_pathways},
  };
  bool nightly = false;
  std::vector<int> chosen;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--nightly") nightly = true;
    else chosen.push_back(std::stoi(a));
  }
  int failed = 0;
  for (const auto& c : all) {
    const bool selected = chosen.empty() ? (!c.nightly || nightly)
                                         : std::find(chosen.begin(), chosen.end(), c.id) != chosen.end();
    if (!selected) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << fmt("criterion %2d: %s  ", c.id, o.pass ? "PASS" : "FAIL") << o.detail
              << fmt("  [%.1f s]", seconds_since(t0)) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
