#pragma once

// Posterior summaries from traces: raw and derandomized probabilities, ESS,
// acceptance tables, replicate variances, and the trace CSV format.

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rjnet/bayes.hpp"
#include "rjnet/error.hpp"
#include "rjnet/io.hpp"
#include "rjnet/network.hpp"
#include "rjnet/sampler.hpp"

namespace rjnet {

struct FeaturePredicate {
  std::string name;
  std::function<bool(const ModelIndicator&)> indicator;
};

inline FeaturePredicate model_feature(const ModelIndicator& m) {
  return {"model:" + m.to_string(), [m](const ModelIndicator& x) { return x == m; }};
}

inline FeaturePredicate reaction_feature(const ReactionNetwork& net, int reaction_id) {
  const auto& r = net.reaction(net.reaction_index(reaction_id));
  if (r.fixed) return {"reaction:" + std::to_string(reaction_id), [](const ModelIndicator&) { return true; }};
  const auto slot = static_cast<std::size_t>(r.uncertain_slot);
  return {"reaction:" + std::to_string(reaction_id), [slot](const ModelIndicator& x) { return x[slot]; }};
}

inline FeaturePredicate pathway_feature(const ReactionNetwork& net, const std::string& label,
                                        std::vector<PathwayRule> rules) {
  return {"pathway:" + label, [&net, label, rules = std::move(rules)](const ModelIndicator& x) {
            return pathway_class(net, x, rules) == label;
          }};
}

namespace detail {

// Records after burn-in (transition steps burn_in+1 .. n).
inline std::span<const TraceRecord> kept_records(const Trace& trace, long burn_in) {
  if (burn_in < 0) throw std::invalid_argument("burn_in must be non-negative");
  if (static_cast<std::size_t>(burn_in) >= trace.n_steps())
    throw std::invalid_argument("burn_in (" + std::to_string(burn_in) + ") must be smaller than the trace length (" +
                                std::to_string(trace.n_steps()) + ")");
  return std::span<const TraceRecord>(trace.records).subspan(static_cast<std::size_t>(burn_in) + 1);
}

}  // namespace detail

inline std::map<ModelIndicator, double> raw_model_probs(const Trace& trace, long burn_in) {
  const auto recs = detail::kept_records(trace, burn_in);
  std::map<ModelIndicator, double> out;
  for (const auto& r : recs) out[r.model] += 1.0;
  for (auto& [m, p] : out) p /= static_cast<double>(recs.size());
  return out;
}

inline std::map<EffectiveNetworkKey, double> raw_network_probs(const Trace& trace, long burn_in) {
  const auto recs = detail::kept_records(trace, burn_in);
  std::map<EffectiveNetworkKey, double> out;
  for (const auto& r : recs) out[r.en] += 1.0;
  for (auto& [k, p] : out) p /= static_cast<double>(recs.size());
  return out;
}

inline std::map<std::string, double> raw_feature_probs(const Trace& trace, long burn_in,
                                                       const std::vector<FeaturePredicate>& features) {
  std::map<std::string, double> out;
  for (const auto& f : features) out[f.name] = 0.0;
  for (const auto& [m, p] : raw_model_probs(trace, burn_in))
    for (const auto& f : features)
      if (f.indicator(m)) out[f.name] += p;
  return out;
}

namespace detail {

inline const std::vector<ModelIndicator>& cluster_members(const ClusterMap& clusters, const EffectiveNetworkKey& key) {
  auto it = clusters.find(key);
  if (it == clusters.end())
    throw Error("effective network " + key.to_string() +
                " is not in the enumerated clusters; derandomization needs a full enumeration, use the raw estimator");
  return it->second;
}

}  // namespace detail

// Rao-Blackwellized model probabilities: each visit to cluster C contributes
// p(M | C) to every member M.
inline std::map<ModelIndicator, double> derandomized_model_probs(const Trace& trace, long burn_in,
                                                                 const ClusterMap& clusters,
                                                                 const ModelPrior& model_prior) {
  std::map<ModelIndicator, double> out;
  for (const auto& [key, freq] : raw_network_probs(trace, burn_in)) {
    const auto& members = detail::cluster_members(clusters, key);
    std::vector<double> w;
    double z = 0.0;
    for (const auto& m : members) z += w.emplace_back(std::exp(model_prior.log_prob(m)));
    for (std::size_t i = 0; i < members.size(); ++i) out[members[i]] += freq * w[i] / z;
  }
  return out;
}

inline std::map<std::string, double> derandomized_feature_probs(const Trace& trace, long burn_in,
                                                                const ClusterMap& clusters,
                                                                const std::vector<FeaturePredicate>& features,
                                                                const ModelPrior& model_prior) {
  std::map<std::string, double> out;
  for (const auto& f : features) out[f.name] = 0.0;
  for (const auto& [m, p] : derandomized_model_probs(trace, burn_in, clusters, model_prior))
    for (const auto& f : features)
      if (f.indicator(m)) out[f.name] += p;
  return out;
}

struct EssResult {
  double ess = 0.0;
  bool degenerate = false;
};

// Autocovariances at all lags (biased, 1/N), by FFT.
inline std::vector<double> autocovariance(std::span<const double> x) {
  const std::size_t n = x.size();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  std::vector<double> padded(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& c : spec) c = std::norm(c);
  std::vector<double> back;
  fft.inv(back, spec);
  back.resize(n);
  for (double& v : back) v /= static_cast<double>(n);
  return back;
}

// N / (1 + 2 sum rho_t), truncated by Geyer's initial positive sequence.
inline EssResult ess(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 10) throw std::invalid_argument("ess needs a series of length >= 10");
  if (std::all_of(series.begin(), series.end(), [&](double v) { return v == series[0]; }))
    return {static_cast<double>(n), true};
  const auto gamma = autocovariance(series);
  const double g0 = gamma[0];
  double sum_pairs = 0.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = gamma[2 * k] + gamma[2 * k + 1];
    if (pair <= 0.0) break;
    sum_pairs += pair;
  }
  const double tau = -1.0 + 2.0 * sum_pairs / g0;  // integrated autocorrelation time
  const double e = static_cast<double>(n) / std::max(tau, 1.0);
  return {std::min(e, static_cast<double>(n)), false};
}

// Standard error of the mean of a correlated series by non-overlapping batch means.
inline double batch_means_se(std::span<const double> series, std::size_t n_batches = 50) {
  const std::size_t len = series.size() / n_batches;
  if (len < 2) throw std::invalid_argument("series too short for batch means");
  std::vector<double> means(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b)
    means[b] = std::accumulate(series.begin() + static_cast<long>(b * len), series.begin() + static_cast<long>((b + 1) * len),
                               0.0) /
               static_cast<double>(len);
  const double mu = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(n_batches);
  double ss = 0.0;
  for (double m : means) ss += (m - mu) * (m - mu);
  return std::sqrt(ss / static_cast<double>(n_batches - 1) / static_cast<double>(n_batches));
}

// Post-burn-in series of the number of uncertain reactions in the model.
inline std::vector<double> model_size_series(const Trace& trace, long burn_in) {
  std::vector<double> out;
  for (const auto& r : detail::kept_records(trace, burn_in)) out.push_back(static_cast<double>(r.model.count()));
  return out;
}

struct Rate {
  long attempted = 0;
  long accepted = 0;
  double rate() const { return attempted > 0 ? static_cast<double>(accepted) / static_cast<double>(attempted) : 0.0; }
};

struct AcceptanceReport {
  std::map<std::string, Rate> per_move;
  Rate between_model;
  Rate between_cluster;
  Rate between_pathway;
  long construction_failures = 0;
};

// Categories use the state before each step and the proposal made at that step.
inline AcceptanceReport acceptance_report(const Trace& trace, const ReactionNetwork* net = nullptr,
                                          const std::vector<PathwayRule>& rules = {}) {
  AcceptanceReport rep;
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    const auto& prev = trace.records[i - 1];
    const auto& r = trace.records[i];
    auto bump = [&](Rate& rate) {
      ++rate.attempted;
      if (r.accepted) ++rate.accepted;
    };
    bump(rep.per_move[to_string(r.move)]);
    if (r.move == MoveType::within) continue;
    if (r.construction_failed) ++rep.construction_failures;
    bump(rep.between_model);
    if (!(r.proposed_en == prev.en)) bump(rep.between_cluster);
    if (net && !rules.empty() && pathway_class(*net, prev.model, rules) != pathway_class(*net, r.proposed, rules))
      bump(rep.between_pathway);
  }
  return rep;
}

struct FeatureEstimate {
  std::string name;
  double raw_mean = 0.0;
  double derandomized_mean = 0.0;
  double raw_variance = 0.0;
  double derandomized_variance = 0.0;
  std::size_t replicates = 0;
};

struct EstimateReport {
  std::vector<FeatureEstimate> features;
};

inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("sample variance needs at least 2 values");
  const double mu = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return ss / static_cast<double>(v.size() - 1);
}

// Across-replicate mean and variance of raw and derandomized estimates.
inline EstimateReport replicate_variance(const std::vector<Trace>& traces, long burn_in, const ClusterMap& clusters,
                                         const std::vector<FeaturePredicate>& features, const ModelPrior& model_prior) {
  if (traces.size() < 2) throw std::invalid_argument("replicate_variance needs at least 2 traces");
  std::vector<std::map<std::string, double>> raw, der;
  for (const auto& t : traces) {
    raw.push_back(raw_feature_probs(t, burn_in, features));
    der.push_back(derandomized_feature_probs(t, burn_in, clusters, features, model_prior));
  }
  EstimateReport rep;
  for (const auto& f : features) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      a.push_back(raw[i].at(f.name));
      b.push_back(der[i].at(f.name));
    }
    FeatureEstimate e;
    e.name = f.name;
    e.replicates = traces.size();
    e.raw_mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    e.derandomized_mean = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
    e.raw_variance = sample_variance(a);
    e.derandomized_variance = sample_variance(b);
    rep.features.push_back(std::move(e));
  }
  return rep;
}

// Trace CSV. The first data row (step 0, move "init") is the initial state.
inline const char* trace_csv_header =
    "step,model_bits,en_id,log_post,move_type,accepted,proposed_bits,proposed_en_id,log_accept,n_updated,"
    "construction_failed,reciprocity";

inline std::string trace_csv(const Trace& trace) {
  std::ostringstream os;
  os << trace_csv_header << '\n';
  for (const auto& r : trace.records) {
    os << r.step << ',' << r.model.to_string() << ',' << r.en.to_string() << ',' << detail::format_double(r.log_post)
       << ',' << to_string(r.move) << ',' << (r.accepted ? 1 : 0) << ',' << r.proposed.to_string() << ','
       << r.proposed_en.to_string() << ',' << detail::format_double(r.log_accept) << ',' << r.n_updated << ','
       << (r.construction_failed ? 1 : 0) << ',' << detail::format_double(r.reciprocity) << '\n';
  }
  return os.str();
}

inline double parse_csv_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return detail::parse_double(s, where);
}

inline Trace parse_trace_csv(const std::string& text, const std::string& origin = "trace") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || detail::split(line, ',') != detail::split(trace_csv_header, ','))
    throw ValidationError({origin + ": unexpected trace header"});
  Trace t;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto c = detail::split(line, ',');
    const std::string where = origin + " row " + std::to_string(row);
    if (c.size() != 12) throw ValidationError({where + " has " + std::to_string(c.size()) + " cells, expected 12"});
    TraceRecord r;
    try {
      r.step = std::stol(c[0]);
      r.model = ModelIndicator::from_string(c[1]);
      r.en = EffectiveNetworkKey::from_string(c[2]);
      r.log_post = parse_csv_double(c[3], where);
      r.move = parse_move_type(c[4]);
      r.accepted = c[5] == "1";
      r.proposed = ModelIndicator::from_string(c[6]);
      r.proposed_en = EffectiveNetworkKey::from_string(c[7]);
      r.log_accept = parse_csv_double(c[8], where);
      r.n_updated = std::stoi(c[9]);
      r.construction_failed = c[10] == "1";
      r.reciprocity = parse_csv_double(c[11], where);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ValidationError({where + ": " + e.what()});
    }
    if (r.step != static_cast<long>(t.records.size()))
      throw ValidationError({where + ": steps must be consecutive from 0"});
    if (r.move != MoveType::init) {
      auto& counter = t.counters[to_string(r.move)];
      ++counter.attempted;
      if (r.accepted) ++counter.accepted;
      if (r.construction_failed) ++t.construction_failures;
    }
    t.records.push_back(std::move(r));
  }
  if (t.records.empty()) throw ValidationError({origin + ": trace has no records"});
  return t;
}

inline std::string snapshot_csv(const ReactionNetwork& net, const Trace& trace) {
  std::ostringstream os;
  os << "step";
  for (const auto& c : net.coordinates())
    os << ",k" << net.reaction(c.reaction).id << (c.reverse ? "_reverse" : "");
  os << '\n';
  for (const auto& [step, x] : trace.snapshots) {
    os << step;
    for (double v : x) os << ',' << detail::format_double(v);
    os << '\n';
  }
  return os.str();
}

}  // namespace rjnet
