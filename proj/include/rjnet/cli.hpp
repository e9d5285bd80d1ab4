#pragma once

// Run configuration, manifests, and the enumerate / simulate / run / report commands.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "rjnet/bayes.hpp"
#include "rjnet/error.hpp"
#include "rjnet/io.hpp"
#include "rjnet/network.hpp"
#include "rjnet/postprocess.hpp"
#include "rjnet/sampler.hpp"

#ifndef RJNET_VERSION
#define RJNET_VERSION "unknown"
#endif

namespace rjnet {

namespace fs = std::filesystem;

inline constexpr const char* output_dir_env = "RJNET_OUTPUT_DIR";

struct SynthesisConfig {
  std::vector<double> times;
  double noise_variance = 0.0;
  std::string generating_model = "full";      // "full", a bit string, or ids joined by '-'
  std::map<std::string, double> params;       // "<id>" or "<id>_reverse" -> log10 k
  std::uint64_t seed = 1;
};

struct RunConfig {
  fs::path base_dir;  // relative paths resolve against this
  std::string network;
  std::optional<std::string> dataset;
  double noise_variance = 0.0;  // with dataset
  std::optional<SynthesisConfig> synthesis;
  SamplerConfig sampler;
  IntegratorConfig integrator;
  OptimizerConfig optimizer;
  FiniteDifferenceConfig fd;
  std::vector<double> model_prior;  // empty means uniform
  std::vector<PathwayRule> pathways;
  std::string output_dir = "rjnet_out";
  int replicates = 1;
  int threads = 0;  // 0 = available parallelism

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
  fs::path output_path() const { return resolve(output_dir); }
};

// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

template <class T>
constexpr const char* json_type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  else if constexpr (std::is_integral_v<T>) return "an integer";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else if constexpr (std::is_same_v<T, std::string>) return "a string";
  else return "an array";
}

// Reads fields of one JSON object, collecting type errors and unknown keys.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string prefix, std::vector<std::string>& errors)
      : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {
    if (!obj_.is_object()) errors_.push_back(where_self() + " must be an object");
  }

  bool has(const char* key) const { return obj_.is_object() && obj_.contains(key); }
  std::string where(const char* key) const { return prefix_ + key; }

  template <class T>
  bool get(const char* key, T& out) {
    if (!has(key)) return false;
    seen_.insert(key);
    const json& v = obj_.at(key);
    bool ok;
    if constexpr (std::is_same_v<T, bool>) ok = v.is_boolean();
    else if constexpr (std::is_integral_v<T>) ok = v.is_number_integer() && (std::is_signed_v<T> || v.get<long long>() >= 0);
    else if constexpr (std::is_floating_point_v<T>) ok = v.is_number();
    else if constexpr (std::is_same_v<T, std::string>) ok = v.is_string();
    else ok = v.is_array();
    if (ok) {
      try {
        out = v.get<T>();
        return true;
      } catch (const std::exception&) {
      }
    }
    errors_.push_back(where(key) + " must be " + json_type_name<T>());
    return false;
  }

  const json* child(const char* key) {
    if (!has(key)) return nullptr;
    seen_.insert(key);
    return &obj_.at(key);
  }

  void finish() const {
    if (!obj_.is_object()) return;
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) errors_.push_back("unknown field " + prefix_ + k);
  }

 private:
  std::string where_self() const { return prefix_.empty() ? "config" : prefix_.substr(0, prefix_.size() - 1); }

  const json& obj_;
  std::string prefix_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline void read_sampler(const json& j, SamplerConfig& s, std::vector<std::string>& errors) {
  FieldReader r(j, "sampler.", errors);
  std::string variant;
  if (r.get("variant", variant)) {
    try {
      s.variant = parse_variant(variant);
    } catch (const ValidationError& e) {
      errors.insert(errors.end(), e.violations().begin(), e.violations().end());
    }
  }
  r.get("beta", s.beta);
  r.get("n_steps", s.n_steps);
  r.get("seed", s.seed);
  r.get("poisson_mean", s.poisson_mean);
  r.get("n_sens_draws", s.n_sens_draws);
  r.get("sens_step", s.sens_step);
  r.get("rw_scale", s.rw_scale);
  r.get("adapt", s.adapt);
  r.get("target_accept", s.target_accept);
  r.get("burn_in", s.burn_in);
  r.get("snapshot_every", s.snapshot_every);
  r.get("check_reciprocity", s.check_reciprocity);
  r.finish();
}

inline json sampler_json(const SamplerConfig& s) {
  return {{"variant", to_string(s.variant)}, {"beta", s.beta},
          {"n_steps", s.n_steps},            {"seed", s.seed},
          {"poisson_mean", s.poisson_mean},  {"n_sens_draws", s.n_sens_draws},
          {"sens_step", s.sens_step},        {"rw_scale", s.rw_scale},
          {"adapt", s.adapt},                {"target_accept", s.target_accept},
          {"burn_in", s.burn_in},            {"snapshot_every", s.snapshot_every},
          {"check_reciprocity", s.check_reciprocity}};
}

inline std::vector<int> parse_id_list(const std::string& s) {
  std::vector<int> ids;
  for (const auto& part : split(s, '-')) ids.push_back(std::stoi(part));
  return ids;
}

}  // namespace detail

// Parses a config document. Structural and type errors are collected and thrown
// together; reaction-id checks need the network and live in validate_run_config.
inline RunConfig parse_run_config(const json& j, const fs::path& base_dir = ".") {
  using detail::FieldReader;
  std::vector<std::string> errors;
  RunConfig c;
  c.base_dir = base_dir;
  FieldReader top(j, "", errors);
  if (!top.get("network", c.network)) errors.push_back("network is required");

  const json* ds = top.child("dataset");
  const json* syn = top.child("synthesis");
  if ((ds != nullptr) == (syn != nullptr))
    errors.push_back("exactly one of dataset and synthesis must be present");
  if (ds) {
    FieldReader r(*ds, "dataset.", errors);
    std::string path;
    if (r.get("path", path)) c.dataset = path;
    else errors.push_back("dataset.path is required");
    if (!r.get("noise_variance", c.noise_variance)) errors.push_back("dataset.noise_variance is required");
    else if (!(c.noise_variance > 0.0)) errors.push_back("dataset.noise_variance must be positive");
    r.finish();
  }
  if (syn) {
    FieldReader r(*syn, "synthesis.", errors);
    SynthesisConfig s;
    if (const json* t = r.child("times")) {
      if (t->is_array()) {
        try {
          s.times = t->get<std::vector<double>>();
        } catch (const std::exception&) {
          errors.push_back("synthesis.times must be an array of numbers");
        }
      } else if (t->is_object()) {
        FieldReader tr(*t, "synthesis.times.", errors);
        double dt = 0.0;
        int count = 0;
        if (!tr.get("dt", dt) || !(dt > 0.0)) errors.push_back("synthesis.times.dt must be a positive number");
        if (!tr.get("count", count) || count < 1) errors.push_back("synthesis.times.count must be a positive integer");
        tr.finish();
        if (dt > 0.0 && count > 0) s.times = uniform_times(dt, count);
      } else {
        errors.push_back("synthesis.times must be an array or {dt, count}");
      }
    } else {
      errors.push_back("synthesis.times is required");
    }
    if (!r.get("noise_variance", s.noise_variance)) errors.push_back("synthesis.noise_variance is required");
    else if (!(s.noise_variance >= 0.0)) errors.push_back("synthesis.noise_variance must be non-negative");
    r.get("generating_model", s.generating_model);
    if (const json* p = r.child("params")) {
      if (!p->is_object()) errors.push_back("synthesis.params must be an object of log10 rate constants");
      else
        for (const auto& [k, v] : p->items()) {
          if (v.is_number()) s.params[k] = v.get<double>();
          else errors.push_back("synthesis.params." + k + " must be a number");
        }
    }
    r.get("seed", s.seed);
    r.finish();
    c.synthesis = std::move(s);
  }

  if (const json* s = top.child("sampler")) detail::read_sampler(*s, c.sampler, errors);
  if (const json* s = top.child("integrator")) {
    FieldReader r(*s, "integrator.", errors);
    r.get("rel_tol", c.integrator.rel_tol);
    r.get("abs_tol", c.integrator.abs_tol);
    r.get("max_steps", c.integrator.max_steps);
    r.finish();
  }
  if (const json* s = top.child("optimizer")) {
    FieldReader r(*s, "optimizer.", errors);
    r.get("n_starts", c.optimizer.n_starts);
    r.get("max_evaluations", c.optimizer.max_evaluations);
    r.get("grad_tol", c.optimizer.grad_tol);
    r.get("fd_step", c.optimizer.fd_step);
    r.finish();
  }
  if (const json* s = top.child("finite_difference")) {
    FieldReader r(*s, "finite_difference.", errors);
    r.get("h", c.fd.h);
    r.finish();
  }
  top.get("model_prior", c.model_prior);
  if (const json* p = top.child("pathways")) {
    if (!p->is_array()) errors.push_back("pathways must be an array");
    else
      for (std::size_t i = 0; i < p->size(); ++i) {
        FieldReader r((*p)[i], "pathways[" + std::to_string(i) + "].", errors);
        PathwayRule rule;
        if (!r.get("label", rule.label) || rule.label.empty())
          errors.push_back(r.where("label") + " must be a non-empty string");
        r.get("require_all", rule.require_all);
        r.get("exclude_any", rule.exclude_any);
        r.finish();
        c.pathways.push_back(std::move(rule));
      }
  }
  top.get("output_dir", c.output_dir);
  top.get("replicates", c.replicates);
  top.get("threads", c.threads);
  top.finish();

  for (auto& v : c.sampler.violations()) errors.push_back(std::move(v));
  for (auto& v : c.integrator.violations()) errors.push_back(std::move(v));
  for (auto& v : c.optimizer.violations()) errors.push_back(std::move(v));
  for (auto& v : c.fd.violations()) errors.push_back(std::move(v));
  if (c.replicates < 1) errors.push_back("replicates must be at least 1");
  if (c.threads < 0) errors.push_back("threads must be non-negative");
  if (c.sampler.n_steps > 0 && c.sampler.burn_in >= c.sampler.n_steps)
    errors.push_back("sampler.burn_in must be smaller than sampler.n_steps");
  if (!errors.empty()) throw ValidationError(errors);
  return c;
}

// Every default materialized; key order is canonical so the dump is hashable.
inline json run_config_json(const RunConfig& c) {
  json j;
  j["network"] = c.network;
  if (c.dataset) j["dataset"] = {{"path", *c.dataset}, {"noise_variance", c.noise_variance}};
  if (c.synthesis) {
    json p = json::object();
    for (const auto& [k, v] : c.synthesis->params) p[k] = v;
    j["synthesis"] = {{"times", c.synthesis->times},
                      {"noise_variance", c.synthesis->noise_variance},
                      {"generating_model", c.synthesis->generating_model},
                      {"params", p},
                      {"seed", c.synthesis->seed}};
  }
  j["sampler"] = detail::sampler_json(c.sampler);
  j["integrator"] = {{"rel_tol", c.integrator.rel_tol}, {"abs_tol", c.integrator.abs_tol},
                     {"max_steps", c.integrator.max_steps}};
  j["optimizer"] = {{"n_starts", c.optimizer.n_starts}, {"max_evaluations", c.optimizer.max_evaluations},
                    {"grad_tol", c.optimizer.grad_tol}, {"fd_step", c.optimizer.fd_step}};
  j["finite_difference"] = {{"h", c.fd.h}};
  j["model_prior"] = c.model_prior;
  json rules = json::array();
  for (const auto& r : c.pathways)
    rules.push_back({{"label", r.label}, {"require_all", r.require_all}, {"exclude_any", r.exclude_any}});
  j["pathways"] = rules;
  j["output_dir"] = c.output_dir;
  j["replicates"] = c.replicates;
  j["threads"] = c.threads;
  return j;
}

inline std::string config_hash(const RunConfig& c) {
  json j = run_config_json(c);
  // Scheduling and output location do not change results.
  j.erase("threads");
  j.erase("output_dir");
  return fnv1a_hex(j.dump());
}

// Flags fill fields the config file leaves unset; the environment variable
// then overrides the output directory.
struct ConfigOverrides {
  std::map<std::string, json> sampler;  // sampler field -> value
  std::optional<int> replicates;
  std::optional<int> threads;
  std::optional<std::string> output_dir;
};

inline json apply_overrides(json j, const ConfigOverrides& o) {
  if (!j.is_object()) return j;
  for (const auto& [k, v] : o.sampler) {
    if (!j.contains("sampler")) j["sampler"] = json::object();
    if (j["sampler"].is_object() && !j["sampler"].contains(k)) j["sampler"][k] = v;
  }
  if (o.replicates && !j.contains("replicates")) j["replicates"] = *o.replicates;
  if (o.threads && !j.contains("threads")) j["threads"] = *o.threads;
  if (o.output_dir && !j.contains("output_dir")) j["output_dir"] = *o.output_dir;
  return j;
}

inline RunConfig load_run_config(const std::string& path, const ConfigOverrides& o = {}) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError({"\"" + path + "\" is not valid JSON: " + e.what()});
  }
  auto c = parse_run_config(apply_overrides(std::move(j), o), fs::path(path).parent_path());
  if (const char* env = std::getenv(output_dir_env); env && *env) c.output_dir = fs::absolute(env).string();
  return c;
}

// Resolves the generating model of a synthesis block.
inline ModelIndicator generating_model(const ReactionNetwork& net, const std::string& s) {
  const std::size_t n = net.n_uncertain();
  if (s == "full") return ModelIndicator(n, true);
  if (s == "none") return ModelIndicator(n, false);
  if (s.size() == n && s.find_first_not_of("01") == std::string::npos) return ModelIndicator::from_string(s);
  std::vector<int> ids;
  try {
    ids = detail::parse_id_list(s);
  } catch (const std::exception&) {
    throw ValidationError({"synthesis.generating_model \"" + s + "\" is not full, none, a " + std::to_string(n) +
                           "-bit string, or reaction ids joined by '-'"});
  }
  std::vector<std::string> errors;
  for (int id : ids) {
    if (!net.has_reaction(id)) errors.push_back("synthesis.generating_model names unknown reaction " + std::to_string(id));
    else if (net.reaction(net.reaction_index(id)).fixed)
      errors.push_back("synthesis.generating_model names fixed reaction " + std::to_string(id));
  }
  if (!errors.empty()) throw ValidationError(errors);
  return net.model_from_ids(ids);
}

inline RateParameters synthesis_params(const ReactionNetwork& net, const SynthesisConfig& s) {
  auto p = RateParameters::base(net);
  std::vector<std::string> errors;
  for (const auto& [key, v] : s.params) {
    const bool rev = key.ends_with("_reverse");
    int id = 0;
    try {
      id = std::stoi(rev ? key.substr(0, key.size() - 8) : key);
    } catch (const std::exception&) {
      errors.push_back("synthesis.params key \"" + key + "\" is not a reaction id");
      continue;
    }
    if (!net.has_reaction(id)) {
      errors.push_back("synthesis.params names unknown reaction " + std::to_string(id));
      continue;
    }
    const auto idx = static_cast<std::size_t>(net.reaction_index(id));
    if (rev && !net.reaction(static_cast<int>(idx)).reversible) {
      errors.push_back("synthesis.params." + key + ": reaction " + std::to_string(id) + " is not reversible");
      continue;
    }
    (rev ? p.log10_k_reverse : p.log10_k)[idx] = v;
  }
  if (!errors.empty()) throw ValidationError(errors);
  return p;
}

// Reaction-id and dimension checks against the loaded network.
inline void validate_run_config(const RunConfig& c, const ReactionNetwork& net) {
  std::vector<std::string> errors;
  for (std::size_t i = 0; i < c.pathways.size(); ++i) {
    for (const auto* list : {&c.pathways[i].require_all, &c.pathways[i].exclude_any})
      for (int id : *list)
        if (!net.has_reaction(id))
          errors.push_back("pathways[" + std::to_string(i) + "] names unknown reaction " + std::to_string(id));
  }
  if (!c.model_prior.empty())
    for (auto& v : ModelPrior{c.model_prior}.violations(net.n_uncertain())) errors.push_back(std::move(v));
  if (c.synthesis) {
    try {
      generating_model(net, c.synthesis->generating_model);
    } catch (const ValidationError& e) {
      errors.insert(errors.end(), e.violations().begin(), e.violations().end());
    }
    try {
      synthesis_params(net, *c.synthesis);
    } catch (const ValidationError& e) {
      errors.insert(errors.end(), e.violations().begin(), e.violations().end());
    }
  }
  if (!errors.empty()) throw ValidationError(errors);
}

inline ReactionNetwork load_config_network(const RunConfig& c) {
  auto net = load_network(c.resolve(c.network).string());
  validate_run_config(c, net);
  return net;
}

inline Dataset synthesize(const ReactionNetwork& net, const RunConfig& c) {
  const auto& s = *c.synthesis;
  const auto model = generating_model(net, s.generating_model);
  const auto params = synthesis_params(net, s);
  std::mt19937_64 rng(s.seed);
  return simulate_dataset(net, model, params, s.times, s.noise_variance, &rng, c.integrator);
}

// Synthesized data keep the synthesis noise variance as the likelihood variance;
// a zero-noise synthesis cannot drive a likelihood.
inline Dataset load_config_dataset(const ReactionNetwork& net, const RunConfig& c) {
  if (c.dataset) return read_dataset_csv(net, c.resolve(*c.dataset).string(), c.noise_variance);
  auto d = synthesize(net, c);
  if (!(d.noise_variance > 0.0))
    throw ValidationError({"synthesis.noise_variance must be positive to run the sampler"});
  return d;
}

inline std::string replicate_trace_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trace_%03d.csv", i);
  return buf;
}

inline std::string replicate_snapshot_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "params_%03d.csv", i);
  return buf;
}

inline json file_entry(const fs::path& dir, const std::string& name) {
  const auto bytes = detail::read_file((dir / name).string());
  return {{"path", name}, {"bytes", bytes.size()}, {"fnv1a64", fnv1a_hex(bytes)}};
}

inline json rate_json(const Rate& r) {
  return {{"attempted", r.attempted}, {"accepted", r.accepted}, {"rate", r.rate()}};
}

inline json acceptance_json(const AcceptanceReport& a) {
  json per = json::object();
  for (const auto& [k, r] : a.per_move) per[k] = rate_json(r);
  return {{"per_move", per},
          {"between_model", rate_json(a.between_model)},
          {"between_cluster", rate_json(a.between_cluster)},
          {"between_pathway", rate_json(a.between_pathway)},
          {"construction_failures", a.construction_failures}};
}

// ---------------------------------------------------------------- enumerate

inline json enumerate_report(const ReactionNetwork& net, std::size_t cap = default_enumeration_cap) {
  const auto clusters = enumerate_clusters(net, cap);
  std::size_t models = 0;
  json list = json::array();
  for (const auto& [key, members] : clusters) {
    models += members.size();
    list.push_back({{"en", key.to_string()}, {"reactions", key.reaction_ids}, {"models", members.size()}});
  }
  return {{"network", net.spec().name},
          {"uncertain_reactions", net.n_uncertain()},
          {"models", models},
          {"clusters", clusters.size()},
          {"nonempty_networks", count_nonempty_networks(clusters)},
          {"networks", list}};
}

inline void print_enumerate(const json& rep, std::ostream& os) {
  os << "clusters " << rep["clusters"].get<std::size_t>() << '\n'
     << "models " << rep["models"].get<std::size_t>() << '\n'
     << "nonempty_networks " << rep["nonempty_networks"].get<std::size_t>() << '\n';
  for (const auto& c : rep["networks"])
    os << "cluster models=" << c["models"].get<std::size_t>() << " en=" << c["en"].get<std::string>() << '\n';
}

// ------------------------------------------------------------------ simulate

inline fs::path cmd_simulate(const RunConfig& c, std::optional<fs::path> out = std::nullopt) {
  if (!c.synthesis) throw ValidationError({"simulate needs a synthesis block"});
  const auto net = load_config_network(c);
  const auto data = synthesize(net, c);
  const fs::path path = out ? *out : c.output_path() / "data.csv";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  detail::write_file(path.string(), dataset_csv(net, data));
  return path;
}

// ----------------------------------------------------------------------- run

struct ReplicateResult {
  int index = 0;
  bool ok = false;
  std::string error;
  double wall_seconds = 0.0;
  json summary;
};

struct RunResult {
  fs::path manifest;
  std::vector<ReplicateResult> replicates;
  bool all_ok() const {
    return std::all_of(replicates.begin(), replicates.end(), [](const auto& r) { return r.ok; });
  }
};

inline json read_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) throw ValidationError({"no manifest at " + path.string() + "; run the sampler first"});
  return json::parse(detail::read_file(path.string()));
}

inline void write_manifest(const fs::path& dir, const json& m) {
  detail::write_file((dir / "manifest.json").string(), m.dump(2) + "\n");
}

// Runs every replicate on a worker pool; each replicate owns its evaluator
// and writes only its own files. Failed replicates are recorded, not fatal.
inline RunResult cmd_run(const RunConfig& c, std::ostream* log = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto net = load_config_network(c);
  const auto data = load_config_dataset(net, c);
  const fs::path dir = c.output_path();
  fs::create_directories(dir);

  std::vector<std::string> files;
  if (c.synthesis) {
    detail::write_file((dir / "data.csv").string(), dataset_csv(net, data));
    files.push_back("data.csv");
  }

  std::mutex log_mutex;
  std::vector<ReplicateResult> results(static_cast<std::size_t>(c.replicates));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < c.replicates; i = next++) {
      auto& res = results[static_cast<std::size_t>(i)];
      res.index = i;
      const auto start = clock::now();
      try {
        PosteriorEvaluator ev(net, data, c.integrator,
                              c.model_prior.empty() ? ModelPrior{} : ModelPrior{c.model_prior}, c.optimizer, c.fd);
        const auto trace = run_chain(ev, c.sampler, static_cast<std::uint64_t>(i));
        detail::write_file((dir / replicate_trace_name(i)).string(), trace_csv(trace));
        if (c.sampler.snapshot_every > 0)
          detail::write_file((dir / replicate_snapshot_name(i)).string(), snapshot_csv(net, trace));
        const auto acc = acceptance_report(trace, &net, c.pathways);
        const auto& st = ev.stats();
        res.summary = {{"acceptance", acceptance_json(acc)},
                       {"final_model", trace.records.back().model.to_string()},
                       {"likelihood_solves", st.likelihood_solves},
                       {"gaussian_builds", st.gaussian_builds}};
        res.ok = true;
      } catch (const std::exception& e) {
        res.error = e.what();
      }
      res.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
      if (log) {
        std::lock_guard lock(log_mutex);
        *log << "replicate " << i << (res.ok ? " done" : " failed: " + res.error) << " (" << res.wall_seconds
             << " s)\n";
      }
    }
  };
  int n_threads = c.threads > 0 ? c.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_threads = std::min(n_threads, c.replicates);
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }

  json reps = json::array();
  for (const auto& r : results) {
    json e = {{"index", r.index},
              {"chain_index", r.index},
              {"seed", c.sampler.seed},
              {"status", r.ok ? "ok" : "failed"},
              {"wall_seconds", r.wall_seconds}};
    if (r.ok) {
      e["trace"] = replicate_trace_name(r.index);
      e.update(r.summary);
      files.push_back(replicate_trace_name(r.index));
      if (c.sampler.snapshot_every > 0) files.push_back(replicate_snapshot_name(r.index));
    } else {
      e["error"] = r.error;
    }
    reps.push_back(std::move(e));
  }
  json file_list = json::array();
  for (const auto& f : files) file_list.push_back(file_entry(dir, f));
  const json inputs = {
      {"network", fnv1a_hex(detail::read_file(c.resolve(c.network).string()))},
      {"dataset", fnv1a_hex(dataset_csv(net, data))},
  };
  const json manifest = {{"tool", "rjnet"},
                         {"version", RJNET_VERSION},
                         {"compiler", __VERSION__},
                         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                       "." + std::to_string(EIGEN_MINOR_VERSION)},
                         {"config_hash", config_hash(c)},
                         {"config", run_config_json(c)},
                         {"input_hashes", inputs},
                         {"threads", n_threads},
                         {"wall_seconds", std::chrono::duration<double>(clock::now() - t0).count()},
                         {"replicates", reps},
                         {"files", file_list}};
  write_manifest(dir, manifest);
  return {dir / "manifest.json", std::move(results)};
}

// -------------------------------------------------------------------- report

struct ReportOptions {
  std::size_t top_models = 20;
};

// Reads the traces listed in the manifest, checks they belong to this config,
// and writes report.json plus CSV tables next to them.
inline json cmd_report(const RunConfig& c, const ReportOptions& opt = {}) {
  const auto net = load_config_network(c);
  const fs::path dir = c.output_path();
  json manifest = read_manifest(dir);
  const auto hash = config_hash(c);
  if (manifest.value("config_hash", "") != hash)
    throw ValidationError({"traces in " + dir.string() + " were produced by config " +
                           manifest.value("config_hash", "?") + ", not " + hash});

  std::vector<Trace> traces;
  std::vector<int> indices;
  for (const auto& r : manifest["replicates"]) {
    if (r["status"] != "ok") continue;
    const std::string name = r["trace"];
    const auto text = detail::read_file((dir / name).string());
    for (const auto& f : manifest["files"])
      if (f["path"] == name && f["fnv1a64"] != fnv1a_hex(text))
        throw ValidationError({name + " does not match its manifest hash"});
    traces.push_back(parse_trace_csv(text, name));
    indices.push_back(r["index"]);
  }
  if (traces.empty()) throw ValidationError({"no completed replicates to report on"});
  const long burn_in = c.sampler.burn_in;

  std::optional<ClusterMap> clusters;
  if (net.n_uncertain() <= default_enumeration_cap) clusters = enumerate_clusters(net);
  const ModelPrior prior = c.model_prior.empty() ? ModelPrior::uniform(net.n_uncertain()) : ModelPrior{c.model_prior};

  // Pooled estimates average the per-replicate estimates.
  std::map<ModelIndicator, double> raw, der;
  std::map<EffectiveNetworkKey, double> net_probs;
  json reps = json::array();
  const double w = 1.0 / static_cast<double>(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    for (const auto& [m, p] : raw_model_probs(t, burn_in)) raw[m] += w * p;
    for (const auto& [k, p] : raw_network_probs(t, burn_in)) net_probs[k] += w * p;
    if (clusters)
      for (const auto& [m, p] : derandomized_model_probs(t, burn_in, *clusters, prior)) der[m] += w * p;
    const auto sizes = model_size_series(t, burn_in);
    json e = {{"index", indices[i]},
              {"kept_steps", sizes.size()},
              {"mean_reaction_count", std::accumulate(sizes.begin(), sizes.end(), 0.0) / static_cast<double>(sizes.size())},
              {"acceptance", acceptance_json(acceptance_report(t, &net, c.pathways))}};
    if (sizes.size() >= 10) {
      const auto es = ess(sizes);
      e["ess_reaction_count"] = es.ess;
      e["ess_degenerate"] = es.degenerate;
    }
    if (sizes.size() >= 100) e["mcse_reaction_count"] = batch_means_se(sizes);
    reps.push_back(std::move(e));
  }

  auto pathway_of = [&](const ModelIndicator& m) {
    return c.pathways.empty() ? std::string() : pathway_class(net, m, c.pathways);
  };

  std::vector<std::pair<ModelIndicator, double>> ranked(raw.begin(), raw.end());
  if (clusters)
    for (const auto& [m, p] : der)
      if (!raw.count(m)) ranked.emplace_back(m, 0.0);
  auto key_of = [&](const ModelIndicator& m) { return clusters ? der[m] : raw[m]; };
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](const auto& a, const auto& b) { return key_of(a.first) > key_of(b.first); });

  std::ostringstream models_csv;
  models_csv << "model_bits,en_id,pathway,raw,derandomized\n";
  json top = json::array();
  for (const auto& [m, p] : ranked) {
    const auto en = effective_network(net, m).to_string();
    const std::string d = clusters ? detail::format_double(der[m]) : "";
    models_csv << m.to_string() << ',' << en << ',' << pathway_of(m) << ',' << detail::format_double(raw[m]) << ','
               << d << '\n';
    if (top.size() < opt.top_models) {
      json e = {{"model", m.to_string()}, {"en", en}, {"raw", raw[m]}};
      if (clusters) e["derandomized"] = der[m];
      if (!c.pathways.empty()) e["pathway"] = pathway_of(m);
      top.push_back(std::move(e));
    }
  }

  std::ostringstream nets_csv;
  nets_csv << "en_id,probability\n";
  for (const auto& [k, p] : net_probs) nets_csv << k.to_string() << ',' << detail::format_double(p) << '\n';

  // Features: each reaction, each pathway, and the top models.
  std::vector<FeaturePredicate> features;
  for (int id : net.uncertain_ids()) features.push_back(reaction_feature(net, id));
  std::vector<std::string> labels;
  for (const auto& r : c.pathways)
    if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) labels.push_back(r.label);
  if (!c.pathways.empty()) labels.push_back(default_pathway_label);
  for (const auto& l : labels) features.push_back(pathway_feature(net, l, c.pathways));
  for (std::size_t i = 0; i < ranked.size() && i < 8; ++i) features.push_back(model_feature(ranked[i].first));

  std::ostringstream feats_csv;
  feats_csv << "feature,raw_mean,derandomized_mean,raw_variance,derandomized_variance,replicates\n";
  json feats = json::array();
  if (clusters && traces.size() >= 2) {
    for (const auto& f : replicate_variance(traces, burn_in, *clusters, features, prior).features) {
      feats_csv << f.name << ',' << detail::format_double(f.raw_mean) << ',' << detail::format_double(f.derandomized_mean)
                << ',' << detail::format_double(f.raw_variance) << ',' << detail::format_double(f.derandomized_variance)
                << ',' << f.replicates << '\n';
      feats.push_back({{"feature", f.name},
                       {"raw_mean", f.raw_mean},
                       {"derandomized_mean", f.derandomized_mean},
                       {"raw_variance", f.raw_variance},
                       {"derandomized_variance", f.derandomized_variance}});
    }
  } else {
    std::map<std::string, double> fr;
    for (const auto& t : traces)
      for (const auto& [k, p] : raw_feature_probs(t, burn_in, features)) fr[k] += w * p;
    for (const auto& f : features) {
      feats_csv << f.name << ',' << detail::format_double(fr[f.name]) << ",,,," << traces.size() << '\n';
      feats.push_back({{"feature", f.name}, {"raw_mean", fr[f.name]}});
    }
  }

  std::ostringstream acc_csv;
  acc_csv << "replicate,category,attempted,accepted,rate\n";
  for (const auto& r : reps) {
    const auto& a = r["acceptance"];
    for (const auto& [k, v] : a["per_move"].items())
      acc_csv << r["index"] << ",move:" << k << ',' << v["attempted"] << ',' << v["accepted"] << ','
              << detail::format_double(v["rate"].get<double>()) << '\n';
    for (const char* cat : {"between_model", "between_cluster", "between_pathway"})
      acc_csv << r["index"] << ',' << cat << ',' << a[cat]["attempted"] << ',' << a[cat]["accepted"] << ','
              << detail::format_double(a[cat]["rate"].get<double>()) << '\n';
  }

  json report = {{"config_hash", hash},
                 {"burn_in", burn_in},
                 {"replicates", reps},
                 {"derandomized", clusters.has_value()},
                 {"clusters", clusters ? json(clusters->size()) : json(nullptr)},
                 {"top_models", top},
                 {"features", feats}};

  const std::vector<std::pair<std::string, std::string>> outputs = {{"report.json", report.dump(2) + "\n"},
                                                                    {"model_probs.csv", models_csv.str()},
                                                                    {"network_probs.csv", nets_csv.str()},
                                                                    {"feature_probs.csv", feats_csv.str()},
                                                                    {"acceptance.csv", acc_csv.str()}};
  json listed = json::array();
  for (const auto& [name, content] : outputs) {
    detail::write_file((dir / name).string(), content);
    listed.push_back(file_entry(dir, name));
  }
  json files = json::array();
  for (const auto& f : manifest["files"])
    if (std::none_of(outputs.begin(), outputs.end(), [&](const auto& o) { return f["path"] == o.first; }))
      files.push_back(f);
  for (auto& f : listed) files.push_back(f);
  manifest["files"] = files;
  write_manifest(dir, manifest);
  return report;
}

}  // namespace rjnet
