#pragma once

// File formats: JSON network specs, dataset CSVs, trajectory CSVs.

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rjnet/bayes.hpp"
#include "rjnet/error.hpp"
#include "rjnet/kinetics.hpp"
#include "rjnet/network.hpp"

namespace rjnet {

using json = nlohmann::json;

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError({"cannot open \"" + path + "\""});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write \"" + path + "\"");
  out << content;
  if (!out) throw Error("write failed for \"" + path + "\"");
}

// Shortest decimal form that round-trips.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) {
    while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ')) cur.pop_back();
    while (!cur.empty() && cur.front() == ' ') cur.erase(cur.begin());
    out.push_back(cur);
  }
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError({where + ": \"" + s + "\" is not a number"});
  }
  if (used != s.size()) throw ValidationError({where + ": \"" + s + "\" is not a number"});
  return v;
}

template <class T>
T get_field(const json& j, const char* key, const std::string& where, std::vector<std::string>& errors, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    errors.push_back(where + "." + key + " has the wrong type");
    return fallback;
  }
}

inline std::optional<NormalPrior> parse_prior(const json& j, const char* key, const std::string& where,
                                              std::vector<std::string>& errors) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& p = j.at(key);
  const std::string at = where + "." + key;
  if (!p.is_object() || !p.contains("mean") || !p.contains("variance")) {
    errors.push_back(at + " must be an object with \"mean\" and \"variance\"");
    return NormalPrior{};
  }
  NormalPrior out;
  out.mean = get_field<double>(p, "mean", at, errors, 0.0);
  out.variance = get_field<double>(p, "variance", at, errors, 0.0);
  return out;
}

}  // namespace detail

inline NetworkSpec network_spec_from_json(const json& j) {
  std::vector<std::string> errors;
  NetworkSpec spec;
  if (!j.is_object()) throw ValidationError({"network spec must be a JSON object"});
  spec.name = detail::get_field<std::string>(j, "name", "network", errors, "");
  if (!j.contains("species") || !j.at("species").is_array()) errors.push_back("network.species must be an array");
  if (!j.contains("reactions") || !j.at("reactions").is_array()) errors.push_back("network.reactions must be an array");
  if (!errors.empty()) throw ValidationError(errors);

  for (std::size_t i = 0; i < j["species"].size(); ++i) {
    const auto& s = j["species"][i];
    const std::string where = "species[" + std::to_string(i) + "]";
    Species sp;
    sp.name = detail::get_field<std::string>(s, "name", where, errors, "");
    sp.initial_concentration = detail::get_field<double>(s, "initial_concentration", where, errors, 0.0);
    sp.observed = detail::get_field<bool>(s, "observed", where, errors, false);
    spec.species.push_back(std::move(sp));
  }
  for (std::size_t i = 0; i < j["reactions"].size(); ++i) {
    const auto& r = j["reactions"][i];
    const std::string where = "reactions[" + std::to_string(i) + "]";
    Reaction rx;
    if (!r.contains("id")) errors.push_back(where + " has no id");
    rx.id = detail::get_field<int>(r, "id", where, errors, 0);
    using names = std::vector<std::string>;
    rx.reactants = detail::get_field<names>(r, "reactants", where, errors, {});
    rx.products = detail::get_field<names>(r, "products", where, errors, {});
    rx.enzymes = detail::get_field<names>(r, "enzymes", where, errors, {});
    rx.reversible = detail::get_field<bool>(r, "reversible", where, errors, false);
    const auto law = detail::get_field<std::string>(r, "rate_law", where, errors, "mass_action");
    if (law == "mass_action")
      rx.rate_law = RateLaw::mass_action;
    else if (law == "michaelis_menten")
      rx.rate_law = RateLaw::michaelis_menten;
    else
      errors.push_back(where + ".rate_law \"" + law + "\" is not mass_action or michaelis_menten");
    if (!r.contains("base_log10_k")) errors.push_back(where + " has no base_log10_k");
    rx.base_log10_k = detail::get_field<double>(r, "base_log10_k", where, errors, 0.0);
    if (r.contains("base_log10_k_reverse"))
      rx.base_log10_k_reverse = detail::get_field<double>(r, "base_log10_k_reverse", where, errors, 0.0);
    if (r.contains("michaelis_constant"))
      rx.michaelis_constant = detail::get_field<double>(r, "michaelis_constant", where, errors, 0.0);
    rx.fixed = detail::get_field<bool>(r, "fixed", where, errors, true);
    rx.prior = detail::parse_prior(r, "prior", where, errors);
    rx.prior_reverse = detail::parse_prior(r, "prior_reverse", where, errors);
    spec.reactions.push_back(std::move(rx));
  }
  if (!errors.empty()) throw ValidationError(errors);
  return spec;
}

inline json network_spec_to_json(const NetworkSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["species"] = json::array();
  for (const auto& s : spec.species)
    j["species"].push_back({{"name", s.name}, {"initial_concentration", s.initial_concentration}, {"observed", s.observed}});
  j["reactions"] = json::array();
  for (const auto& r : spec.reactions) {
    json o{{"id", r.id},
           {"reactants", r.reactants},
           {"products", r.products},
           {"enzymes", r.enzymes},
           {"reversible", r.reversible},
           {"rate_law", to_string(r.rate_law)},
           {"base_log10_k", r.base_log10_k},
           {"fixed", r.fixed}};
    if (r.base_log10_k_reverse) o["base_log10_k_reverse"] = *r.base_log10_k_reverse;
    if (r.michaelis_constant) o["michaelis_constant"] = *r.michaelis_constant;
    if (r.prior) o["prior"] = {{"mean", r.prior->mean}, {"variance", r.prior->variance}};
    if (r.prior_reverse) o["prior_reverse"] = {{"mean", r.prior_reverse->mean}, {"variance", r.prior_reverse->variance}};
    j["reactions"].push_back(std::move(o));
  }
  return j;
}

inline json parse_json_file(const std::string& path) {
  const auto text = detail::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError({"\"" + path + "\" is not valid JSON: " + e.what()});
  }
}

inline NetworkSpec load_network_spec(const std::string& path) { return network_spec_from_json(parse_json_file(path)); }

inline ReactionNetwork load_network(const std::string& path) { return ReactionNetwork(load_network_spec(path)); }

// Header "time,<observed species...>"; columns may appear in any order.
inline Dataset read_dataset_csv(const ReactionNetwork& net, const std::string& path, double noise_variance) {
  std::istringstream in(detail::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError({"\"" + path + "\" is empty"});
  const auto header = detail::split(line, ',');
  if (header.empty() || header[0] != "time") throw ValidationError({"\"" + path + "\": first column must be \"time\""});
  std::vector<int> column_of;  // per observed species, the CSV column
  std::vector<std::string> errors;
  for (int s : net.observed_species()) {
    const auto& name = net.species()[static_cast<std::size_t>(s)].name;
    auto it = std::find(header.begin() + 1, header.end(), name);
    if (it == header.end())
      errors.push_back("\"" + path + "\" has no column for observed species \"" + name + "\"");
    else
      column_of.push_back(static_cast<int>(it - header.begin()));
  }
  if (!errors.empty()) throw ValidationError(errors);

  Dataset data;
  data.noise_variance = noise_variance;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size())
      throw ValidationError({"\"" + path + "\" row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " cells, expected " + std::to_string(header.size())});
    const std::string where = "\"" + path + "\" row " + std::to_string(row);
    data.times.push_back(detail::parse_double(cells[0], where));
    for (int c : column_of) data.observations.push_back(detail::parse_double(cells[static_cast<std::size_t>(c)], where));
  }
  if (auto v = validate_dataset(net, data); !v.empty()) throw ValidationError(v);
  return data;
}

inline std::string dataset_csv(const ReactionNetwork& net, const Dataset& data) {
  std::ostringstream os;
  os << "time";
  for (int s : net.observed_species()) os << ',' << net.species()[static_cast<std::size_t>(s)].name;
  os << '\n';
  const std::size_t n_obs = net.observed_species().size();
  for (std::size_t t = 0; t < data.times.size(); ++t) {
    os << detail::format_double(data.times[t]);
    for (std::size_t k = 0; k < n_obs; ++k) os << ',' << detail::format_double(data.observations[t * n_obs + k]);
    os << '\n';
  }
  return os.str();
}

inline std::string trajectory_csv(const ReactionNetwork& net, const Trajectory& traj) {
  std::ostringstream os;
  os << "time";
  for (const auto& s : net.species()) os << ',' << s.name;
  os << '\n';
  for (const auto& st : traj.states) {
    os << detail::format_double(st.time);
    for (double v : st.values) os << ',' << detail::format_double(v);
    os << '\n';
  }
  return os.str();
}

}  // namespace rjnet
