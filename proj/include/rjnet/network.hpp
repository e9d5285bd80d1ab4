#pragma once

// Reaction-network data model and the topology analysis behind effective
// networks: which reactions can fire given the initially present species,
// which of those can move an observed species, and how the model space
// partitions into clusters sharing one effective network.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "rjnet/error.hpp"

namespace rjnet {

enum class RateLaw { mass_action, michaelis_menten };

inline const char* to_string(RateLaw law) {
  return law == RateLaw::mass_action ? "mass_action" : "michaelis_menten";
}

// Normal prior on a log10 rate constant. Stored as a variance.
struct NormalPrior {
  double mean = 0.0;
  double variance = 1.0;

  double sd() const { return std::sqrt(variance); }
};

struct Species {
  std::string name;
  double initial_concentration = 0.0;
  bool observed = false;
};

struct Reaction {
  int id = 0;
  std::vector<std::string> reactants;
  std::vector<std::string> products;
  std::vector<std::string> enzymes;
  bool reversible = false;
  RateLaw rate_law = RateLaw::mass_action;
  double base_log10_k = 0.0;
  std::optional<double> base_log10_k_reverse;
  std::optional<double> michaelis_constant;
  bool fixed = true;
  std::optional<NormalPrior> prior;
  std::optional<NormalPrior> prior_reverse;
};

// Plain, unvalidated network description as read from a spec file.
struct NetworkSpec {
  std::string name;
  std::vector<Species> species;
  std::vector<Reaction> reactions;
};

// Every violated invariant, each naming the offending element. Empty means valid.
inline std::vector<std::string> validate_network(const NetworkSpec& net) {
  std::vector<std::string> out;
  std::set<std::string> names;
  bool any_observed = false;
  for (const auto& s : net.species) {
    if (s.name.empty()) out.push_back("species with empty name");
    if (!names.insert(s.name).second) out.push_back("duplicate species name \"" + s.name + "\"");
    if (!(s.initial_concentration >= 0.0) || !std::isfinite(s.initial_concentration))
      out.push_back("species \"" + s.name + "\" has invalid initial concentration");
    any_observed = any_observed || s.observed;
  }
  if (!any_observed) out.push_back("no species is marked observed");

  std::set<int> ids;
  for (const auto& r : net.reactions) {
    const std::string tag = "reaction " + std::to_string(r.id);
    if (!ids.insert(r.id).second) out.push_back("duplicate " + tag);

    auto check_refs = [&](const std::vector<std::string>& list) {
      for (const auto& name : list)
        if (!names.contains(name)) out.push_back(tag + " references unknown species \"" + name + "\"");
    };
    check_refs(r.reactants);
    check_refs(r.products);
    check_refs(r.enzymes);

    auto overlaps = [](std::vector<std::string> a, std::vector<std::string> b) {
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      std::vector<std::string> both;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
      return !both.empty();
    };
    if (overlaps(r.reactants, r.products) || overlaps(r.reactants, r.enzymes) ||
        overlaps(r.products, r.enzymes))
      out.push_back(tag + " has overlapping reactant/product/enzyme sets");
    for (const auto* list : {&r.reactants, &r.products, &r.enzymes}) {
      std::set<std::string> uniq(list->begin(), list->end());
      if (uniq.size() != list->size()) out.push_back(tag + " lists a species twice in one role");
    }

    if (r.rate_law == RateLaw::michaelis_menten) {
      if (!r.michaelis_constant)
        out.push_back(tag + " uses Michaelis-Menten kinetics without a Michaelis constant");
      else if (!(*r.michaelis_constant > 0.0))
        out.push_back(tag + " has a non-positive Michaelis constant");
      if (r.reactants.size() != 1) out.push_back(tag + " uses Michaelis-Menten kinetics with != 1 substrate");
      if (r.reversible) out.push_back(tag + " uses Michaelis-Menten kinetics but is reversible");
    } else if (r.michaelis_constant) {
      out.push_back(tag + " uses mass-action kinetics but carries a Michaelis constant");
    }

    if (!std::isfinite(r.base_log10_k)) out.push_back(tag + " has a non-finite base rate constant");
    if (r.reversible && !r.base_log10_k_reverse)
      out.push_back(tag + " is reversible but has no reverse base rate constant");
    if (!r.reversible && r.base_log10_k_reverse)
      out.push_back(tag + " is irreversible but has a reverse base rate constant");

    if (r.fixed) {
      if (r.prior || r.prior_reverse) out.push_back(tag + " is fixed but carries a prior");
    } else {
      if (!r.prior) out.push_back(tag + " is uncertain but has no prior");
      if (r.reversible && !r.prior_reverse) out.push_back(tag + " is uncertain and reversible but has no reverse prior");
      if (!r.reversible && r.prior_reverse) out.push_back(tag + " is irreversible but carries a reverse prior");
      for (const auto* p : {&r.prior, &r.prior_reverse})
        if (*p && (!((*p)->variance > 0.0) || !std::isfinite((*p)->mean)))
          out.push_back(tag + " has an invalid prior");
    }
  }
  return out;
}

// Inclusion vector over the uncertain reactions (in ascending id order).
// Fixed reactions are implicitly always included.
class ModelIndicator {
 public:
  ModelIndicator() = default;
  explicit ModelIndicator(std::size_t n, bool value = false) : bits_(n, value) {}
  explicit ModelIndicator(std::vector<bool> bits) : bits_(std::move(bits)) {}

  // Parses "01101": character i is uncertain reaction i.
  static ModelIndicator from_string(const std::string& s) {
    ModelIndicator m(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '0' && s[i] != '1') throw ValidationError({"invalid model bit string \"" + s + "\""});
      m.bits_[i] = s[i] == '1';
    }
    return m;
  }

  // The index-th model in canonical (lexicographic) order.
  static ModelIndicator from_index(std::uint64_t index, std::size_t n) {
    ModelIndicator m(n);
    for (std::size_t i = 0; i < n; ++i) m.bits_[i] = (index >> (n - 1 - i)) & 1u;
    return m;
  }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool v) { bits_[i] = v; }

  ModelIndicator toggled(std::size_t i) const {
    ModelIndicator m = *this;
    m.bits_[i] = !m.bits_[i];
    return m;
  }

  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true)); }

  // Bitwise subset: every reaction included here is included in other.
  bool is_subset_of(const ModelIndicator& other) const {
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] && !other.bits_[i]) return false;
    return true;
  }

  std::string to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) s[i] = '1';
    return s;
  }

  const std::vector<bool>& bits() const { return bits_; }

  friend bool operator==(const ModelIndicator&, const ModelIndicator&) = default;
  friend auto operator<=>(const ModelIndicator& a, const ModelIndicator& b) { return a.bits_ <=> b.bits_; }

 private:
  std::vector<bool> bits_;
};

// Sorted reaction ids forming an effective network. Equal keys define a cluster.
struct EffectiveNetworkKey {
  std::vector<int> reaction_ids;

  bool contains(int id) const { return std::binary_search(reaction_ids.begin(), reaction_ids.end(), id); }
  std::size_t size() const { return reaction_ids.size(); }

  bool is_subset_of(const EffectiveNetworkKey& other) const {
    return std::includes(other.reaction_ids.begin(), other.reaction_ids.end(), reaction_ids.begin(),
                         reaction_ids.end());
  }

  // "1-2-8-9" or "empty"; used as the en_id column in traces.
  std::string to_string() const {
    if (reaction_ids.empty()) return "empty";
    std::string s;
    for (int id : reaction_ids) {
      if (!s.empty()) s += '-';
      s += std::to_string(id);
    }
    return s;
  }

  static EffectiveNetworkKey from_string(const std::string& s) {
    EffectiveNetworkKey key;
    if (s == "empty" || s.empty()) return key;
    std::size_t pos = 0;
    while (pos <= s.size()) {
      auto next = s.find('-', pos);
      if (next == std::string::npos) next = s.size();
      key.reaction_ids.push_back(std::stoi(s.substr(pos, next - pos)));
      pos = next + 1;
    }
    std::sort(key.reaction_ids.begin(), key.reaction_ids.end());
    return key;
  }

  friend bool operator==(const EffectiveNetworkKey&, const EffectiveNetworkKey&) = default;
  friend auto operator<=>(const EffectiveNetworkKey&, const EffectiveNetworkKey&) = default;
};

}  // namespace rjnet

template <>
struct std::hash<rjnet::ModelIndicator> {
  std::size_t operator()(const rjnet::ModelIndicator& m) const noexcept {
    return std::hash<std::vector<bool>>{}(m.bits());
  }
};

template <>
struct std::hash<rjnet::EffectiveNetworkKey> {
  std::size_t operator()(const rjnet::EffectiveNetworkKey& k) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int id : k.reaction_ids) h = (h ^ static_cast<std::size_t>(id)) * 1099511628211ull;
    return h;
  }
};

namespace rjnet {

// Reaction with species resolved to indices into ReactionNetwork::species().
struct IndexedReaction {
  int id = 0;
  std::vector<int> reactants;
  std::vector<int> products;
  std::vector<int> enzymes;
  bool reversible = false;
  RateLaw rate_law = RateLaw::mass_action;
  double base_log10_k = 0.0;
  double base_log10_k_reverse = 0.0;
  double michaelis_constant = 0.0;
  bool fixed = true;
  int uncertain_slot = -1;  // position in the model indicator, -1 for fixed reactions
};

// One inferred log10 rate constant: a direction of an uncertain reaction.
struct Coordinate {
  int reaction = 0;  // reaction index
  bool reverse = false;
  NormalPrior prior;
};

// Validated, index-resolved network. Immutable once built.
class ReactionNetwork {
 public:
  explicit ReactionNetwork(NetworkSpec spec) : spec_(std::move(spec)) {
    if (auto violations = validate_network(spec_); !violations.empty()) throw ValidationError(std::move(violations));
    std::sort(spec_.reactions.begin(), spec_.reactions.end(),
              [](const Reaction& a, const Reaction& b) { return a.id < b.id; });

    std::unordered_map<std::string, int> by_name;
    for (std::size_t i = 0; i < spec_.species.size(); ++i) {
      by_name.emplace(spec_.species[i].name, static_cast<int>(i));
      if (spec_.species[i].observed) observed_.push_back(static_cast<int>(i));
    }
    auto resolve = [&](const std::vector<std::string>& names) {
      std::vector<int> out;
      for (const auto& n : names) out.push_back(by_name.at(n));
      std::sort(out.begin(), out.end());
      return out;
    };

    for (const auto& r : spec_.reactions) {
      IndexedReaction ir;
      ir.id = r.id;
      ir.reactants = resolve(r.reactants);
      ir.products = resolve(r.products);
      ir.enzymes = resolve(r.enzymes);
      ir.reversible = r.reversible;
      ir.rate_law = r.rate_law;
      ir.base_log10_k = r.base_log10_k;
      ir.base_log10_k_reverse = r.base_log10_k_reverse.value_or(0.0);
      ir.michaelis_constant = r.michaelis_constant.value_or(0.0);
      ir.fixed = r.fixed;
      const int index = static_cast<int>(reactions_.size());
      if (!r.fixed) {
        ir.uncertain_slot = static_cast<int>(uncertain_.size());
        uncertain_.push_back(index);
        coordinate_begin_.push_back(static_cast<int>(coordinates_.size()));
        coordinates_.push_back({index, false, *r.prior});
        if (r.reversible) coordinates_.push_back({index, true, *r.prior_reverse});
      }
      index_of_id_.emplace(r.id, index);
      reactions_.push_back(std::move(ir));
    }
    coordinate_begin_.push_back(static_cast<int>(coordinates_.size()));
    for (std::size_t c = 0; c < coordinates_.size(); ++c)
      if (!coordinates_[c].reverse) forward_coordinate_.emplace(coordinates_[c].reaction, static_cast<int>(c));
  }

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Species>& species() const { return spec_.species; }
  const std::vector<IndexedReaction>& reactions() const { return reactions_; }
  const IndexedReaction& reaction(int index) const { return reactions_[static_cast<std::size_t>(index)]; }
  std::size_t n_species() const { return spec_.species.size(); }
  std::size_t n_reactions() const { return reactions_.size(); }
  std::size_t n_uncertain() const { return uncertain_.size(); }

  // Reaction index of the u-th uncertain reaction.
  int uncertain_reaction(std::size_t u) const { return uncertain_[u]; }
  std::vector<int> uncertain_ids() const {
    std::vector<int> ids;
    for (int r : uncertain_) ids.push_back(reactions_[static_cast<std::size_t>(r)].id);
    return ids;
  }

  int reaction_index(int id) const {
    auto it = index_of_id_.find(id);
    if (it == index_of_id_.end()) throw ValidationError({"unknown reaction id " + std::to_string(id)});
    return it->second;
  }
  bool has_reaction(int id) const { return index_of_id_.contains(id); }

  int species_index(const std::string& name) const {
    for (std::size_t i = 0; i < spec_.species.size(); ++i)
      if (spec_.species[i].name == name) return static_cast<int>(i);
    throw ValidationError({"unknown species \"" + name + "\""});
  }

  const std::vector<int>& observed_species() const { return observed_; }

  std::size_t n_coordinates() const { return coordinates_.size(); }
  const Coordinate& coordinate(std::size_t c) const { return coordinates_[c]; }
  const std::vector<Coordinate>& coordinates() const { return coordinates_; }
  // Coordinates of uncertain reaction u occupy [first, last).
  std::pair<int, int> coordinate_range(std::size_t u) const { return {coordinate_begin_[u], coordinate_begin_[u + 1]}; }
  // Forward coordinate of a reaction index, or -1 when the reaction is fixed.
  int forward_coordinate(int reaction_index) const {
    auto it = forward_coordinate_.find(reaction_index);
    return it == forward_coordinate_.end() ? -1 : it->second;
  }

  ModelIndicator full_model() const { return ModelIndicator(n_uncertain(), true); }
  ModelIndicator empty_model() const { return ModelIndicator(n_uncertain(), false); }

  bool is_included(const ModelIndicator& model, int reaction_index) const {
    const auto& r = reactions_[static_cast<std::size_t>(reaction_index)];
    return r.fixed || model[static_cast<std::size_t>(r.uncertain_slot)];
  }

  // Reaction indices (ascending) of fixed reactions plus included uncertain ones.
  std::vector<int> included_reactions(const ModelIndicator& model) const {
    check_model(model);
    std::vector<int> out;
    for (std::size_t i = 0; i < reactions_.size(); ++i)
      if (is_included(model, static_cast<int>(i))) out.push_back(static_cast<int>(i));
    return out;
  }

  // Whether coordinate c belongs to a reaction included by the model.
  bool coordinate_included(const ModelIndicator& model, std::size_t c) const {
    return model[static_cast<std::size_t>(reactions_[static_cast<std::size_t>(coordinates_[c].reaction)].uncertain_slot)];
  }

  void check_model(const ModelIndicator& model) const {
    if (model.size() != n_uncertain())
      throw ValidationError({"model indicator has length " + std::to_string(model.size()) + ", expected " +
                             std::to_string(n_uncertain())});
  }

  // Model including exactly the given uncertain reaction ids (fixed ones are implicit).
  ModelIndicator model_from_ids(const std::vector<int>& ids) const {
    ModelIndicator m(n_uncertain());
    for (int id : ids) {
      const auto& r = reactions_[static_cast<std::size_t>(reaction_index(id))];
      if (!r.fixed) m.set(static_cast<std::size_t>(r.uncertain_slot), true);
    }
    return m;
  }

  std::vector<int> ids_of(const std::vector<int>& reaction_indices) const {
    std::vector<int> ids;
    for (int i : reaction_indices) ids.push_back(reactions_[static_cast<std::size_t>(i)].id);
    return ids;
  }

 private:
  NetworkSpec spec_;
  std::vector<IndexedReaction> reactions_;
  std::vector<int> uncertain_;
  std::vector<int> observed_;
  std::vector<Coordinate> coordinates_;
  std::vector<int> coordinate_begin_;
  std::unordered_map<int, int> index_of_id_;
  std::unordered_map<int, int> forward_coordinate_;
};

namespace detail {

inline bool all_in(const std::vector<int>& species, const std::vector<char>& set) {
  return std::all_of(species.begin(), species.end(), [&](int s) { return set[static_cast<std::size_t>(s)] != 0; });
}

inline bool any_in(const std::vector<int>& species, const std::vector<char>& set) {
  return std::any_of(species.begin(), species.end(), [&](int s) { return set[static_cast<std::size_t>(s)] != 0; });
}

inline std::size_t add_all(const std::vector<int>& species, std::vector<char>& set) {
  std::size_t added = 0;
  for (int s : species) {
    auto& slot = set[static_cast<std::size_t>(s)];
    if (!slot) {
      slot = 1;
      ++added;
    }
  }
  return added;
}

// Fixed point of reaction activation starting from the initially present species.
inline std::vector<int> active_reaction_indices(const ReactionNetwork& net, const std::vector<int>& candidates) {
  std::vector<char> present(net.n_species(), 0);
  for (std::size_t s = 0; s < net.n_species(); ++s)
    if (net.species()[s].initial_concentration > 0.0) present[s] = 1;
  std::vector<char> active(net.n_reactions(), 0);

  bool grew = true;
  while (grew) {
    grew = false;
    for (int i : candidates) {
      if (active[static_cast<std::size_t>(i)]) continue;
      const auto& r = net.reaction(i);
      const bool forward_ready = all_in(r.reactants, present) && all_in(r.enzymes, present);
      const bool backward_ready = r.reversible && all_in(r.products, present) && all_in(r.enzymes, present);
      if (forward_ready || backward_ready) {
        active[static_cast<std::size_t>(i)] = 1;
        add_all(r.products, present);
        if (r.reversible) add_all(r.reactants, present);
        grew = true;
      }
    }
  }
  std::vector<int> out;
  for (int i : candidates)
    if (active[static_cast<std::size_t>(i)]) out.push_back(i);
  std::sort(out.begin(), out.end());
  return out;
}

// Influence closure of reaction `target` within `active` (both reaction indices).
inline bool influences(const ReactionNetwork& net, const std::vector<int>& active, int target) {
  std::vector<char> touched(net.n_species(), 0);
  std::vector<char> joined(net.n_reactions(), 0);
  const auto& t = net.reaction(target);
  add_all(t.reactants, touched);
  add_all(t.products, touched);
  joined[static_cast<std::size_t>(target)] = 1;

  bool grew = true;
  while (grew) {
    grew = false;
    for (int j : active) {
      if (joined[static_cast<std::size_t>(j)]) continue;
      const auto& r = net.reaction(j);
      if (any_in(r.reactants, touched) || any_in(r.enzymes, touched) || any_in(r.products, touched)) {
        joined[static_cast<std::size_t>(j)] = 1;
        // enzymes are never added: influence does not flow back through them
        if (add_all(r.reactants, touched) + add_all(r.products, touched) > 0) grew = true;
      }
    }
  }
  return std::any_of(net.observed_species().begin(), net.observed_species().end(),
                     [&](int s) { return touched[static_cast<std::size_t>(s)] != 0; });
}

inline std::vector<int> effective_reaction_indices(const ReactionNetwork& net, const std::vector<int>& candidates) {
  const auto active = active_reaction_indices(net, candidates);
  std::vector<int> out;
  for (int i : active)
    if (influences(net, active, i)) out.push_back(i);
  return out;
}

}  // namespace detail

// Reaction ids active under the model (activation fixed point).
inline std::vector<int> active_reactions(const ReactionNetwork& net, const ModelIndicator& model) {
  return net.ids_of(detail::active_reaction_indices(net, net.included_reactions(model)));
}

// Whether reaction `id` can influence an observed species through the active reactions.
inline bool influences_observables(const ReactionNetwork& net, const std::vector<int>& active_ids, int id) {
  if (std::find(active_ids.begin(), active_ids.end(), id) == active_ids.end())
    throw std::invalid_argument("influences_observables: reaction " + std::to_string(id) + " is not active");
  std::vector<int> active;
  for (int a : active_ids) active.push_back(net.reaction_index(a));
  return detail::influences(net, active, net.reaction_index(id));
}

// Effective network of an explicit reaction-id set (not necessarily a model).
inline EffectiveNetworkKey effective_network_of(const ReactionNetwork& net, const std::vector<int>& reaction_ids) {
  std::vector<int> candidates;
  for (int id : reaction_ids) candidates.push_back(net.reaction_index(id));
  std::sort(candidates.begin(), candidates.end());
  return {net.ids_of(detail::effective_reaction_indices(net, candidates))};
}

inline EffectiveNetworkKey effective_network(const ReactionNetwork& net, const ModelIndicator& model) {
  return {net.ids_of(detail::effective_reaction_indices(net, net.included_reactions(model)))};
}

// Thread-safe memo of effective_network, for online use during sampling.
class EffectiveNetworkCache {
 public:
  explicit EffectiveNetworkCache(const ReactionNetwork& net) : net_(&net) {}

  EffectiveNetworkKey get(const ModelIndicator& model) const {
    {
      std::shared_lock lock(mutex_);
      if (auto it = memo_.find(model); it != memo_.end()) return it->second;
    }
    auto key = effective_network(*net_, model);
    std::unique_lock lock(mutex_);
    return memo_.emplace(model, std::move(key)).first->second;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return memo_.size();
  }

 private:
  const ReactionNetwork* net_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<ModelIndicator, EffectiveNetworkKey> memo_;
};

using ClusterMap = std::map<EffectiveNetworkKey, std::vector<ModelIndicator>>;

inline constexpr std::size_t default_enumeration_cap = 20;

// Partition of all 2^N models by effective network; models listed in canonical order.
inline ClusterMap enumerate_clusters(const ReactionNetwork& net, std::size_t cap = default_enumeration_cap) {
  const std::size_t n = net.n_uncertain();
  if (n > cap || n >= 63)
    throw EnumerationCapExceeded("model space has " + std::to_string(n) + " uncertain reactions (cap " +
                                 std::to_string(cap) +
                                 "); use online clustering through EffectiveNetworkCache during sampling instead");
  ClusterMap clusters;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t i = 0; i < total; ++i) {
    auto model = ModelIndicator::from_index(i, n);
    clusters[effective_network(net, model)].push_back(std::move(model));
  }
  return clusters;
}

// Clusters whose effective network has at least one reaction. The empty
// network (observables constant in time) is a cluster but not a network.
inline std::size_t count_nonempty_networks(const ClusterMap& clusters) {
  return static_cast<std::size_t>(std::count_if(clusters.begin(), clusters.end(),
                                                [](const auto& kv) { return !kv.first.reaction_ids.empty(); }));
}

// Named inclusion rule: every id in require_all is included, and at least one
// id of exclude_any (when non-empty) is missing.
struct PathwayRule {
  std::string label;
  std::vector<int> require_all;
  std::vector<int> exclude_any;
};

inline const std::string default_pathway_label = "other";

inline std::string pathway_class(const ReactionNetwork& net, const ModelIndicator& model,
                                 const std::vector<PathwayRule>& rules) {
  auto included = [&](int id) { return net.has_reaction(id) && net.is_included(model, net.reaction_index(id)); };
  for (const auto& rule : rules) {
    const bool has_all = std::all_of(rule.require_all.begin(), rule.require_all.end(), included);
    const bool misses_one = rule.exclude_any.empty() ||
                            std::any_of(rule.exclude_any.begin(), rule.exclude_any.end(),
                                        [&](int id) { return !included(id); });
    if (has_all && misses_one) return rule.label;
  }
  return default_pathway_label;
}

}  // namespace rjnet
