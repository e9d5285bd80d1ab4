#pragma once

#include <string>

#include "rjnet/io.hpp"

namespace rjnet::testing {

inline std::string data_path(const std::string& rel) { return std::string(RJNET_DATA_DIR) + "/" + rel; }

inline NetworkSpec example_spec(int n) { return load_network_spec(data_path("example" + std::to_string(n) + "/network.json")); }

inline ReactionNetwork example_network(int n) { return ReactionNetwork(example_spec(n)); }

inline ReactionNetwork subproblem_network(const std::string& name) {
  return load_network(data_path("subproblems/" + name + ".json"));
}

// Example spec with every reaction turned uncertain (prior at the base value).
inline ReactionNetwork all_uncertain_network() {
  auto spec = example_spec(2);
  for (auto& r : spec.reactions) {
    if (!r.fixed) continue;
    r.fixed = false;
    r.prior = NormalPrior{r.base_log10_k, 0.1};
    if (r.reversible) r.prior_reverse = NormalPrior{*r.base_log10_k_reverse, 0.1};
  }
  return ReactionNetwork(spec);
}

}  // namespace rjnet::testing
