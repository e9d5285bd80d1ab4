#include <gtest/gtest.h>

#include <random>

#include "rjnet/network.hpp"
#include "support.hpp"

using namespace rjnet;
using rjnet::testing::all_uncertain_network;
using rjnet::testing::example_network;
using rjnet::testing::example_spec;

namespace {

std::vector<int> all_but(int skip, int n = 12) {
  std::vector<int> out;
  for (int i = 1; i <= n; ++i)
    if (i != skip) out.push_back(i);
  return out;
}

NetworkSpec tiny_spec() {
  NetworkSpec s;
  s.name = "tiny";
  s.species = {{"A", 1.0, false}, {"B", 0.0, true}};
  Reaction r;
  r.id = 1;
  r.reactants = {"A"};
  r.products = {"B"};
  r.fixed = false;
  r.prior = NormalPrior{0.0, 1.0};
  s.reactions = {r};
  return s;
}

}  // namespace

TEST(ValidateNetwork, BundledExamplesAreValid) {
  EXPECT_TRUE(validate_network(example_spec(1)).empty());
  EXPECT_TRUE(validate_network(example_spec(2)).empty());
}

TEST(ValidateNetwork, UnknownSpeciesIsNamed) {
  auto spec = tiny_spec();
  spec.reactions[0].products = {"X"};
  const auto v = validate_network(spec);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("\"X\""), std::string::npos);
}

TEST(ValidateNetwork, MassActionWithMichaelisConstant) {
  auto spec = tiny_spec();
  spec.reactions[0].michaelis_constant = 5.0;
  EXPECT_EQ(validate_network(spec).size(), 1u);
}

TEST(ValidateNetwork, CollectsSeveralViolations) {
  auto spec = tiny_spec();
  spec.species.push_back({"A", -1.0, false});
  spec.reactions[0].enzymes = {"A"};
  spec.reactions[0].prior.reset();
  const auto v = validate_network(spec);
  EXPECT_GE(v.size(), 4u);
  EXPECT_THROW(ReactionNetwork{spec}, ValidationError);
}

TEST(ValidateNetwork, NoObservedSpecies) {
  auto spec = tiny_spec();
  spec.species[1].observed = false;
  EXPECT_EQ(validate_network(spec).size(), 1u);
}

TEST(ModelIndicator, CanonicalOrderIsLexicographic) {
  EXPECT_EQ(ModelIndicator::from_index(0, 5).to_string(), "00000");
  EXPECT_EQ(ModelIndicator::from_index(13, 5).to_string(), "01101");
  EXPECT_LT(ModelIndicator::from_string("00111"), ModelIndicator::from_string("01000"));
  EXPECT_THROW(ModelIndicator::from_string("01x"), ValidationError);
}

TEST(ActiveReactions, FullExampleModelActivatesEverything) {
  const auto net = example_network(1);
  const auto active = active_reactions(net, net.full_model());
  EXPECT_EQ(active, all_but(0));
}

TEST(ActiveReactions, WithoutReceptorBindingTheReceptorBranchIsDead) {
  const auto net = all_uncertain_network();
  const auto active = active_reactions(net, net.model_from_ids(all_but(2)));
  for (int id : {1, 3, 12}) EXPECT_EQ(std::count(active.begin(), active.end(), id), 0) << id;
}

TEST(ActiveReactions, EmptyModelWithoutFixedReactions) {
  const auto net = all_uncertain_network();
  EXPECT_TRUE(active_reactions(net, net.empty_model()).empty());
  EXPECT_TRUE(effective_network(net, net.empty_model()).reaction_ids.empty());
}

TEST(Influence, EnzymeOnlyLinkDoesNotInfluence) {
  const auto net = example_network(2);
  const auto active = active_reactions(net, net.model_from_ids(all_but(6)));
  EXPECT_FALSE(influences_observables(net, active, 3));
}

TEST(Influence, RasActivationReachesBRaf) {
  const auto net = example_network(1);
  const auto active = active_reactions(net, net.full_model());
  EXPECT_TRUE(influences_observables(net, active, 10));
}

TEST(Influence, ReactionConsumingTheObservable) {
  const auto net = example_network(1);
  const auto active = active_reactions(net, net.full_model());
  EXPECT_TRUE(influences_observables(net, active, 8));
}

TEST(Influence, InactiveReactionIsAPreconditionViolation) {
  const auto net = example_network(1);
  EXPECT_THROW(influences_observables(net, {1, 2}, 8), std::invalid_argument);
}

TEST(EffectiveNetwork, FigureOneNetworks) {
  const auto net = example_network(2);
  const EffectiveNetworkKey expected{{1, 2, 8, 9, 10, 11, 12}};
  EXPECT_EQ(effective_network(net, net.model_from_ids(all_but(3))), expected);
  EXPECT_EQ(effective_network(net, net.model_from_ids(all_but(6))), expected);
  EXPECT_EQ(expected.to_string(), "1-2-8-9-10-11-12");
  EXPECT_EQ(EffectiveNetworkKey::from_string("1-2-8-9-10-11-12"), expected);
}

TEST(EffectiveNetwork, KeyIsSubsetOfIncludedReactions) {
  const auto net = example_network(2);
  for (std::uint64_t i = 0; i < 1024; ++i) {
    const auto m = ModelIndicator::from_index(i, 10);
    const auto key = effective_network(net, m);
    const EffectiveNetworkKey included{net.ids_of(net.included_reactions(m))};
    EXPECT_TRUE(key.is_subset_of(included));
  }
}

TEST(EffectiveNetwork, IdempotentOnItsOwnKey) {
  const auto net = example_network(2);
  for (std::uint64_t i = 0; i < 1024; i += 7) {
    const auto key = effective_network(net, ModelIndicator::from_index(i, 10));
    EXPECT_EQ(effective_network_of(net, key.reaction_ids), key);
  }
}

TEST(EffectiveNetwork, DeterministicAcrossInputOrder) {
  const auto net = example_network(1);
  std::vector<int> ids = {12, 3, 1, 8, 5, 2, 6, 10, 11, 9};
  const auto a = effective_network_of(net, ids);
  std::mt19937 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    std::shuffle(ids.begin(), ids.end(), rng);
    EXPECT_EQ(effective_network_of(net, ids), a);
  }
}

TEST(EffectiveNetwork, MonotoneUnderModelInclusion) {
  for (int example : {1, 2}) {
    const auto net = example_network(example);
    const std::size_t n = std::min<std::size_t>(net.n_uncertain(), 8);
    // Example 2 has 10 uncertain reactions; restrict to the first 8 with the rest on.
    std::vector<std::pair<ModelIndicator, EffectiveNetworkKey>> keyed;
    for (std::uint64_t i = 0; i < (1u << n); ++i) {
      auto m = net.full_model();
      for (std::size_t b = 0; b < n; ++b) m.set(b, (i >> b) & 1u);
      keyed.emplace_back(m, effective_network(net, m));
    }
    for (const auto& [m, km] : keyed)
      for (const auto& [m2, km2] : keyed)
        if (m.is_subset_of(m2)) {
          ASSERT_TRUE(km.is_subset_of(km2)) << m.to_string() << " " << m2.to_string();
        }
  }
}

TEST(EffectiveNetworkCache, MatchesDirectComputation) {
  const auto net = example_network(2);
  EffectiveNetworkCache cache(net);
  for (std::uint64_t i = 0; i < 1024; i += 3) {
    const auto m = ModelIndicator::from_index(i, 10);
    EXPECT_EQ(cache.get(m), effective_network(net, m));
    EXPECT_EQ(cache.get(m), effective_network(net, m));
  }
  EXPECT_EQ(cache.size(), 342u);
}

TEST(Clusters, ExampleOneHasFive) {
  const auto clusters = enumerate_clusters(example_network(1));
  EXPECT_EQ(clusters.size(), 5u);
  EXPECT_EQ(count_nonempty_networks(clusters), 5u);
  std::size_t total = 0;
  for (const auto& [key, models] : clusters) total += models.size();
  EXPECT_EQ(total, 32u);
}

TEST(Clusters, ExampleTwoHasTwentyFour) {
  const auto clusters = enumerate_clusters(example_network(2));
  // 24 drawable networks plus the empty one, whose models leave BRaf constant
  EXPECT_EQ(clusters.size(), 25u);
  EXPECT_EQ(count_nonempty_networks(clusters), 24u);
  EXPECT_EQ(clusters.at(EffectiveNetworkKey{}).size(), 784u);
  std::set<ModelIndicator> seen;
  for (const auto& [key, models] : clusters)
    for (const auto& m : models) EXPECT_TRUE(seen.insert(m).second);
  EXPECT_EQ(seen.size(), 1024u);
}

TEST(Clusters, NoUncertainReactions) {
  auto spec = tiny_spec();
  spec.reactions[0].fixed = true;
  spec.reactions[0].prior.reset();
  const auto clusters = enumerate_clusters(ReactionNetwork(spec));
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_EQ(clusters.begin()->second.size(), 1u);
  EXPECT_EQ(clusters.begin()->first, (EffectiveNetworkKey{{1}}));
}

TEST(Clusters, CapIsEnforced) {
  EXPECT_THROW(enumerate_clusters(example_network(2), 9), EnumerationCapExceeded);
}

TEST(PathwayClass, LeftAndBoth) {
  const auto net = example_network(1);
  const std::vector<PathwayRule> rules = {{"left", {1, 2, 8, 10, 12}, {3, 5, 6}},
                                          {"both", {1, 2, 3, 5, 6, 8, 10, 12}, {}}};
  EXPECT_EQ(pathway_class(net, net.model_from_ids({3, 4, 6, 7}), rules), "left");
  EXPECT_EQ(pathway_class(net, net.model_from_ids({3, 5, 6}), rules), "both");
  EXPECT_EQ(pathway_class(net, net.full_model(), {}), "other");
}
