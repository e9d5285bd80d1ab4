#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rjnet/kinetics.hpp"
#include "support.hpp"

using namespace rjnet;
using rjnet::testing::all_uncertain_network;
using rjnet::testing::example_network;

namespace {

std::vector<double> grid(int n, double dt) {
  std::vector<double> t;
  for (int i = 1; i <= n; ++i) t.push_back(i * dt);
  return t;
}

// Species production rates of the full 12-reaction network written out by hand,
// with d[activeRap1]/dt carrying -k7 (stoichiometry) rather than the printed +.
std::map<std::string, double> transcribed_rhs(const ReactionNetwork& net, const RateParameters& p,
                                              const std::vector<double>& x) {
  auto c = [&](const char* n) { return x[static_cast<std::size_t>(net.species_index(n))]; };
  auto k = [&](int id) { return std::pow(10.0, p.log10_k[static_cast<std::size_t>(net.reaction_index(id))]); };
  auto km = [&](int id) { return p.michaelis[static_cast<std::size_t>(net.reaction_index(id))]; };
  const double k2r = std::pow(10.0, p.log10_k_reverse[static_cast<std::size_t>(net.reaction_index(2))]);
  const double r1 = k(1) * c("boundEGFR");
  const double r2 = k(2) * c("EGF") * c("unboundEGFR") - k2r * c("boundEGFR");
  const double r3 = k(3) * c("boundEGFR") * c("inactiveC3G") / (km(3) + c("inactiveC3G"));
  const double r4 = k(4) * c("activeC3G");
  const double r5 = k(5) * c("activeC3G") * c("inactiveRap1") / (km(5) + c("inactiveRap1"));
  const double r6 = k(6) * c("activeRap1") * c("BRaf") / (km(6) + c("BRaf"));
  const double r7 = k(7) * c("Gap") * c("activeRap1") / (km(7) + c("activeRap1"));
  const double r8 = k(8) * c("activeRas") * c("BRaf") / (km(8) + c("BRaf"));
  const double r9 = k(9) * c("Gap") * c("activeRas") / (km(9) + c("activeRas"));
  const double r10 = k(10) * c("activeSOS") * c("inactiveRas") / (km(10) + c("inactiveRas"));
  const double r11 = k(11) * c("activeSOS") / (km(11) + c("activeSOS"));
  const double r12 = k(12) * c("boundEGFR") * c("inactiveSOS") / (km(12) + c("inactiveSOS"));
  return {{"unboundEGFR", -r2},      {"inactiveSOS", -r12 + r11}, {"inactiveRas", -r10 + r9},
          {"inactiveRap1", r7 - r5}, {"boundEGFR", r2 - r1},      {"activeSOS", r12 - r11},
          {"activeRas", r10 - r9},   {"activeRap1", -r7 + r5},    {"EGF", -r2},
          {"BRafPP", r6 + r8},       {"BRaf", -r6 - r8},          {"activeC3G", r3 - r4},
          {"inactiveC3G", -r3 + r4}, {"degradedEGFR", r1},        {"Gap", 0.0}};
}

struct Conserved {
  const char* label;
  std::vector<const char*> species;
  double total;
};

const std::vector<Conserved> conserved_totals = {
    {"EGFR", {"unboundEGFR", "boundEGFR", "degradedEGFR"}, 500},
    {"EGF", {"EGF", "boundEGFR", "degradedEGFR"}, 1000},
    {"SOS", {"inactiveSOS", "activeSOS"}, 1200},
    {"Ras", {"inactiveRas", "activeRas"}, 1200},
    {"Rap1", {"inactiveRap1", "activeRap1"}, 1200},
    {"C3G", {"inactiveC3G", "activeC3G"}, 1200},
    {"BRaf", {"BRaf", "BRafPP"}, 1500},
    {"Gap", {"Gap"}, 2400},
};

void expect_conserved(const ReactionNetwork& net, const Trajectory& tr, double rel) {
  for (const auto& st : tr.states)
    for (const auto& law : conserved_totals) {
      double sum = 0.0;
      for (const char* s : law.species) sum += st.values[static_cast<std::size_t>(net.species_index(s))];
      EXPECT_NEAR(sum, law.total, rel * law.total) << law.label << " at t=" << st.time;
    }
}

RateParameters random_parameters(const ReactionNetwork& net, std::mt19937_64& rng, double spread) {
  auto p = RateParameters::base(net);
  std::uniform_real_distribution<double> u(-spread, spread);
  for (auto& v : p.log10_k) v += u(rng);
  for (auto& v : p.log10_k_reverse) v += u(rng);
  return p;
}

}  // namespace

TEST(ReactionRate, ReceptorBindingMassAction) {
  const auto net = example_network(1);
  std::vector<double> conc(net.n_species(), 0.0);
  conc[static_cast<std::size_t>(net.species_index("EGF"))] = 1000;
  conc[static_cast<std::size_t>(net.species_index("unboundEGFR"))] = 500;
  const auto r = reaction_rate(net, net.reaction_index(2), RateParameters::base(net), conc);
  EXPECT_NEAR(r.forward, std::pow(10.0, 1.5) * 1000 * 500, 1.0);
  EXPECT_NEAR(r.forward, 1.58114e7, 1e2);
  EXPECT_EQ(r.reverse, 0.0);
}

TEST(ReactionRate, SosActivationMichaelisMenten) {
  const auto net = example_network(1);
  std::vector<double> conc(net.n_species(), 0.0);
  conc[static_cast<std::size_t>(net.species_index("boundEGFR"))] = 1;
  conc[static_cast<std::size_t>(net.species_index("inactiveSOS"))] = 1200;
  const auto r = reaction_rate(net, net.reaction_index(12), RateParameters::base(net), conc);
  EXPECT_NEAR(r.forward, 40.47, 0.01);
}

TEST(ReactionRate, ZeroSubstrateGivesZeroRate) {
  const auto net = example_network(1);
  const std::vector<double> conc(net.n_species(), 0.0);
  const auto p = RateParameters::base(net);
  for (std::size_t i = 0; i < net.n_reactions(); ++i) {
    const auto r = reaction_rate(net, static_cast<int>(i), p, conc);
    EXPECT_EQ(r.forward, 0.0);
    EXPECT_EQ(r.reverse, 0.0);
  }
}

TEST(ReactionRate, NonNegativeForNonNegativeStates) {
  const auto net = example_network(1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3000.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> conc(net.n_species());
    for (auto& c : conc) c = u(rng);
    const auto p = random_parameters(net, rng, 1.0);
    for (std::size_t i = 0; i < net.n_reactions(); ++i) {
      const auto r = reaction_rate(net, static_cast<int>(i), p, conc);
      EXPECT_GE(r.forward, 0.0);
      EXPECT_GE(r.reverse, 0.0);
    }
  }
}

TEST(AssembleRhs, InitialStateOfFullModel) {
  const auto net = example_network(1);
  std::vector<double> init;
  for (const auto& s : net.species()) init.push_back(s.initial_concentration);
  const auto d = assemble_rhs(net, net.full_model(), RateParameters::base(net), init);
  EXPECT_EQ(d[static_cast<std::size_t>(net.species_index("Gap"))], 0.0);
  EXPECT_EQ(d[static_cast<std::size_t>(net.species_index("degradedEGFR"))], 0.0);
}

TEST(AssembleRhs, MatchesHandTranscriptionAtRandomStates) {
  const auto net = example_network(1);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2500.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(net.n_species());
    for (auto& c : x) c = u(rng);
    const auto p = random_parameters(net, rng, 0.5);
    const auto generic = assemble_rhs(net, net.full_model(), p, x);
    for (const auto& [name, value] : transcribed_rhs(net, p, x)) {
      const double got = generic[static_cast<std::size_t>(net.species_index(name))];
      EXPECT_NEAR(got, value, 1e-12 * std::max(1.0, std::abs(value))) << name;
    }
  }
}

TEST(AssembleRhs, ConservedFamiliesCancel) {
  const auto net = all_uncertain_network();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 2500.0);
  std::bernoulli_distribution coin(0.5);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(net.n_species());
    for (auto& c : x) c = u(rng);
    ModelIndicator m(net.n_uncertain());
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, coin(rng));
    const auto d = assemble_rhs(net, m, random_parameters(net, rng, 0.5), x);
    for (const auto& law : conserved_totals) {
      double sum = 0.0, scale = 0.0;
      for (const char* s : law.species) {
        sum += d[static_cast<std::size_t>(net.species_index(s))];
        scale += std::abs(d[static_cast<std::size_t>(net.species_index(s))]);
      }
      EXPECT_NEAR(sum, 0.0, 1e-12 * std::max(1.0, scale)) << law.label;
    }
  }
}

TEST(KineticSystem, AnalyticJacobianMatchesFiniteDifferences) {
  const auto net = example_network(1);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(1.0, 2500.0);
  const auto p = random_parameters(net, rng, 0.5);
  KineticSystem sys(net, net.included_reactions(net.full_model()), p);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(sys.size()));
    for (auto& v : y) v = u(rng);
    Eigen::MatrixXd J;
    sys.jacobian(y, J);
    Eigen::VectorXd fp, fm;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      const double h = 1e-4 * y[j];
      Eigen::VectorXd yp = y, ym = y;
      yp[j] += h;
      ym[j] -= h;
      sys.rhs(yp, fp);
      sys.rhs(ym, fm);
      const Eigen::VectorXd col = (fp - fm) / (2 * h);
      for (Eigen::Index i = 0; i < y.size(); ++i)
        EXPECT_NEAR(J(i, j), col[i], 1e-5 * std::max(1.0, std::abs(col[i]))) << i << "," << j;
    }
  }
}

TEST(Integrate, EmptyReactionSetIsConstant) {
  const auto net = all_uncertain_network();
  const auto tr = integrate(net, net.empty_model(), RateParameters::base(net), grid(5, 1.0));
  for (const auto& st : tr.states)
    for (std::size_t s = 0; s < net.n_species(); ++s) EXPECT_EQ(st.values[s], net.species()[s].initial_concentration);
  const auto g = predict_observables(net, net.empty_model(), RateParameters::base(net), grid(20, 0.5));
  EXPECT_EQ(g, std::vector<double>(20, 1500.0));
}

TEST(Integrate, TimeZeroReturnsInitialState) {
  const auto net = example_network(1);
  std::vector<double> times{0.0, 1.0};
  const auto tr = integrate(net, net.full_model(), RateParameters::base(net), times);
  for (std::size_t s = 0; s < net.n_species(); ++s)
    EXPECT_EQ(tr.states[0].values[s], net.species()[s].initial_concentration);
  EXPECT_EQ(tr.states[1].time, 1.0);
}

TEST(Integrate, RejectsBadTimes) {
  const auto net = example_network(1);
  const std::vector<double> decreasing{2.0, 1.0};
  EXPECT_THROW(integrate(net, net.full_model(), RateParameters::base(net), decreasing), std::invalid_argument);
  const std::vector<double> negative{-1.0};
  EXPECT_THROW(integrate(net, net.full_model(), RateParameters::base(net), negative), std::invalid_argument);
}

TEST(Integrate, StepBudgetExhaustionIsReported) {
  const auto net = example_network(1);
  IntegratorConfig cfg;
  cfg.max_steps = 3;
  EXPECT_THROW(integrate(net, net.full_model(), RateParameters::base(net), grid(20, 0.5), cfg), IntegrationError);
}

TEST(Integrate, ConservationAlongBaseTrajectory) {
  const auto net = example_network(1);
  IntegratorConfig cfg;
  const auto tr = integrate(net, net.full_model(), RateParameters::base(net), grid(50, 0.3), cfg);
  expect_conserved(net, tr, 10 * cfg.rel_tol);
}

TEST(Integrate, ConservationForRandomSubsetsAndRates) {
  const auto net = all_uncertain_network();
  std::mt19937_64 rng(21);
  std::bernoulli_distribution coin(0.7);
  IntegratorConfig cfg;
  for (int rep = 0; rep < 20; ++rep) {
    ModelIndicator m(net.n_uncertain());
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, coin(rng));
    const auto tr = integrate(net, m, random_parameters(net, rng, 0.5), grid(20, 0.5), cfg);
    expect_conserved(net, tr, 10 * cfg.rel_tol);
  }
}

TEST(Integrate, SelfConvergenceUnderToleranceRefinement) {
  const auto net = example_network(1);
  const auto p = RateParameters::base(net);
  const auto times = grid(20, 0.5);
  IntegratorConfig fine;
  fine.rel_tol = 1e-11;
  fine.abs_tol = 1e-13;
  const auto reference = predict_observables(net, net.full_model(), p, times, fine);
  double previous = std::numeric_limits<double>::infinity();
  for (double rel : {1e-6, 5e-7, 2.5e-7}) {
    IntegratorConfig cfg;
    cfg.rel_tol = rel;
    cfg.abs_tol = rel * 1e-2;
    const auto g = predict_observables(net, net.full_model(), p, times, cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(g[i] - reference[i]) / reference[i]);
    EXPECT_LT(worst, 10 * rel);
    EXPECT_LE(worst, previous * 1.5);
    previous = worst;
  }
}

TEST(PredictObservables, BaseValuesAreBoundedByBRafTotal) {
  const auto net = example_network(1);
  const auto g = predict_observables(net, net.full_model(), RateParameters::base(net), grid(20, 0.5));
  ASSERT_EQ(g.size(), 20u);
  for (double v : g) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1500.0);
  }
}

TEST(PredictObservables, EffectiveNetworkReproducesObservables) {
  const auto net = all_uncertain_network();
  std::mt19937_64 rng(31);
  std::bernoulli_distribution coin(0.75);
  IntegratorConfig cfg;
  const auto times = grid(20, 0.5);
  for (int rep = 0; rep < 25; ++rep) {
    ModelIndicator m(net.n_uncertain());
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, coin(rng));
    const auto p = random_parameters(net, rng, 0.5);
    const auto key = effective_network(net, m);
    std::vector<int> en_indices;
    for (int id : key.reaction_ids) en_indices.push_back(net.reaction_index(id));
    const auto full = predict_observables(net, m, p, times, cfg);
    const auto reduced = predict_observables_for(net, en_indices, p, times, cfg);
    for (std::size_t i = 0; i < full.size(); ++i) EXPECT_NEAR(full[i], reduced[i], 10 * cfg.rel_tol * std::abs(full[i]));
  }
}
