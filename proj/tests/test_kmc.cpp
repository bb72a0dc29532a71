#include <gtest/gtest.h>

#include "stirring/equilibrium.hpp"
#include "stirring/exact.hpp"
#include "stirring/fields.hpp"
#include "stirring/kmc.hpp"

using namespace stirring;

namespace {

ModelParams params(int n, int two_j, int L, std::vector<double> probs, double upsilon = 0.0) {
  ModelParams p;
  p.n_species = n;
  p.two_j = two_j;
  p.lattice_size = L;
  p.probs = std::move(probs);
  p.upsilon = upsilon;
  return p;
}

/// Total variation distance between the engine's law at micro time t and
/// the uniformization oracle, started from state `start`.
double engine_tv_distance(const ModelParams& p, std::size_t start, double t, int replicas, std::uint64_t seed) {
  const StateSpace space(p);
  const GeneratorMatrix q = build_generator(space, p, true, p.upsilon > 0.0);
  std::vector<double> exact(space.size());
  for (std::size_t j = 0; j < space.size(); ++j) {
    std::vector<double> e(space.size(), 0.0);
    e[j] = 1.0;
    exact[j] = semigroup_apply(q, t, e).values[start];
  }
  std::vector<double> counts(space.size(), 0.0);
  for (int r = 0; r < replicas; ++r) {
    Rng rng = replica_rng(seed, 0, r);
    Engine eng(p, space.configuration(start));
    eng.advance_to(t, rng);
    counts[space.index(eng.configuration())] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t j = 0; j < space.size(); ++j) tv += std::abs(counts[j] / replicas - exact[j]);
  return 0.5 * tv;
}

}  // namespace

TEST(Engine, RatesStayConsistent) {
  Rng rng(1);
  const auto p = params(3, 3, 10, {0.1, 0.3, 0.3, 0.3}, 50.0);
  Engine eng(p, sample_equilibrium(rng, p));
  eng.set_consistency_checks(1);
  for (int i = 0; i < 20000; ++i) ASSERT_TRUE(eng.step(rng));
  EXPECT_NO_THROW(eng.check_consistency());
  EXPECT_GT(eng.counters().mutations, 0u);
  EXPECT_GT(eng.counters().exchanges, 0u);
}

TEST(Engine, TotalRateIsSumOfLocalRates) {
  Rng rng(2);
  const auto p = params(2, 2, 12, {0.5, 0.25, 0.25}, 3.0);
  Engine eng(p, sample_equilibrium(rng, p));
  for (int i = 0; i < 500; ++i) eng.step(rng);
  double direct = 0.0;
  for (int x = 0; x < p.lattice_size; ++x) {
    direct += static_cast<double>(edge_active_rate(eng.configuration(), x, p.two_j));
    direct += mutation_rate(eng.configuration(), x, p);
  }
  EXPECT_NEAR(eng.total_rate(), direct, 1e-9);
}

TEST(Engine, StirringConservesSpeciesTotals) {
  Rng rng(3);
  const auto p = params(2, 2, 32, {0.4, 0.3, 0.3});
  const auto c0 = sample_equilibrium(rng, p);
  Engine eng(p, c0);
  eng.advance_to(50.0, rng);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(eng.configuration().species_total(k), c0.species_total(k));
  EXPECT_FALSE(validate(eng.configuration(), p).has_value());
}

TEST(Engine, MutationConservesParticleCount) {
  Rng rng(4);
  const auto p = params(3, 2, 16, {0.4, 0.2, 0.2, 0.2}, 500.0);
  const auto c0 = sample_equilibrium(rng, p);
  Engine eng(p, c0);
  eng.advance_to(20.0, rng);
  EXPECT_GT(eng.counters().mutations, 0u);
  EXPECT_EQ(eng.configuration().species_total(0), c0.species_total(0));
  long particles0 = 0, particles = 0;
  for (int k = 1; k < 4; ++k) {
    particles0 += c0.species_total(k);
    particles += eng.configuration().species_total(k);
  }
  EXPECT_EQ(particles, particles0);
}

TEST(Engine, AdvanceLandsExactlyOnTarget) {
  Rng rng(5);
  const auto p = params(1, 1, 8, {0.5, 0.5});
  Engine eng(p, sample_equilibrium(rng, p));
  eng.advance_to(3.25, rng);
  EXPECT_DOUBLE_EQ(eng.time(), 3.25);
  EXPECT_THROW(eng.advance_to(1.0, rng), std::invalid_argument);
  EXPECT_DOUBLE_EQ(eng.macro_time(), 3.25 / 64.0);
}

TEST(Engine, FrozenConfigurationHasNoEvents) {
  const auto p = params(1, 2, 4, {0.5, 0.5});
  const auto full = Configuration::uniform(4, {0, 2});
  Engine eng(p, full);
  Rng rng(6);
  EXPECT_FALSE(eng.step(rng));
  eng.advance_to(10.0, rng);
  EXPECT_EQ(eng.configuration(), full);
}

TEST(Engine, SimulateObservesEachScheduledTime) {
  Rng rng(7);
  const auto p = params(2, 2, 16, {0.5, 0.25, 0.25});
  Engine eng(p, sample_equilibrium(rng, p));
  std::vector<double> seen;
  eng.simulate(Schedule{{0.0, 0.01, 0.01, 0.05}}, rng, [&](double t, const Configuration&) { seen.push_back(t); });
  EXPECT_EQ(seen, (std::vector<double>{0.0, 0.01, 0.01, 0.05}));
  EXPECT_NEAR(eng.macro_time(), 0.05, 1e-15);
  EXPECT_THROW(eng.simulate(Schedule{{0.2, 0.1}}, rng, [](double, const Configuration&) {}), std::invalid_argument);
}

TEST(Engine, SameSeedSameTrajectory) {
  const auto p = params(2, 2, 24, {0.5, 0.25, 0.25}, 1.0);
  auto run = [&] {
    Rng rng = replica_rng(99, 1, 2);
    Engine eng(p, sample_equilibrium(rng, p));
    eng.advance_to(40.0, rng);
    return eng.configuration();
  };
  EXPECT_EQ(run(), run());
}

TEST(Engine, TrackedFunctionalFollowsConfiguration) {
  Rng rng(8);
  const auto p = params(2, 2, 16, {0.5, 0.25, 0.25}, 5.0);
  const auto phi = TestFunction::sine(1).on_lattice(16, 16);
  Engine eng(p, sample_equilibrium(rng, p));
  const int h = eng.track(field_weights(phi, 1, p));
  const int one = eng.track(std::vector<double>(16 * 3, 1.0 / (16 * 2)));
  eng.advance_to(30.0, rng);
  const auto y = fluctuation_field(eng.configuration(), phi, p);
  double centering = 0.0;
  for (double v : phi) centering += v * p.two_j * p.probs[1];
  centering /= std::sqrt(16.0);
  EXPECT_NEAR(eng.functional_value(h) - centering, y[0], 1e-10);
  // sum of all occupations / (2j L) == 1, so its integral is the elapsed time
  EXPECT_NEAR(eng.functional_integral(one), 30.0, 1e-9);
}

TEST(Engine, EventBudgetBoundsActualCount) {
  Rng rng(9);
  const auto p = params(2, 2, 32, {0.5, 0.25, 0.25}, 2.0);
  const auto c = sample_equilibrium(rng, p);
  Engine eng(p, c);
  eng.advance_to(0.05 * 32 * 32, rng);
  EXPECT_LE(static_cast<double>(eng.counters().total()), estimate_event_budget(p, 0.05));
  EXPECT_NEAR(static_cast<double>(eng.counters().total()), estimate_event_budget(p, c, 0.05),
              0.2 * estimate_event_budget(p, c, 0.05));
}

TEST(EngineExactness, StirringLawMatchesUniformization) {
  const auto p = params(2, 1, 3, {0.3, 0.4, 0.3});
  const StateSpace space(p);
  const auto start = space.index(Configuration::from_sites({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}));
  EXPECT_LT(engine_tv_distance(p, start, 0.7, 200000, 31), 0.01);
}

TEST(EngineExactness, ReactionLawMatchesUniformization) {
  const auto p = params(2, 1, 3, {0.2, 0.4, 0.4}, 9.0);  // gamma = 1
  const StateSpace space(p);
  const auto start = space.index(Configuration::from_sites({{0, 1, 0}, {0, 1, 0}, {1, 0, 0}}));
  EXPECT_LT(engine_tv_distance(p, start, 0.6, 200000, 32), 0.01);
}
