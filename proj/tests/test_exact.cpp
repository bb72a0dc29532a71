#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "stirring/equilibrium.hpp"
#include "stirring/exact.hpp"
#include "stirring/fields.hpp"

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

Eigen::MatrixXd dense(const GeneratorMatrix& q) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q.size(), q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    m(i, i) = q.diagonal(i);
    for (const auto& e : q.row(i)) m(i, e.col) = e.rate;
  }
  return m;
}

const ModelParams kSmall = params(2, 2, 3, {0.5, 0.3, 0.2});

}  // namespace

TEST(StateSpace, SizeAndRoundTrip) {
  const StateSpace space(kSmall);
  EXPECT_EQ(space.size(), 216u);
  EXPECT_EQ(space.site_states().size(), 6u);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto c = space.configuration(i);
    EXPECT_FALSE(validate(c, kSmall).has_value());
    EXPECT_EQ(space.index(c), i);
  }
}

TEST(StateSpace, CapIsEnforced) {
  EXPECT_THROW(StateSpace(params(3, 4, 8, {0.25, 0.25, 0.25, 0.25})), CapExceeded);
  EXPECT_THROW(StateSpace(kSmall, 100), CapExceeded);
}

TEST(StateSpace, SiteStatesAreCompositions) {
  const auto states = enumerate_site_states(3, 4);
  EXPECT_EQ(states.size(), 20u);  // C(3+3, 3)
  for (const auto& s : states) {
    int sum = 0;
    for (auto v : s) sum += v;
    EXPECT_EQ(sum, 3);
  }
}

TEST(Generator, RowsSumToZero) {
  const StateSpace space(kSmall);
  auto pr = kSmall;
  pr.upsilon = 2.0;
  for (const auto& q : {build_generator(space, kSmall, true, false), build_generator(space, pr, true, true)}) {
    EXPECT_LT(q.max_row_sum(), 1e-12);
    EXPECT_GE(q.min_off_diagonal(), 0.0);
  }
}

TEST(Generator, EntryMatchesExchangeRate) {
  const StateSpace space(kSmall);
  const auto q = build_generator(space, kSmall, true, false);
  const auto c = Configuration::from_sites({{0, 2, 0}, {0, 0, 2}, {2, 0, 0}});
  const auto d = apply_move(c, Exchange{0, 1, 2});
  EXPECT_DOUBLE_EQ(q(space.index(c), space.index(d)), 4.0);
}

TEST(Generator, TwoSiteRingHasTwoBonds) {
  // On L = 2 the sites are joined by the bonds (0,1) and (1,0); both fire.
  const auto p = params(1, 1, 2, {0.5, 0.5});
  const StateSpace space(p);
  const auto q = build_generator(space, p, true, false);
  const auto a = Configuration::from_sites({{0, 1}, {1, 0}});
  const auto b = Configuration::from_sites({{1, 0}, {0, 1}});
  EXPECT_DOUBLE_EQ(q(space.index(a), space.index(b)), 2.0);
}

TEST(Reversibility, ProductMeasureInDetailedBalance) {
  const StateSpace space(kSmall);
  const auto q = build_generator(space, kSmall, true, false);
  const auto nu = product_measure(space, 2, kSmall.probs);
  double total = 0.0;
  for (double v : nu) total += v;
  EXPECT_NEAR(total, 1.0, 1e-14);
  EXPECT_LT(check_detailed_balance(q, nu), 1e-12);
  EXPECT_LT(stationarity_residual(q, nu), 1e-12);
}

TEST(Reversibility, MutationNeedsSymmetricSpecies) {
  const StateSpace space(kSmall);
  auto sym = kSmall;
  sym.probs = {0.4, 0.3, 0.3};
  sym.upsilon = 1.0;
  const auto q = build_generator(space, sym, true, true);
  EXPECT_LT(check_detailed_balance(q, product_measure(space, 2, sym.probs)), 1e-12);
  EXPECT_GT(check_detailed_balance(q, product_measure(space, 2, kSmall.probs)), 1e-6);
}

TEST(Semigroup, MatchesDenseExponential) {
  const auto p = params(2, 1, 3, {0.3, 0.4, 0.3}, 9.0);
  const StateSpace space(p);
  const auto q = build_generator(space, p, true, true);
  const Eigen::MatrixXd e = (dense(q) * 0.8).exp();
  std::vector<double> f(space.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(1.0 + i);
  const auto prop = semigroup_apply(q, 0.8, f);
  const Eigen::VectorXd ef = e * Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(prop.values[i], ef(i), 1e-12);
  EXPECT_LT(prop.error_bound, 1e-14);
}

TEST(Semigroup, IdentityAtZeroAndConservesConstants) {
  const StateSpace space(kSmall);
  const auto q = build_generator(space, kSmall, true, false);
  std::vector<double> f(space.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 0.1 * i;
  EXPECT_EQ(semigroup_apply(q, 0.0, f).values, f);
  const std::vector<double> one(space.size(), 1.0);
  for (double v : semigroup_apply(q, 3.0, one).values) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_THROW(semigroup_apply(q, -1.0, f), std::invalid_argument);
}

TEST(Semigroup, ShortTimeTaylorAgrees) {
  const StateSpace space(kSmall);
  const auto q = build_generator(space, kSmall, true, false);
  std::vector<double> f(space.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::cos(0.3 * i);
  const auto a = semigroup_apply(q, 1e-3, f).values;
  const auto b = short_time_propagate(q, 1e-3, f);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-13);
  // forward then backward returns to f
  const auto back = short_time_propagate(q, -1e-3, b);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(back[i], f[i], 1e-13);
}

TEST(Duality, FunctionFrozenValue) {
  const auto eta = Configuration::from_sites({{0, 2, 0}, {1, 0, 1}});
  const auto xi = Configuration::from_sites({{1, 1, 0}, {1, 0, 1}});
  EXPECT_DOUBLE_EQ(duality_function(eta, xi, 2), 0.5);
  const auto too_many = Configuration::from_sites({{0, 0, 2}, {1, 0, 1}});
  EXPECT_DOUBLE_EQ(duality_function(eta, too_many, 2), 0.0);
  const auto empty = pad_dual({{0, 0}, {0, 0}}, 2);
  EXPECT_DOUBLE_EQ(duality_function(eta, empty, 2), 1.0);
}

TEST(Duality, PadDualFillsHoles) {
  const auto xi = pad_dual({{1, 0}, {0, 2}, {0, 0}}, 2);
  EXPECT_EQ(xi(0, 0), 1);
  EXPECT_EQ(xi(1, 0), 0);
  EXPECT_EQ(xi(2, 0), 2);
  EXPECT_THROW(pad_dual({{2, 1}}, 2), std::invalid_argument);
}

TEST(Duality, SelfDualityHoldsForAllSmallDuals) {
  const StateSpace space(kSmall);
  const auto q = build_generator(space, kSmall, true, false);
  const auto eta = Configuration::from_sites({{0, 1, 1}, {1, 1, 0}, {0, 0, 2}});
  for (const auto& xi : {pad_dual({{1, 0}, {0, 0}, {0, 0}}, 2), pad_dual({{0, 1}, {1, 0}, {0, 0}}, 2),
                         pad_dual({{0, 0}, {0, 0}, {0, 2}}, 2)}) {
    for (double t : {0.0, 0.3, 1.5}) {
      const auto sides = self_duality_sides(space, q, t, eta, xi, 2);
      EXPECT_LT(sides.defect(), 1e-12);
    }
  }
}

TEST(Duality, OneDualParticleIsARandomWalkAverage) {
  // E_eta[D(eta_t, one particle of species 1 at 0)] = E[eta_1^{X_t}] / 2j for
  // a walker jumping at rate 2j to each neighbour.
  const StateSpace space(kSmall);
  const auto q = build_generator(space, kSmall, true, false);
  const auto eta = Configuration::from_sites({{0, 2, 0}, {2, 0, 0}, {1, 1, 0}});
  const auto xi = pad_dual({{1, 0}, {0, 0}, {0, 0}}, 2);
  const double t = 0.4;
  const double lhs = self_duality_sides(space, q, t, eta, xi, 2).lhs;
  // walker on a 3-cycle with rate 2 per direction: P(stay) = 1/3 + 2/3 e^{-6 t}
  const double stay = 1.0 / 3.0 + 2.0 / 3.0 * std::exp(-6.0 * t);
  const double move = (1.0 - stay) / 2.0;
  EXPECT_NEAR(lhs, (stay * 2 + move * 0 + move * 1) / 2.0, 1e-12);
}

TEST(CarreDuChamp, NonNegativeAndZeroOnConstants) {
  const StateSpace space(kSmall);
  const auto q = build_generator(space, kSmall, true, false);
  const auto phi = TestFunction::sine(1).on_lattice(3, 3);
  const auto f = tabulate(space, [&](const Configuration& c) { return fluctuation_field(c, phi, kSmall)[0]; });
  for (double v : carre_du_champ_exact(q, f, f)) EXPECT_GE(v, -1e-12);
  const std::vector<double> one(space.size(), 1.0);
  for (double v : carre_du_champ_exact(q, f, one)) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Dynkin, DensityFieldDriftMatches) {
  const StateSpace space(kSmall);
  const auto q = build_generator(space, kSmall, true, false);
  const auto phi = TestFunction::cosine(1).on_lattice(3, 3);
  const auto f = tabulate(space, [&](const Configuration& c) { return density_field(c, phi, kSmall)[1]; });
  EXPECT_LT(check_dynkin_drift(q, f, 0.0), 1e-8);
  EXPECT_LT(check_dynkin_drift(q, f, 0.7), 1e-7);
}
