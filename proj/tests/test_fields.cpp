#include <gtest/gtest.h>

#include <numbers>

#include "stirring/equilibrium.hpp"
#include "stirring/exact.hpp"
#include "stirring/fields.hpp"
#include "stirring/limit_theory.hpp"

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

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

}  // namespace

TEST(Fields, HandComputedValues) {
  const auto p = params(2, 2, 4, {0.5, 0.25, 0.25});
  const auto c = Configuration::from_sites({{0, 2, 0}, {1, 0, 1}, {2, 0, 0}, {0, 1, 1}});
  const std::vector<double> phi = {1.0, 2.0, 3.0, 4.0};
  const auto x = density_field(c, phi, p);
  EXPECT_DOUBLE_EQ(x[0], (1.0 * 2 + 4.0 * 1) / 4.0);
  EXPECT_DOUBLE_EQ(x[1], (2.0 * 1 + 4.0 * 1) / 4.0);
  const auto y = fluctuation_field(c, phi, p);
  // eta_1 - 0.5 = (1.5, -0.5, -0.5, 0.5)
  EXPECT_DOUBLE_EQ(y[0], (1.5 - 1.0 - 1.5 + 2.0) / 2.0);
  EXPECT_THROW(density_field(c, std::vector<double>{1.0, 2.0}, p), std::invalid_argument);
}

TEST(Fields, LimitFrozenValues) {
  const auto p = params(2, 2, 128, {0.5, 0.25, 0.25});
  const auto phi = TestFunction::sine(1);
  EXPECT_NEAR(cdc_stirring_limit(phi, 1, 1, p), 2.0 * 4.0 * 0.1875 * 2.0 * kPi2, 1e-12);
  EXPECT_NEAR(cdc_stirring_limit(phi, 1, 2, p), -2.0 * 4.0 * 0.0625 * 2.0 * kPi2, 1e-12);
  EXPECT_NEAR(cdc_stirring_limit(phi, 1, 1, p), 29.608813203268074, 1e-12);
}

TEST(Fields, ExactExpectationUnderProductMeasure) {
  // Sum over all states of nu_p(eta) N^2 Gamma(eta) equals the closed expectation.
  const auto p = params(2, 2, 3, {0.5, 0.3, 0.2});
  const StateSpace space(p);
  const auto nu = product_measure(space, 2, p.probs);
  const auto phi = TestFunction::gaussian_bump(0.3, 0.2).on_lattice(3, 3);
  for (int a = 1; a <= 2; ++a) {
    for (int b = 1; b <= 2; ++b) {
      double avg = 0.0;
      for (std::size_t i = 0; i < space.size(); ++i)
        avg += nu[i] * 9.0 * cdc_stirring_closed(space.configuration(i), phi, phi, a, b, p);
      EXPECT_NEAR(avg, cdc_stirring_expectation(phi, a, b, p), 1e-12);
    }
  }
}

TEST(Fields, ExpectationApproachesLimit) {
  const auto phi = TestFunction::sine(1);
  double prev_gap = 1e9;
  for (int n : {16, 64, 256}) {
    const auto p = params(2, 2, n, {0.5, 0.25, 0.25});
    const double gap = std::abs(cdc_stirring_expectation(phi.on_lattice(n, n), 1, 1, p) - cdc_stirring_limit(phi, 1, 1, p));
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  // the gap is (pi^2 / 3N^2) times the limit to leading order
  EXPECT_NEAR(prev_gap * 256.0 * 256.0, cdc_stirring_limit(phi, 1, 1, params(2, 2, 256, {0.5, 0.25, 0.25})) * kPi2 / 3.0, 0.1);
}

TEST(Fields, ReactionCdcExpectationMatchesNoiseMatrix) {
  // E over Lambda_p of N^2 Gamma^r equals 2j Upsilon B_ab (1/N) sum phi^2 (generator variant).
  const auto p = params(3, 2, 2, {0.4, 0.2, 0.2, 0.2}, 1.5);
  const StateSpace space(p);
  const auto nu = product_measure(space, 2, p.probs);
  const std::vector<double> phi = {0.7, -1.3};
  const double l2 = (0.49 + 1.69) / 2.0;
  const auto b = b_matrix(3, 0.2, ReactionVariant::generator);
  for (int a = 1; a <= 3; ++a) {
    for (int c = 1; c <= 3; ++c) {
      double avg = 0.0;
      for (std::size_t i = 0; i < space.size(); ++i)
        avg += nu[i] * 4.0 * cdc_reaction_closed(space.configuration(i), phi, phi, a, c, p);
      EXPECT_NEAR(avg, 2.0 * 1.5 * b(a - 1, c - 1) * l2, 1e-12);
    }
  }
}

TEST(Fields, DriftWeightsReproduceGenerator) {
  const auto p = params(2, 2, 3, {0.4, 0.3, 0.3}, 2.0);
  const StateSpace space(p);
  const auto q = build_generator(space, p, true, true);
  const auto phi = TestFunction::gaussian_bump(0.3, 0.2).on_lattice(3, 3);
  for (int a = 1; a <= 2; ++a) {
    const auto y = tabulate(space, [&](const Configuration& c) { return fluctuation_field(c, phi, p)[a - 1]; });
    const auto qy = q.apply(y);
    const auto w = drift_weights(phi, a, p);
    for (std::size_t i = 0; i < space.size(); ++i) {
      const auto c = space.configuration(i);
      double lin = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) lin += w[k] * c.data()[k];
      EXPECT_NEAR(lin, qy[i], 1e-12);
      EXPECT_NEAR(9.0 * qy[i], drift_field(c, phi, a, p) + drift_field_reaction(c, phi, a, p), 1e-11);
    }
  }
}

TEST(Fields, DiscreteLaplacianOfSine) {
  const int n = 512;
  const auto phi = TestFunction::sine(1).on_lattice(n, n);
  const auto lap = discrete_laplacian(phi, n);
  for (int x = 0; x < n; x += 37) EXPECT_NEAR(lap[x], -4.0 * kPi2 * phi[x], 1e-3);
}

TEST(Fields, StirringCdcSymmetricInSpecies) {
  Rng rng(4);
  const auto p = params(3, 3, 12, {0.1, 0.3, 0.3, 0.3});
  const auto phi = TestFunction::sine(1).on_lattice(12, 12);
  const auto psi = TestFunction::cosine(2).on_lattice(12, 12);
  for (int rep = 0; rep < 20; ++rep) {
    const auto c = sample_equilibrium(rng, p);
    for (int a = 1; a <= 3; ++a)
      for (int b = 1; b <= 3; ++b)
        EXPECT_NEAR(cdc_stirring_closed(c, phi, psi, a, b, p), cdc_stirring_closed(c, psi, phi, b, a, p), 1e-12);
  }
}
