#include <gtest/gtest.h>

#include <numbers>

#include "stirring/limit_theory.hpp"
#include "stirring/stats.hpp"

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

TEST(Matrices, SigmaFrozen) {
  const auto s = sigma_matrix(params(2, 2, 8, {0.5, 0.25, 0.25}));
  EXPECT_DOUBLE_EQ(s(0, 0), 0.1875);
  EXPECT_DOUBLE_EQ(s(0, 1), -0.0625);
  EXPECT_DOUBLE_EQ(s(1, 0), -0.0625);
}

TEST(Matrices, VariantsAgreeOnlyForTwoSpecies) {
  EXPECT_TRUE(b_matrix(2, 0.25, ReactionVariant::generator).isApprox(b_matrix(2, 0.25, ReactionVariant::simplified)));
  EXPECT_TRUE(reaction_drift_matrix(2, 2.0, ReactionVariant::generator)
                  .isApprox(reaction_drift_matrix(2, 2.0, ReactionVariant::simplified)));
  const auto g = b_matrix(3, 0.2, ReactionVariant::generator);
  const auto q = b_matrix(3, 0.2, ReactionVariant::simplified);
  EXPECT_DOUBLE_EQ(g(0, 0), 0.8);
  EXPECT_DOUBLE_EQ(q(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(g(0, 1), -0.4);
}

TEST(Matrices, GeneratorDriftConservesTotalMass) {
  const auto r = reaction_drift_matrix(4, 1.7, ReactionVariant::generator);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(r.col(c).sum(), 0.0, 1e-14);
  const auto b = b_matrix(4, 0.2, ReactionVariant::generator);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(b.col(c).sum(), 0.0, 1e-14);
}

TEST(Matrices, SymmetricSqrt) {
  Eigen::MatrixXd m(2, 2);
  m << 2.0, -0.5, -0.5, 1.0;
  const auto r = symmetric_sqrt(m, "m");
  EXPECT_TRUE((r * r).isApprox(m, 1e-13));
  m(0, 1) = m(1, 0) = -3.0;
  try {
    symmetric_sqrt(m, "test-matrix");
    FAIL() << "expected domain_error";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("test-matrix"), std::string::npos);
  }
  // singular PSD matrices are accepted
  const auto s = sigma_matrix(params(2, 2, 8, {0.0, 0.5, 0.5}));
  EXPECT_NO_THROW(symmetric_sqrt(s, "Sigma"));
}

TEST(Covariance, FrozenPredictions) {
  const auto p = params(2, 2, 128, {0.5, 0.25, 0.25});
  const auto s = TestFunction::sine(1);
  EXPECT_NEAR(theoretical_covariance(1, 1, 0.0, s, s, p), 2.0 * 0.1875 * 0.5, 1e-15);
  EXPECT_NEAR(theoretical_covariance(1, 2, 0.0, s, s, p), -2.0 * 0.0625 * 0.5, 1e-15);
  EXPECT_NEAR(theoretical_covariance(1, 1, 0.02, s, s, p), 0.1875 * std::exp(-8.0 * kPi2 * 0.02), 1e-15);
  EXPECT_NEAR(theoretical_covariance(1, 1, 0.02, s, s, p), 0.038653686079496694, 1e-15);
  EXPECT_NEAR(theoretical_covariance(1, 1, 0.02, s, s, p, 1.0), 0.1875 * std::exp(-4.0 * kPi2 * 0.02), 1e-15);
  EXPECT_NEAR(theoretical_covariance(1, 1, 0.3, s, TestFunction::cosine(1), p), 0.0, 1e-15);
}

TEST(Covariance, TheoryReportSlopes) {
  const auto p = params(2, 2, 128, {0.5, 0.25, 0.25}, 2.0);
  const auto s = TestFunction::sine(1);
  const auto r = fluctuation_theory_report(p, s, s, {0.0, 0.01});
  EXPECT_NEAR(r.stirring_qv_slope(0, 0), 29.608813203268074, 1e-12);
  EXPECT_NEAR(r.reaction_qv_slope_generator(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(r.total_qv_slope()(0, 0), 30.608813203268074, 1e-12);
  EXPECT_NEAR(r.total_qv_slope()(0, 1), -9.869604401089358 - 1.0, 1e-12);
  EXPECT_TRUE(r.time_covariance[0].isApprox(r.initial_covariance));
}

TEST(ReactionDiffusion, MatchesMatrixExponentialPerMode) {
  const auto p = params(2, 2, 64, {0.5, 0.25, 0.25}, 2.0);
  ProfileSpec spec{{Profile::step(2.0, 0.0), Profile::constant(0.0)}};
  const auto init = spectral_from_profiles(spec, 4);
  const double t = 0.02;
  const auto sol = reaction_diffusion_solve(init, t, p);
  // mode 0: total mass conserved, difference decays at rate 2 Upsilon
  EXPECT_NEAR(sol.coef[0][0].real() + sol.coef[1][0].real(), 1.0, 1e-14);
  EXPECT_NEAR(sol.coef[0][0].real() - sol.coef[1][0].real(), std::exp(-4.0 * t), 1e-14);
  // mode 1: heat factor times the same mixing
  const double heat = std::exp(-2.0 * 4.0 * kPi2 * t);
  const auto c1 = init.coef[0][1];
  EXPECT_NEAR(std::abs(sol.coef[0][1] - heat * c1 * 0.5 * (1.0 + std::exp(-4.0 * t))), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(sol.coef[1][1] - heat * c1 * 0.5 * (1.0 - std::exp(-4.0 * t))), 0.0, 1e-14);
}

TEST(ReactionDiffusion, PairingMatchesQuadrature) {
  ProfileSpec spec{{Profile::gaussian_bump(0.3, 0.5, 0.4, 0.08), Profile::cosine(0.5, 0.2, 3)}};
  const auto phi = TestFunction::gaussian_bump(0.25, 0.1);
  const auto field = spectral_from_profiles(spec, phi.modes());
  const int points = 1 << 14;
  for (int a = 1; a <= 2; ++a) {
    double acc = 0.0;
    for (int i = 0; i < points; ++i) {
      const double u = static_cast<double>(i) / points;
      acc += phi(u) * spec.species[a - 1](u);
    }
    EXPECT_NEAR(field.pair(a, phi), acc / points, 1e-10);
  }
}

TEST(Spde, StabilityBoundEnforced) {
  EXPECT_DOUBLE_EQ(spde_stability_bound(256, 2), 1.0 / (4.0 * 65536.0));
  const auto p = params(2, 2, 8, {0.5, 0.25, 0.25});
  SpdeSettings s;
  s.cells = 32;
  s.dt = spde_stability_bound(32, 2) * 1.01;
  s.horizon = 0.01;
  Rng rng(1);
  EXPECT_THROW(ou_spde_integrate(s, p, rng, [](double, const GridField&) {}), std::invalid_argument);
}

TEST(Spde, NoiseFreeModeDecays) {
  const auto p = params(2, 2, 8, {0.5, 0.25, 0.25});
  SpdeSettings s;
  s.cells = 64;
  s.noise = false;
  s.horizon = 0.01;
  s.sample_interval = 0.01;
  const auto phi = TestFunction::sine(1).on_lattice(64, 64);
  GridField init;
  init.cells = 64;
  init.values = {phi, std::vector<double>(64, 0.0)};
  Rng rng(2);
  double last = 0.0, last_t = 0.0;
  ou_spde_integrate(s, p, rng, [&](double t, const GridField& f) {
    last = f.pair(1, phi);
    last_t = t;
  }, &init);
  // explicit Euler multiplies the mode by a fixed factor per step
  const double dt = 0.5 * spde_stability_bound(64, 2);
  const double factor = 1.0 - 2.0 * 64.0 * 64.0 * dt * (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi / 64.0));
  EXPECT_NEAR(last, 0.5 * std::pow(factor, std::lround(last_t / dt)), 1e-12);
  const double lambda = 2.0 * 4.0 * kPi2;
  EXPECT_NEAR(last, 0.5 * std::exp(-lambda * last_t), 1e-3);
}

TEST(Spde, StationaryCovarianceSmallGrid) {
  const auto p = params(2, 2, 8, {0.5, 0.25, 0.25});
  SpdeSettings s;
  s.cells = 32;
  s.horizon = 40.0;
  s.sample_interval = 0.005;
  const auto phi = TestFunction::sine(1).on_lattice(32, 32);
  std::vector<double> y11, y12;
  Rng rng(3);
  ou_spde_integrate(s, p, rng, [&](double, const GridField& f) {
    const double a = f.pair(1, phi), b = f.pair(2, phi);
    y11.push_back(a * a);
    y12.push_back(a * b);
  });
  const auto r11 = batch_means(y11, 40, 0.1875);
  const auto r12 = batch_means(y12, 40, -0.0625);
  EXPECT_LT(std::abs(r11.z_score), 4.0) << r11.estimate;
  EXPECT_LT(std::abs(r12.z_score), 4.0) << r12.estimate;
}

TEST(Spde, SameSeedSameField) {
  const auto p = params(2, 2, 8, {0.5, 0.25, 0.25}, 1.0);
  SpdeSettings s;
  s.cells = 16;
  s.horizon = 0.05;
  s.sample_interval = 0.05;
  auto run = [&] {
    Rng rng(77);
    std::vector<double> out;
    ou_spde_integrate(s, p, rng, [&](double, const GridField& f) { out = f.values[1]; });
    return out;
  };
  EXPECT_EQ(run(), run());
}
