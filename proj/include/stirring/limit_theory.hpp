#pragma once

// Limiting objects of the scaling limits: the heat semigroup S_t = e^{2j t Delta}
// on the torus, equilibrium covariances, the noise matrices of the limiting
// Ornstein-Uhlenbeck system, an exact Fourier solver for the linear
// reaction-diffusion equations, and an Euler-Maruyama integrator for the
// limiting SPDE on a periodic grid.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stirring/equilibrium.hpp"
#include "stirring/model.hpp"
#include "stirring/rng.hpp"
#include "stirring/test_function.hpp"

namespace stirring {

/// Which form of the mutation terms to use in the limit equations.
///  - generator: derived directly from the mutation generator. Drift
///    Upsilon (J - (n-1) I), noise B with diagonal 2(n-1) p and off-diagonal -2p.
///  - simplified: drift Upsilon (J - I), noise B with diagonal n p and off-diagonal -2p.
/// J is the all-ones matrix with zero diagonal. Both coincide at n = 2.
enum class ReactionVariant { generator, simplified };

inline const char* to_string(ReactionVariant v) {
  return v == ReactionVariant::generator ? "generator" : "simplified";
}

inline ReactionVariant reaction_variant_from_string(const std::string& s) {
  if (s == "generator") return ReactionVariant::generator;
  if (s == "simplified") return ReactionVariant::simplified;
  throw std::invalid_argument("unknown reaction variant '" + s + "' (expected generator|simplified)");
}

/// S_t phi with S_t = exp(2j t Delta).
inline TestFunction heat_semigroup(const TestFunction& phi, double t, int two_j) {
  return phi.heat(t, static_cast<double>(two_j));
}

/// Limiting Cov(Y_a^t(phi), Y_b^0(psi)) at equilibrium (stirring only):
/// -(2j) p_a p_b <S_t phi, psi> for a != b, (2j) p_a (1 - p_a) <S_t phi, psi> for a == b.
/// `diffusivity` selects the semigroup e^{D t Delta}; the particle system
/// corresponds to D = 2j (the default).
inline double theoretical_covariance(int alpha, int beta, double t, const TestFunction& phi,
                                     const TestFunction& psi, const ModelParams& p,
                                     double diffusivity = -1.0) {
  const double d = diffusivity > 0.0 ? diffusivity : static_cast<double>(p.two_j);
  const double pairing = phi.heat(t, d).inner(psi);
  const double pf = alpha == beta ? p.probs[alpha] * (1.0 - p.probs[alpha])
                                  : -p.probs[alpha] * p.probs[beta];
  return p.two_j * pf * pairing;
}

/// Sigma_ab = p_a (delta_ab - p_b), a, b = 1..n.
inline Eigen::MatrixXd sigma_matrix(const ModelParams& p) {
  const int n = p.n_species;
  Eigen::MatrixXd s(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      s(a, b) = a == b ? p.probs[a + 1] * (1.0 - p.probs[a + 1]) : -p.probs[a + 1] * p.probs[b + 1];
  return s;
}

/// Mutation noise matrix B for common species probability p_hat.
inline Eigen::MatrixXd b_matrix(int n, double p_hat, ReactionVariant variant) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(n, n, -2.0 * p_hat);
  const double diag = variant == ReactionVariant::generator ? 2.0 * (n - 1) * p_hat : n * p_hat;
  b.diagonal().setConstant(diag);
  return b;
}

/// Mutation drift matrix R acting on the species vector.
inline Eigen::MatrixXd reaction_drift_matrix(int n, double upsilon, ReactionVariant variant) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(n, n, upsilon);
  const double diag = variant == ReactionVariant::generator ? -(n - 1.0) * upsilon : -upsilon;
  r.diagonal().setConstant(diag);
  return r;
}

struct NoiseMatrices {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd b_matrix;
  ReactionVariant variant = ReactionVariant::generator;
};

inline NoiseMatrices noise_matrices(const ModelParams& p, ReactionVariant variant) {
  return {sigma_matrix(p), b_matrix(p.n_species, p.probs.size() > 1 ? p.probs[1] : 0.0, variant), variant};
}

/// Symmetric square root by eigendecomposition. Eigenvalues in [-1e-12, 1e-14)
/// (relative to the largest magnitude) are clamped to 0; anything more
/// negative throws, naming `label` and the offending eigenvalue.
inline Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m, const std::string& label) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd values = eig.eigenvalues();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  for (int i = 0; i < values.size(); ++i) {
    if (values(i) < -1e-12 * scale) {
      std::ostringstream os;
      os.precision(17);
      os << label << " is not positive semidefinite: eigenvalue " << values(i);
      throw std::domain_error(os.str());
    }
    values(i) = values(i) < 1e-14 * scale ? 0.0 : std::sqrt(values(i));
  }
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

inline Eigen::MatrixXd symmetric_expm(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd e = eig.eigenvalues().array().exp();
  return eig.eigenvectors() * e.asDiagonal() * eig.eigenvectors().transpose();
}

/// Per-species complex Fourier coefficients c_m = int rho e^{-2 pi i m u},
/// m = 0..modes. Negative modes are the conjugates (real fields).
struct SpectralField {
  int modes = 0;
  std::vector<std::vector<std::complex<double>>> coef;  // [species][m]

  /// int_0^1 phi(u) rho^(alpha)(u) du for a trigonometric test function.
  double pair(int alpha, const TestFunction& phi) const {
    const auto& c = coef.at(alpha - 1);
    double acc = phi.mean() * c[0].real();
    // <cos(2 pi m .), rho> = Re c_m, <sin(2 pi m .), rho> = -Im c_m
    for (int m = 1; m <= std::min(modes, phi.modes()); ++m)
      acc += phi.cos_coef(m) * c[m].real() - phi.sin_coef(m) * c[m].imag();
    return acc;
  }
};

inline SpectralField spectral_from_profiles(const ProfileSpec& spec, int modes) {
  SpectralField f;
  f.modes = modes;
  for (const auto& prof : spec.species) {
    std::vector<std::complex<double>> c(modes + 1);
    for (int m = 0; m <= modes; ++m) c[m] = prof.fourier(m);
    f.coef.push_back(std::move(c));
  }
  return f;
}

/// Exact mode-wise solution of
///   d_t rho = 2j Delta rho + R rho,   R = reaction_drift_matrix(variant),
/// i.e. exp(t K_m) with K_m = -2j (2 pi m)^2 I + R.
inline SpectralField reaction_diffusion_solve(const SpectralField& initial, double t, const ModelParams& p,
                                              ReactionVariant variant = ReactionVariant::generator) {
  if (t < 0.0) throw std::invalid_argument("reaction_diffusion_solve needs t >= 0");
  const int n = p.n_species;
  if (static_cast<int>(initial.coef.size()) != n)
    throw std::invalid_argument("spectral field must have one row per species");
  const Eigen::MatrixXd reaction = symmetric_expm(reaction_drift_matrix(n, p.upsilon, variant) * t);
  SpectralField out = initial;
  for (int m = 0; m <= initial.modes; ++m) {
    const double k = 2.0 * std::numbers::pi * m;
    const double heat = std::exp(-p.two_j * k * k * t);
    for (int a = 0; a < n; ++a) {
      std::complex<double> acc = 0.0;
      for (int b = 0; b < n; ++b) acc += reaction(a, b) * initial.coef[b][m];
      out.coef[a][m] = heat * acc;
    }
  }
  return out;
}

/// Integration settings for the discretized OU system.
struct SpdeSettings {
  int cells = 256;
  double dt = 0.0;              // 0 => dt_fraction of the stability bound
  double dt_fraction = 0.5;
  double horizon = 1.0;
  double sample_interval = 1e-3;
  bool noise = true;
  bool stationary_start = true;  // start from the discrete stationary law
  ReactionVariant variant = ReactionVariant::generator;
};

/// Explicit-scheme stability bound 1 / (2 * 2j * M^2).
inline double spde_stability_bound(int cells, int two_j) {
  return 1.0 / (2.0 * two_j * static_cast<double>(cells) * cells);
}

/// Fields Y[species][cell] on a periodic grid of M cells (width h = 1/M);
/// Y(phi) is approximated by h sum_i phi(i/M) Y_i.
struct GridField {
  int cells = 0;
  std::vector<std::vector<double>> values;

  double pair(int alpha, std::span<const double> phi_on_grid) const {
    const auto& v = values.at(alpha - 1);
    double acc = 0.0;
    for (int i = 0; i < cells; ++i) acc += phi_on_grid[i] * v[i];
    return acc / cells;
  }
};

/// Euler-Maruyama for
///   dY = 2j Delta Y dt + R Y dt + 2j sqrt(2 Sigma) div(dW) + sqrt(2j Upsilon) sqrt(B) dV
/// with conservative noise from edge-indexed white noise:
///   cell i receives C (xi_{i-1/2} - xi_{i+1/2}) sqrt(dt) M^{3/2},   C = 2j sqrt(2 Sigma),
/// and the mutation noise sqrt(2j Upsilon) sqrt(B) xi'_i sqrt(dt M).
/// `initial` (if non-empty) overrides the starting field. observer(t, field)
/// is called at t = 0 and every sample_interval.
inline void ou_spde_integrate(const SpdeSettings& settings, const ModelParams& p, Rng& rng,
                              const std::function<void(double, const GridField&)>& observer,
                              const GridField* initial = nullptr) {
  require_valid(p);
  const int m = settings.cells;
  const int n = p.n_species;
  if (m < 4) throw std::invalid_argument("SPDE grid needs >= 4 cells");
  const double bound = spde_stability_bound(m, p.two_j);
  const double dt = settings.dt > 0.0 ? settings.dt : settings.dt_fraction * bound;
  if (!(dt < bound)) {
    std::ostringstream os;
    os.precision(6);
    os << "SPDE time step " << dt << " violates the explicit stability bound " << bound;
    throw std::invalid_argument(os.str());
  }

  const Eigen::MatrixXd sigma = sigma_matrix(p);
  const Eigen::MatrixXd conservative =
      settings.noise ? Eigen::MatrixXd(p.two_j * symmetric_sqrt(2.0 * sigma, "2*Sigma"))
                     : Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd reaction_noise = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd drift = Eigen::MatrixXd::Zero(n, n);
  if (p.upsilon > 0.0) {
    drift = reaction_drift_matrix(n, p.upsilon, settings.variant);
    if (settings.noise) {
      const auto b = b_matrix(n, p.probs[1], settings.variant);
      reaction_noise = std::sqrt(p.two_j * p.upsilon) *
                       symmetric_sqrt(b, std::string("B (") + to_string(settings.variant) + " variant)");
    }
  }

  StandardNormal normal;
  GridField field;
  field.cells = m;
  field.values.assign(n, std::vector<double>(m, 0.0));
  if (initial != nullptr) {
    if (initial->cells != m || static_cast<int>(initial->values.size()) != n)
      throw std::invalid_argument("initial SPDE field has the wrong shape");
    field = *initial;
  } else if (settings.stationary_start) {
    // discrete stationary law: i.i.d. cells with covariance 2j Sigma M
    const Eigen::MatrixXd root = symmetric_sqrt(p.two_j * sigma * static_cast<double>(m), "2j*Sigma");
    Eigen::VectorXd z(n);
    for (int i = 0; i < m; ++i) {
      for (int a = 0; a < n; ++a) z(a) = normal(rng);
      const Eigen::VectorXd y = root * z;
      for (int a = 0; a < n; ++a) field.values[a][i] = y(a);
    }
  }

  const double diffusion = p.two_j * static_cast<double>(m) * m * dt;
  const double cons_scale = std::sqrt(dt) * std::pow(static_cast<double>(m), 1.5);
  const double react_scale = std::sqrt(dt * m);
  const long steps = std::lround(settings.horizon / dt);
  const long sample_every = std::max(1L, std::lround(settings.sample_interval / dt));

  std::vector<std::vector<double>> edge_noise(n, std::vector<double>(m));
  std::vector<std::vector<double>> site_noise(n, std::vector<double>(m));
  std::vector<std::vector<double>> next = field.values;
  std::vector<double> raw(n);
  const bool has_reaction_noise = settings.noise && p.upsilon > 0.0;

  observer(0.0, field);
  for (long step = 1; step <= steps; ++step) {
    if (settings.noise) {
      for (int i = 0; i < m; ++i) {
        for (int a = 0; a < n; ++a) raw[a] = normal(rng);
        for (int a = 0; a < n; ++a) {
          double s = 0.0;
          for (int b = 0; b < n; ++b) s += conservative(a, b) * raw[b];
          edge_noise[a][i] = s;  // edge between cell i and i+1
        }
      }
      if (has_reaction_noise) {
        for (int i = 0; i < m; ++i) {
          for (int a = 0; a < n; ++a) raw[a] = normal(rng);
          for (int a = 0; a < n; ++a) {
            double s = 0.0;
            for (int b = 0; b < n; ++b) s += reaction_noise(a, b) * raw[b];
            site_noise[a][i] = s;
          }
        }
      }
    }
    for (int a = 0; a < n; ++a) {
      const auto& y = field.values[a];
      auto& out = next[a];
      for (int i = 0; i < m; ++i) {
        const int left = i == 0 ? m - 1 : i - 1;
        const int right = i + 1 == m ? 0 : i + 1;
        double v = y[i] + diffusion * (y[right] + y[left] - 2.0 * y[i]);
        if (p.upsilon > 0.0) {
          double r = 0.0;
          for (int b = 0; b < n; ++b) r += drift(a, b) * field.values[b][i];
          v += dt * r;
        }
        if (settings.noise) {
          v += cons_scale * (edge_noise[a][left] - edge_noise[a][i]);
          if (has_reaction_noise) v += react_scale * site_noise[a][i];
        }
        out[i] = v;
      }
    }
    std::swap(field.values, next);
    if (step % sample_every == 0) observer(step * dt, field);
  }
}

/// Theoretical targets for a fluctuation experiment.
struct TheoryReport {
  Eigen::MatrixXd initial_covariance;               // 2j Sigma <phi, psi>
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> time_covariance;     // 2j Sigma <S_t phi, psi>
  Eigen::MatrixXd stirring_qv_slope;                // 2 (2j)^2 Sigma int (phi')^2
  Eigen::MatrixXd reaction_qv_slope_generator;      // 2j Upsilon B_generator int phi^2
  Eigen::MatrixXd reaction_qv_slope_simplified;          // 2j Upsilon B_simplified int phi^2
  ReactionVariant variant = ReactionVariant::generator;

  Eigen::MatrixXd total_qv_slope() const {
    return stirring_qv_slope +
           (variant == ReactionVariant::generator ? reaction_qv_slope_generator : reaction_qv_slope_simplified);
  }
};

inline TheoryReport fluctuation_theory_report(const ModelParams& p, const TestFunction& phi,
                                              const TestFunction& psi, const std::vector<double>& times,
                                              ReactionVariant variant = ReactionVariant::generator) {
  TheoryReport r;
  r.variant = variant;
  const Eigen::MatrixXd sigma = sigma_matrix(p);
  r.initial_covariance = p.two_j * sigma * phi.inner(psi);
  r.times = times;
  for (double t : times) r.time_covariance.push_back(p.two_j * sigma * heat_semigroup(phi, t, p.two_j).inner(psi));
  const double tj = p.two_j;
  r.stirring_qv_slope = 2.0 * tj * tj * sigma * phi.dirichlet();
  const int n = p.n_species;
  const double p_hat = p.probs.size() > 1 ? p.probs[1] : 0.0;
  r.reaction_qv_slope_generator = tj * p.upsilon * b_matrix(n, p_hat, ReactionVariant::generator) * phi.l2_squared();
  r.reaction_qv_slope_simplified = tj * p.upsilon * b_matrix(n, p_hat, ReactionVariant::simplified) * phi.l2_squared();
  return r;
}

}  // namespace stirring
