#pragma once

// Density and fluctuation fields of a configuration, their generator drifts
// and the closed-form Carre-du-Champ expressions.
//
// Field functions take the test function already sampled on the lattice,
// phi[x] = phi(x / N); see TestFunction::on_lattice.
//
// All Carre-du-Champ closed forms return Gamma of the *microscopic*
// generator. Multiply by N^2 for diffusive (macroscopic) time.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "stirring/model.hpp"
#include "stirring/test_function.hpp"

namespace stirring {

using LatticeFunction = std::span<const double>;

namespace detail {

inline void check_lattice_function(const Configuration& c, LatticeFunction f) {
  if (static_cast<int>(f.size()) != c.sites())
    throw std::invalid_argument("test function must be sampled on every lattice site");
}

}  // namespace detail

/// X_alpha(phi) = (1/N) sum_x phi(x/N) eta_alpha^x for alpha = 1..n (index alpha-1).
inline std::vector<double> density_field(const Configuration& c, LatticeFunction phi,
                                         const ModelParams& p) {
  detail::check_lattice_function(c, phi);
  std::vector<double> out(p.n_species, 0.0);
  for (int x = 0; x < c.sites(); ++x)
    for (int a = 1; a <= p.n_species; ++a) out[a - 1] += phi[x] * c(x, a);
  for (auto& v : out) v /= p.scaling();
  return out;
}

/// Y_alpha(phi) = (1/sqrt N) sum_x phi(x/N) (eta_alpha^x - 2j p_alpha).
inline std::vector<double> fluctuation_field(const Configuration& c, LatticeFunction phi,
                                             const ModelParams& p) {
  detail::check_lattice_function(c, phi);
  std::vector<double> out(p.n_species, 0.0);
  for (int x = 0; x < c.sites(); ++x)
    for (int a = 1; a <= p.n_species; ++a)
      out[a - 1] += phi[x] * (c(x, a) - p.two_j * p.probs[a]);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.scaling()));
  for (auto& v : out) v *= scale;
  return out;
}

/// Stirring Gamma(Y_alpha(phi), Y_beta(psi)).
///   alpha != beta: -(1/N) sum_x (eta_a^x eta_b^{x+1} + eta_b^x eta_a^{x+1}) dphi_x dpsi_x
///   alpha == beta:  (1/N) sum_x (eta_a^x (2j - eta_a^{x+1}) + eta_a^{x+1} (2j - eta_a^x)) dphi_x dpsi_x
/// with dphi_x = phi((x+1)/N) - phi(x/N).
inline double cdc_stirring_closed(const Configuration& c, LatticeFunction phi, LatticeFunction psi,
                                  int alpha, int beta, const ModelParams& p) {
  detail::check_lattice_function(c, phi);
  detail::check_lattice_function(c, psi);
  double acc = 0.0;
  for (int x = 0; x < c.sites(); ++x) {
    const int y = c.next(x);
    const double dphi = phi[y] - phi[x];
    const double dpsi = psi[y] - psi[x];
    double weight;
    if (alpha == beta) {
      weight = static_cast<double>(c(x, alpha)) * (p.two_j - c(y, alpha)) +
               static_cast<double>(c(y, alpha)) * (p.two_j - c(x, alpha));
    } else {
      weight = -(static_cast<double>(c(x, alpha)) * c(y, beta) +
                 static_cast<double>(c(x, beta)) * c(y, alpha));
    }
    acc += weight * dphi * dpsi;
  }
  return acc / p.scaling();
}

/// Mutation Gamma(Y_alpha(phi), Y_beta(psi)) with gamma = Upsilon / N^2.
///   alpha != beta: -(gamma/N) sum_x (zeta_a^x + zeta_b^x) phi psi
///   alpha == beta:  (gamma/N) sum_x (sum_{k>=1, k!=a} zeta_k^x + (n-1) zeta_a^x) phi psi
inline double cdc_reaction_closed(const Configuration& c, LatticeFunction phi, LatticeFunction psi,
                                  int alpha, int beta, const ModelParams& p) {
  detail::check_lattice_function(c, phi);
  detail::check_lattice_function(c, psi);
  if (p.upsilon == 0.0) return 0.0;
  double acc = 0.0;
  for (int x = 0; x < c.sites(); ++x) {
    double weight;
    if (alpha == beta) {
      weight = static_cast<double>(c.particles_at(x) - c(x, alpha)) +
               static_cast<double>(p.n_species - 1) * c(x, alpha);
    } else {
      weight = -static_cast<double>(c(x, alpha) + c(x, beta));
    }
    acc += weight * phi[x] * psi[x];
  }
  return p.gamma() * acc / p.scaling();
}

/// Discrete Laplacian N^2 [phi(x+1) + phi(x-1) - 2 phi(x)] on the ring.
inline std::vector<double> discrete_laplacian(LatticeFunction phi, int scaling_n) {
  const int L = static_cast<int>(phi.size());
  const double n2 = static_cast<double>(scaling_n) * scaling_n;
  std::vector<double> out(L);
  for (int x = 0; x < L; ++x)
    out[x] = n2 * (phi[(x + 1) % L] + phi[(x + L - 1) % L] - 2.0 * phi[x]);
  return out;
}

/// N^2 L Y_alpha(phi) for the stirring part, in exact discrete form
/// (2j / sqrt N) sum_x (eta_alpha^x - 2j p_alpha) N^2 [phi(x+1) + phi(x-1) - 2 phi(x)].
inline double drift_field(const Configuration& c, LatticeFunction phi, int alpha,
                          const ModelParams& p) {
  detail::check_lattice_function(c, phi);
  const auto lap = discrete_laplacian(phi, p.scaling());
  double acc = 0.0;
  for (int x = 0; x < c.sites(); ++x) acc += (c(x, alpha) - p.two_j * p.probs[alpha]) * lap[x];
  return p.two_j * acc / std::sqrt(static_cast<double>(p.scaling()));
}

/// N^2 L^r Y_alpha(phi) = (Upsilon / sqrt N) sum_x phi(x/N)
/// (sum_{k>=1, k!=alpha} zeta_k^x - (n-1) zeta_alpha^x).
inline double drift_field_reaction(const Configuration& c, LatticeFunction phi, int alpha,
                                   const ModelParams& p) {
  detail::check_lattice_function(c, phi);
  double acc = 0.0;
  for (int x = 0; x < c.sites(); ++x) {
    const double others = c.particles_at(x) - c(x, alpha);
    acc += phi[x] * (others - (p.n_species - 1.0) * c(x, alpha));
  }
  return p.upsilon * acc / std::sqrt(static_cast<double>(p.scaling()));
}

/// Weights w[x (n+1) + k] such that sum w eta equals the microscopic drift
/// (L + L^r) Y_alpha(phi). Feed to Engine::track to integrate the drift
/// along a trajectory.
inline std::vector<double> drift_weights(LatticeFunction phi, int alpha, const ModelParams& p) {
  const int L = static_cast<int>(phi.size());
  const int s = p.species_count();
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(p.scaling()));
  const double n2 = static_cast<double>(p.scaling()) * p.scaling();
  const auto lap = discrete_laplacian(phi, p.scaling());
  std::vector<double> w(static_cast<std::size_t>(L) * s, 0.0);
  for (int x = 0; x < L; ++x) {
    w[x * s + alpha] += p.two_j * lap[x] / n2 * inv_sqrt_n;
    if (p.upsilon > 0.0) {
      const double g = p.gamma() * phi[x] * inv_sqrt_n;
      for (int k = 1; k < s; ++k) w[x * s + k] += k == alpha ? -(p.n_species - 1.0) * g : g;
    }
  }
  return w;
}

/// Weights of Y_alpha(phi) without its centering constant.
inline std::vector<double> field_weights(LatticeFunction phi, int alpha, const ModelParams& p) {
  const int L = static_cast<int>(phi.size());
  const int s = p.species_count();
  std::vector<double> w(static_cast<std::size_t>(L) * s, 0.0);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(p.scaling()));
  for (int x = 0; x < L; ++x) w[x * s + alpha] = phi[x] * inv_sqrt_n;
  return w;
}

/// Limit of E[N^2 Gamma_{a,b}^phi] under nu_p:
/// -2 (2j)^2 p_a p_b int (phi')^2 (a != b), 2 (2j)^2 p_a (1 - p_a) int (phi')^2 (a == b).
inline double cdc_stirring_limit(const TestFunction& phi, int alpha, int beta, const ModelParams& p) {
  const double tj2 = static_cast<double>(p.two_j) * p.two_j;
  const double pf = alpha == beta ? p.probs[alpha] * (1.0 - p.probs[alpha])
                                  : -p.probs[alpha] * p.probs[beta];
  return 2.0 * tj2 * pf * phi.dirichlet();
}

/// Exact finite-N value of E[N^2 Gamma_{a,b}^phi] under nu_p (independent
/// sites), with the Dirichlet integral replaced by (1/N) sum_x N^2 dphi_x^2.
inline double cdc_stirring_expectation(LatticeFunction phi, int alpha, int beta, const ModelParams& p) {
  const int L = static_cast<int>(phi.size());
  const double n = p.scaling();
  double energy = 0.0;
  for (int x = 0; x < L; ++x) {
    const double d = phi[(x + 1) % L] - phi[x];
    energy += n * d * d;
  }
  const double tj2 = static_cast<double>(p.two_j) * p.two_j;
  const double pf = alpha == beta ? p.probs[alpha] * (1.0 - p.probs[alpha])
                                  : -p.probs[alpha] * p.probs[beta];
  return 2.0 * tj2 * pf * energy;
}

}  // namespace stirring
