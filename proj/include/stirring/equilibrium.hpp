#pragma once

// Reversible product measures nu_p = (x) MN(2j; p) and inhomogeneous
// product measures built from macroscopic profiles.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "stirring/model.hpp"
#include "stirring/rng.hpp"

namespace stirring {

/// One draw from MN(2j; p), written into `out` (size n+1): 2j independent
/// categorical trials.
inline void sample_site(Rng& rng, int two_j, std::span<const double> probs, std::span<Occupation> out) {
  std::fill(out.begin(), out.end(), Occupation{0});
  for (int trial = 0; trial < two_j; ++trial) {
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc && probs[k] > 0.0) break;
    }
    // round-off fallthrough lands on the last species with positive weight
    while (probs[k] <= 0.0 && k > 0) --k;
    ++out[k];
  }
}

inline std::vector<int> sample_site(Rng& rng, int two_j, std::span<const double> probs) {
  std::vector<Occupation> buf(probs.size());
  sample_site(rng, two_j, probs, buf);
  return {buf.begin(), buf.end()};
}

/// True when p_1 = ... = p_n, the condition for Lambda_p to be reversible
/// under mutation.
inline bool has_symmetric_species(const std::vector<double>& probs, double tol = 1e-12) {
  for (std::size_t k = 2; k < probs.size(); ++k)
    if (std::abs(probs[k] - probs[1]) > tol) return false;
  return true;
}

inline Configuration sample_equilibrium(Rng& rng, const ModelParams& params) {
  require_valid(params);
  if (params.upsilon > 0.0 && !has_symmetric_species(params.probs)) {
    throw std::invalid_argument(
        "reaction runs need equal species probabilities p_1 = ... = p_n for a reversible "
        "product measure");
  }
  Configuration c(params.lattice_size, params.species_count());
  for (int x = 0; x < c.sites(); ++x) sample_site(rng, params.two_j, params.probs, c.site(x));
  return c;
}

struct Moments {
  double mean;
  double cov;
};

/// Mean of eta_alpha and Cov(eta_alpha, eta_beta) under MN(2j; p).
inline Moments multinomial_moments(int two_j, std::span<const double> probs, int alpha, int beta) {
  const double pa = probs[alpha];
  const double pb = probs[beta];
  const double cov = alpha == beta ? two_j * pa * (1.0 - pa) : -two_j * pa * pb;
  return {two_j * pa, cov};
}

/// Probability of a site vector under MN(2j; p).
inline double multinomial_pmf(int two_j, std::span<const double> probs, std::span<const Occupation> site) {
  double logp = std::lgamma(two_j + 1.0);
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (site[k] == 0) continue;
    if (probs[k] <= 0.0) return 0.0;
    logp += site[k] * std::log(probs[k]) - std::lgamma(site[k] + 1.0);
  }
  return std::exp(logp);
}

/// Macroscopic density profile of one species on the torus. Built-ins:
/// constant, step, gaussian-bump, cosine.
struct Profile {
  enum class Kind { constant, step, gaussian_bump, cosine };

  Kind kind = Kind::constant;
  double level = 0.0;      // constant value; step: value inside [lo,hi); bump/cosine: baseline
  double outside = 0.0;    // step: value outside [lo,hi)
  double lo = 0.0, hi = 0.5;
  double amplitude = 0.0;  // bump/cosine
  double center = 0.5;     // bump
  double width = 0.1;      // bump
  int mode = 1;            // cosine

  static Profile constant(double v) { return {Kind::constant, v}; }
  static Profile step(double inside, double outside, double lo = 0.0, double hi = 0.5) {
    Profile p{Kind::step, inside, outside, lo, hi};
    return p;
  }
  static Profile gaussian_bump(double baseline, double amplitude, double center, double width) {
    Profile p;
    p.kind = Kind::gaussian_bump;
    p.level = baseline;
    p.amplitude = amplitude;
    p.center = center;
    p.width = width;
    return p;
  }
  static Profile cosine(double baseline, double amplitude, int mode) {
    Profile p;
    p.kind = Kind::cosine;
    p.level = baseline;
    p.amplitude = amplitude;
    p.mode = mode;
    return p;
  }

  double operator()(double u) const {
    u -= std::floor(u);
    switch (kind) {
      case Kind::constant: return level;
      case Kind::step: return (u >= lo && u < hi) ? level : outside;
      case Kind::gaussian_bump: {
        double s = 0.0;
        for (int k = -3; k <= 3; ++k) {
          const double d = u - center - k;
          s += std::exp(-d * d / (2.0 * width * width));
        }
        return level + amplitude * s;
      }
      case Kind::cosine: return level + amplitude * std::cos(2.0 * std::numbers::pi * mode * u);
    }
    return 0.0;
  }

  /// Complex Fourier coefficient int_0^1 rho(u) e^{-2 pi i m u} du, m >= 0.
  std::complex<double> fourier(int m) const {
    using namespace std::complex_literals;
    const double tau = 2.0 * std::numbers::pi;
    switch (kind) {
      case Kind::constant: return m == 0 ? level : 0.0;
      case Kind::step: {
        if (m == 0) return level * (hi - lo) + outside * (1.0 - (hi - lo));
        const auto segment = (std::exp(-1i * tau * double(m) * lo) - std::exp(-1i * tau * double(m) * hi)) /
                             (1i * tau * double(m));
        return (level - outside) * segment;
      }
      case Kind::gaussian_bump: {
        const double g = amplitude * width * std::sqrt(tau) *
                         std::exp(-2.0 * std::numbers::pi * std::numbers::pi * width * width * m * m);
        return (m == 0 ? level : 0.0) + g * std::exp(-1i * tau * double(m) * center);
      }
      case Kind::cosine:
        if (m == 0) return mode == 0 ? level + amplitude : level;
        return m == mode ? 0.5 * amplitude : 0.0;
    }
    return 0.0;
  }
};

/// Per-species profiles rho^(1..n).
struct ProfileSpec {
  std::vector<Profile> species;

  /// Checks 0 <= rho^(alpha) and sum_alpha rho^(alpha) <= 2j on a grid that
  /// includes every lattice point u = x/N. Returns a description on failure.
  std::optional<std::string> check(int two_j, int sites, int scaling_n, int grid = 4096) const {
    auto check_at = [&](double u) -> std::optional<std::string> {
      double total = 0.0;
      for (std::size_t a = 0; a < species.size(); ++a) {
        const double v = species[a](u);
        if (v < -1e-12)
          return "profile of species " + std::to_string(a + 1) + " is negative at u = " + std::to_string(u);
        total += v;
      }
      if (total > two_j + 1e-12)
        return "profiles sum to " + std::to_string(total) + " > 2j = " + std::to_string(two_j) +
               " at u = " + std::to_string(u);
      return std::nullopt;
    };
    for (int i = 0; i < grid; ++i)
      if (auto e = check_at(static_cast<double>(i) / grid)) return e;
    for (int x = 0; x < sites; ++x)
      if (auto e = check_at(static_cast<double>(x) / scaling_n)) return e;
    return std::nullopt;
  }
};

/// Site x drawn from MN(2j; q(x)) with q_alpha(x) = rho^(alpha)(x/N) / 2j.
inline Configuration sample_profile(Rng& rng, const ModelParams& params, const ProfileSpec& profile) {
  require_valid(params);
  if (static_cast<int>(profile.species.size()) != params.n_species)
    throw std::invalid_argument("profile needs one entry per species");
  if (auto err = profile.check(params.two_j, params.lattice_size, params.scaling()))
    throw std::invalid_argument("invalid profile: " + *err);
  Configuration c(params.lattice_size, params.species_count());
  std::vector<double> q(params.species_count());
  for (int x = 0; x < c.sites(); ++x) {
    const double u = static_cast<double>(x) / params.scaling();
    double rest = 1.0;
    for (int a = 1; a <= params.n_species; ++a) {
      q[a] = std::max(0.0, profile.species[a - 1](u) / params.two_j);
      rest -= q[a];
    }
    q[0] = std::max(0.0, rest);
    sample_site(rng, params.two_j, q, c.site(x));
  }
  return c;
}

}  // namespace stirring
