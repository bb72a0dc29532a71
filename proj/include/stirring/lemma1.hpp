#pragma once

#include <cstdint>
#include <vector>

#include "stirring/equilibrium.hpp"
#include "stirring/fields.hpp"
#include "stirring/parallel.hpp"
#include "stirring/rng.hpp"
#include "stirring/stats.hpp"

namespace stirring {

struct Lemma1Stats {
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  double theory = 0.0;       // N -> infinity limit of E[N^2 Gamma]
  double finite_n = 0.0;     // exact E[N^2 Gamma] at this N
  std::size_t n_samples = 0;
};

/// Sample mean and variance of N^2 Gamma_{a,b}^phi (stirring Carre-du-Champ)
/// over `replicas` independent draws from nu_p.
inline Lemma1Stats lemma1_statistics(const ModelParams& params, const TestFunction& phi, int alpha,
                                     int beta, std::size_t replicas, std::uint64_t seed,
                                     unsigned threads = 1, std::uint64_t stream = 0x1e33a1) {
  const auto phi_l = phi.on_lattice(params.lattice_size, params.scaling());
  const double n2 = static_cast<double>(params.scaling()) * params.scaling();
  std::vector<double> samples(replicas);
  for_each_replica(replicas, threads, [&](std::size_t i) {
    Rng rng = replica_rng(seed, stream, i);
    const Configuration c = sample_equilibrium(rng, params);
    samples[i] = n2 * cdc_stirring_closed(c, phi_l, phi_l, alpha, beta, params);
  });
  Welford w;
  for (double s : samples) w.update(s);
  Lemma1Stats out;
  out.mean = w.mean();
  out.variance = w.variance();
  out.std_error = w.std_error();
  out.theory = cdc_stirring_limit(phi, alpha, beta, params);
  out.finite_n = cdc_stirring_expectation(phi_l, alpha, beta, params);
  out.n_samples = replicas;
  return out;
}

}  // namespace stirring
