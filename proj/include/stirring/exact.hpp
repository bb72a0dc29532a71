#pragma once

// Brute-force oracle for tiny rings: enumerate the state space, assemble the
// generator, and check reversibility, self-duality, Carre-du-Champ identities
// and the Dynkin drift exactly (up to floating point).
//
// Configurations are indexed in mixed radix: index = sum_x s_x S^x where s_x
// is the lexicographic rank of site x's vector among the S = C(2j+n, n)
// compositions of 2j into n+1 parts.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "stirring/equilibrium.hpp"
#include "stirring/model.hpp"

namespace stirring {

/// Thrown when an exact computation would exceed the state-space cap.
class CapExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline constexpr std::size_t kDefaultStateCap = 200000;

/// All compositions of 2j into `species` parts, in lexicographic order.
inline std::vector<std::vector<Occupation>> enumerate_site_states(int two_j, int species) {
  std::vector<std::vector<Occupation>> out;
  std::vector<Occupation> current(species, 0);
  auto rec = [&](auto&& self, int k, int remaining) -> void {
    if (k == species - 1) {
      current[k] = static_cast<Occupation>(remaining);
      out.push_back(current);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      current[k] = static_cast<Occupation>(v);
      self(self, k + 1, remaining - v);
    }
  };
  rec(rec, 0, two_j);
  return out;
}

class StateSpace {
 public:
  explicit StateSpace(const ModelParams& params, std::size_t cap = kDefaultStateCap)
      : sites_(params.lattice_size), species_(params.species_count()), two_j_(params.two_j) {
    require_valid(params);
    site_states_ = enumerate_site_states(two_j_, species_);
    lookup_.assign(static_cast<std::size_t>(std::pow(two_j_ + 1, species_)), -1);
    for (std::size_t i = 0; i < site_states_.size(); ++i) lookup_[site_key(site_states_[i])] = static_cast<int>(i);
    std::size_t total = 1;
    for (int x = 0; x < sites_; ++x) {
      if (total > cap / site_states_.size())
        throw CapExceeded("state space of " + std::to_string(site_states_.size()) + "^" +
                          std::to_string(sites_) + " configurations exceeds the cap of " +
                          std::to_string(cap));
      total *= site_states_.size();
    }
    size_ = total;
  }

  std::size_t size() const { return size_; }
  int sites() const { return sites_; }
  int species_count() const { return species_; }
  const std::vector<std::vector<Occupation>>& site_states() const { return site_states_; }

  Configuration configuration(std::size_t index) const {
    Configuration c(sites_, species_);
    for (int x = 0; x < sites_; ++x) {
      const auto& s = site_states_[index % site_states_.size()];
      std::copy(s.begin(), s.end(), c.site(x).begin());
      index /= site_states_.size();
    }
    return c;
  }

  std::size_t index(const Configuration& c) const {
    std::size_t idx = 0;
    for (int x = sites_ - 1; x >= 0; --x) {
      const int s = site_index(c.site(x));
      if (s < 0) throw std::invalid_argument("configuration is not in the state space");
      idx = idx * site_states_.size() + static_cast<std::size_t>(s);
    }
    return idx;
  }

  /// Rank of a site vector, or -1 if it is not a composition of 2j.
  int site_index(std::span<const Occupation> site) const {
    int sum = 0;
    for (auto v : site) {
      if (v > two_j_) return -1;
      sum += v;
    }
    if (sum != two_j_) return -1;
    return lookup_[site_key(site)];
  }

 private:
  std::size_t site_key(std::span<const Occupation> site) const {
    std::size_t key = 0;
    for (auto v : site) key = key * (two_j_ + 1) + v;
    return key;
  }

  int sites_, species_, two_j_;
  std::vector<std::vector<Occupation>> site_states_;
  std::vector<int> lookup_;
  std::size_t size_ = 0;
};

/// Rate matrix Q stored row-wise (off-diagonal entries sorted by column) plus
/// the diagonal -sum_j Q(i,j).
class GeneratorMatrix {
 public:
  struct Entry {
    std::size_t col;
    double rate;
  };

  GeneratorMatrix() = default;
  explicit GeneratorMatrix(std::size_t n) : offsets_(n + 1, 0), diagonal_(n, 0.0) {}

  std::size_t size() const { return diagonal_.size(); }
  double diagonal(std::size_t i) const { return diagonal_[i]; }
  std::span<const Entry> row(std::size_t i) const {
    return {entries_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return diagonal_[i];
    const auto r = row(i);
    const auto it = std::lower_bound(r.begin(), r.end(), j,
                                     [](const Entry& e, std::size_t c) { return e.col < c; });
    return it != r.end() && it->col == j ? it->rate : 0.0;
  }

  /// (Q f)(i) = sum_j Q(i,j) f(j).
  std::vector<double> apply(std::span<const double> f) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) {
      double acc = diagonal_[i] * f[i];
      for (const auto& e : row(i)) acc += e.rate * f[e.col];
      out[i] = acc;
    }
    return out;
  }

  /// (mu Q)(j) = sum_i mu(i) Q(i,j).
  std::vector<double> apply_left(std::span<const double> mu) const {
    std::vector<double> out(size(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      out[i] += mu[i] * diagonal_[i];
      for (const auto& e : row(i)) out[e.col] += mu[i] * e.rate;
    }
    return out;
  }

  double max_exit_rate() const {
    double m = 0.0;
    for (double d : diagonal_) m = std::max(m, -d);
    return m;
  }

  /// max_i |sum_j Q(i,j)|.
  double max_row_sum() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      double s = diagonal_[i];
      for (const auto& e : row(i)) s += e.rate;
      m = std::max(m, std::abs(s));
    }
    return m;
  }

  double min_off_diagonal() const {
    double m = 0.0;
    for (const auto& e : entries_) m = std::min(m, e.rate);
    return m;
  }

  void append_row(std::size_t i, const std::map<std::size_t, double>& rates) {
    double exit = 0.0;
    for (const auto& [col, rate] : rates) {
      entries_.push_back({col, rate});
      exit += rate;
    }
    diagonal_[i] = -exit;
    offsets_[i + 1] = entries_.size();
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Entry> entries_;
  std::vector<double> diagonal_;
};

/// Generator of the stirring and/or mutation dynamics on `space`.
/// Mutation uses `raw_gamma` if given, otherwise Upsilon / N^2.
inline GeneratorMatrix build_generator(const StateSpace& space, const ModelParams& params,
                                       bool include_stirring, bool include_reaction,
                                       std::optional<double> raw_gamma = std::nullopt) {
  const double gamma = raw_gamma.value_or(params.gamma());
  const int s = params.species_count();
  GeneratorMatrix q(space.size());
  std::map<std::size_t, double> rates;
  for (std::size_t i = 0; i < space.size(); ++i) {
    rates.clear();
    const Configuration c = space.configuration(i);
    if (include_stirring) {
      for (int x = 0; x < c.sites(); ++x) {
        for (int k = 0; k < s; ++k) {
          for (int l = 0; l < s; ++l) {
            if (k == l) continue;
            const long r = exchange_rate(c, x, k, l);
            if (r == 0) continue;
            rates[space.index(apply_move(c, Exchange{x, k, l}))] += static_cast<double>(r);
          }
        }
      }
    }
    if (include_reaction && gamma > 0.0) {
      for (int x = 0; x < c.sites(); ++x) {
        for (int k = 1; k < s; ++k) {
          if (c(x, k) == 0) continue;
          for (int l = 1; l < s; ++l) {
            if (l == k) continue;
            rates[space.index(apply_move(c, Mutation{x, k, l}))] += gamma * c(x, k);
          }
        }
      }
    }
    q.append_row(i, rates);
  }
  return q;
}

/// nu_p as a vector over the state space.
inline std::vector<double> product_measure(const StateSpace& space, int two_j, std::span<const double> probs) {
  std::vector<double> site_p(space.site_states().size());
  for (std::size_t s = 0; s < site_p.size(); ++s)
    site_p[s] = multinomial_pmf(two_j, probs, space.site_states()[s]);
  std::vector<double> mu(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    std::size_t idx = i;
    double p = 1.0;
    for (int x = 0; x < space.sites(); ++x) {
      p *= site_p[idx % site_p.size()];
      idx /= site_p.size();
    }
    mu[i] = p;
  }
  return mu;
}

/// max over pairs |mu(a) Q(a,b) - mu(b) Q(b,a)|.
inline double check_detailed_balance(const GeneratorMatrix& q, std::span<const double> mu) {
  double worst = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a)
    for (const auto& e : q.row(a))
      worst = std::max(worst, std::abs(mu[a] * e.rate - mu[e.col] * q(e.col, a)));
  return worst;
}

/// ||mu Q||_inf: zero iff mu is stationary.
inline double stationarity_residual(const GeneratorMatrix& q, std::span<const double> mu) {
  const auto r = q.apply_left(mu);
  double worst = 0.0;
  for (double v : r) worst = std::max(worst, std::abs(v));
  return worst;
}

struct Propagation {
  std::vector<double> values;
  double error_bound = 0.0;  // Poisson tail mass times ||f||_inf
  int terms = 0;
};

/// e^{tQ} f by uniformization with constant Lambda = max exit rate:
/// sum_k Poisson(Lambda t; k) P^k f, P = I + Q / Lambda. Truncated once
/// the Poisson tail times ||f||_inf drops below `tol`.
inline Propagation semigroup_apply(const GeneratorMatrix& q, double t, std::span<const double> f,
                                   double tol = 1e-14) {
  if (t < 0.0) throw std::invalid_argument("semigroup_apply needs t >= 0");
  Propagation out;
  out.values.assign(f.begin(), f.end());
  const double lambda = q.max_exit_rate();
  if (t == 0.0 || lambda == 0.0) return out;
  double fnorm = 0.0;
  for (double v : f) fnorm = std::max(fnorm, std::abs(v));
  const double mean = lambda * t;
  const int max_terms = static_cast<int>(mean + 60.0 * std::sqrt(mean) + 200.0);

  std::vector<double> power(f.begin(), f.end());
  std::fill(out.values.begin(), out.values.end(), 0.0);
  for (int k = 0;; ++k) {
    const double w = std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
    for (std::size_t i = 0; i < power.size(); ++i) out.values[i] += w * power[i];
    out.terms = k + 1;
    // P(Poisson > k) = regularized lower gamma P(k+1, mean)
    const double tail = boost::math::gamma_p(k + 1.0, mean);
    out.error_bound = tail * fnorm;
    if ((k > mean && out.error_bound < tol) || k >= max_terms) break;
    const auto qp = q.apply(power);
    for (std::size_t i = 0; i < power.size(); ++i) power[i] += qp[i] / lambda;
  }
  return out;
}

/// e^{sQ} v by Taylor series, for |s| max-exit-rate << 1 (any sign of s).
inline std::vector<double> short_time_propagate(const GeneratorMatrix& q, double s, std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::vector<double> term(v.begin(), v.end());
  for (int k = 1; k < 60; ++k) {
    term = q.apply(term);
    double norm = 0.0;
    for (auto& x : term) {
      x *= s / k;
      norm = std::max(norm, std::abs(x));
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += term[i];
    if (norm < 1e-20) break;
  }
  return out;
}

/// D(eta, xi) = prod_x (2j - |xi^x|)! / (2j)! prod_{k>=1} eta_k^x! / (eta_k^x - xi_k^x)!
/// Dual configurations use the same layout as configurations; entry 0 (holes)
/// is ignored.
inline double duality_function(const Configuration& eta, const Configuration& xi, int two_j) {
  if (eta.sites() != xi.sites() || eta.species_count() != xi.species_count())
    throw std::invalid_argument("duality_function: shape mismatch");
  double d = 1.0;
  for (int x = 0; x < eta.sites(); ++x) {
    int dual_particles = 0;
    for (int k = 1; k < eta.species_count(); ++k) {
      const int e = eta(x, k), z = xi(x, k);
      if (z > e) return 0.0;
      for (int i = 0; i < z; ++i) d *= e - i;  // falling factorial e!/(e-z)!
      dual_particles += z;
    }
    if (dual_particles > two_j) throw std::invalid_argument("dual occupancy exceeds 2j");
    // (2j - m)! / (2j)! = 1 / (2j (2j-1) ... (2j-m+1))
    for (int i = 0; i < dual_particles; ++i) d /= two_j - i;
  }
  return d;
}

/// Dual configuration from per-site particle counts of species 1..n, padded
/// with holes up to 2j.
inline Configuration pad_dual(const std::vector<std::vector<int>>& counts, int two_j) {
  std::vector<std::vector<int>> sites;
  for (const auto& c : counts) {
    int used = 0;
    for (int v : c) used += v;
    if (used > two_j) throw std::invalid_argument("dual occupancy exceeds 2j");
    std::vector<int> s{two_j - used};
    s.insert(s.end(), c.begin(), c.end());
    sites.push_back(std::move(s));
  }
  return Configuration::from_sites(sites);
}

struct DualitySides {
  double lhs = 0.0;  // E_eta[D(eta_t, xi)]
  double rhs = 0.0;  // E_xi[D(eta, xi_t)]
  double defect() const { return std::abs(lhs - rhs); }
};

/// Both sides of the self-duality relation, the dual evolving under the same
/// stirring generator.
inline DualitySides self_duality_sides(const StateSpace& space, const GeneratorMatrix& q, double t,
                                       const Configuration& eta, const Configuration& xi, int two_j) {
  std::vector<double> f(space.size()), g(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const Configuration c = space.configuration(i);
    f[i] = duality_function(c, xi, two_j);
    g[i] = duality_function(eta, c, two_j);
  }
  return {semigroup_apply(q, t, f).values[space.index(eta)], semigroup_apply(q, t, g).values[space.index(xi)]};
}

/// |E_eta[D(eta_t, xi)] - E_xi[D(eta, xi_t)]|.
inline double check_self_duality(const StateSpace& space, const GeneratorMatrix& q, double t,
                                 const Configuration& eta, const Configuration& xi, int two_j) {
  return self_duality_sides(space, q, t, eta, xi, two_j).defect();
}

/// Gamma(f, g) = Q(fg) - f Qg - g Qf, entrywise.
inline std::vector<double> carre_du_champ_exact(const GeneratorMatrix& q, std::span<const double> f,
                                                std::span<const double> g) {
  std::vector<double> fg(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) fg[i] = f[i] * g[i];
  const auto qfg = q.apply(fg);
  const auto qf = q.apply(f);
  const auto qg = q.apply(g);
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = qfg[i] - f[i] * qg[i] - g[i] * qf[i];
  return out;
}

/// max_eta |d/dt E_eta[f(eta_t)] - E_eta[(Qf)(eta_t)]| with a centered
/// difference of step h around t.
inline double check_dynkin_drift(const GeneratorMatrix& q, std::span<const double> f, double t,
                                 double h = 1e-5) {
  const auto at_t = semigroup_apply(q, t, f).values;
  const auto fwd = short_time_propagate(q, h, at_t);
  const auto bwd = short_time_propagate(q, -h, at_t);
  const auto qf = q.apply(f);
  const auto expected = semigroup_apply(q, t, qf).values;
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    worst = std::max(worst, std::abs((fwd[i] - bwd[i]) / (2.0 * h) - expected[i]));
  return worst;
}

/// Evaluates fn(configuration) on every state.
template <class Fn>
std::vector<double> tabulate(const StateSpace& space, Fn&& fn) {
  std::vector<double> out(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) out[i] = fn(space.configuration(i));
  return out;
}

}  // namespace stirring
