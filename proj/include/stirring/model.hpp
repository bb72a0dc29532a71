#pragma once

// Microscopic state and transition rules of the multi-species stirring
// process on a periodic ring, plus the optional species-mutation channel.
//
// Species index 0 is always the hole. A site holds exactly 2j "slots",
// each filled by a hole or by a particle of species 1..n.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace stirring {

using Occupation = std::uint8_t;

/// Parameters of one model instance. `scaling_n == 0` means N = L.
struct ModelParams {
  int n_species = 1;
  int two_j = 1;
  int lattice_size = 2;
  int scaling_n = 0;
  std::vector<double> probs{0.5, 0.5};
  double upsilon = 0.0;

  int species_count() const { return n_species + 1; }
  int scaling() const { return scaling_n > 0 ? scaling_n : lattice_size; }

  /// Per-particle, per-target mutation rate in microscopic time (weak
  /// mutation scaling gamma = Upsilon / N^2).
  double gamma() const {
    const double n = scaling();
    return upsilon / (n * n);
  }
};

/// Returns a description of the first violated parameter invariant.
inline std::optional<std::string> check_params(const ModelParams& p) {
  if (p.n_species < 1) return "n_species must be >= 1";
  if (p.two_j < 1) return "two_j must be >= 1";
  if (p.two_j > 255) return "two_j must be <= 255";
  if (p.lattice_size < 2) return "lattice_size must be >= 2";
  if (p.scaling_n < 0) return "scaling_n must be >= 0";
  if (static_cast<int>(p.probs.size()) != p.species_count()) {
    std::ostringstream os;
    os << "probs must have n_species+1 = " << p.species_count() << " entries, got "
       << p.probs.size();
    return os.str();
  }
  double total = 0.0;
  for (double q : p.probs) {
    if (!(q >= 0.0 && q <= 1.0)) return "probs entries must lie in [0,1]";
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "probs must sum to 1 (sum = " << total << ")";
    return os.str();
  }
  if (!(p.upsilon >= 0.0) || !std::isfinite(p.upsilon)) return "upsilon must be finite and >= 0";
  return std::nullopt;
}

inline void require_valid(const ModelParams& p) {
  if (auto err = check_params(p)) throw std::invalid_argument("invalid model parameters: " + *err);
}

/// L x (n+1) table of occupation numbers, entry (x, k) = eta_k^x.
class Configuration {
 public:
  Configuration() = default;
  Configuration(int sites, int species_count)
      : sites_(sites), species_(species_count),
        occ_(static_cast<std::size_t>(sites) * species_count, 0) {
    if (sites < 1 || species_count < 2)
      throw std::invalid_argument("Configuration needs >= 1 site and >= 2 species slots");
  }

  /// Builds a configuration from explicit per-site vectors (all the same length).
  static Configuration from_sites(const std::vector<std::vector<int>>& sites) {
    if (sites.empty()) throw std::invalid_argument("from_sites: no sites");
    Configuration c(static_cast<int>(sites.size()), static_cast<int>(sites.front().size()));
    for (int x = 0; x < c.sites(); ++x) {
      if (static_cast<int>(sites[x].size()) != c.species_count())
        throw std::invalid_argument("from_sites: ragged site vectors");
      for (int k = 0; k < c.species_count(); ++k) {
        if (sites[x][k] < 0 || sites[x][k] > 255)
          throw std::invalid_argument("from_sites: occupation out of storable range");
        c(x, k) = static_cast<Occupation>(sites[x][k]);
      }
    }
    return c;
  }

  /// Every site set to the same vector.
  static Configuration uniform(int sites, const std::vector<int>& site_vector) {
    return from_sites(std::vector<std::vector<int>>(sites, site_vector));
  }

  int sites() const { return sites_; }
  int species_count() const { return species_; }

  Occupation operator()(int x, int k) const { return occ_[index(x, k)]; }
  Occupation& operator()(int x, int k) { return occ_[index(x, k)]; }

  std::span<const Occupation> site(int x) const {
    return {occ_.data() + static_cast<std::size_t>(x) * species_, static_cast<std::size_t>(species_)};
  }
  std::span<Occupation> site(int x) {
    return {occ_.data() + static_cast<std::size_t>(x) * species_, static_cast<std::size_t>(species_)};
  }
  std::span<const Occupation> data() const { return occ_; }

  int next(int x) const { return x + 1 == sites_ ? 0 : x + 1; }
  int prev(int x) const { return x == 0 ? sites_ - 1 : x - 1; }

  /// Sum over sites of eta_k.
  long species_total(int k) const {
    long s = 0;
    for (int x = 0; x < sites_; ++x) s += (*this)(x, k);
    return s;
  }

  /// Number of non-hole particles at site x.
  int particles_at(int x) const {
    int s = 0;
    for (int k = 1; k < species_; ++k) s += (*this)(x, k);
    return s;
  }

  bool operator==(const Configuration&) const = default;

 private:
  std::size_t index(int x, int k) const { return static_cast<std::size_t>(x) * species_ + k; }

  int sites_ = 0;
  int species_ = 0;
  std::vector<Occupation> occ_;
};

struct Violation {
  int site = -1;
  long site_sum = 0;
  std::string message;
};

/// Checks the per-site constraint sum_k eta_k^x = 2j and the occupancy bound.
inline std::optional<Violation> validate(const Configuration& c, const ModelParams& p) {
  if (c.species_count() != p.species_count()) {
    return Violation{-1, 0, "configuration has " + std::to_string(c.species_count()) +
                                " species slots, parameters require " +
                                std::to_string(p.species_count())};
  }
  if (c.sites() != p.lattice_size) {
    return Violation{-1, 0, "configuration has " + std::to_string(c.sites()) +
                                " sites, parameters require " + std::to_string(p.lattice_size)};
  }
  for (int x = 0; x < c.sites(); ++x) {
    long sum = 0;
    for (int k = 0; k < c.species_count(); ++k) {
      sum += c(x, k);
      if (c(x, k) > p.two_j) {
        return Violation{x, 0, "site " + std::to_string(x) + ": entry for species " +
                                   std::to_string(k) + " = " + std::to_string(int{c(x, k)}) +
                                   " exceeds 2j = " + std::to_string(p.two_j)};
      }
    }
    if (sum != p.two_j) {
      return Violation{x, sum, "site " + std::to_string(x) + ": occupations sum to " +
                                   std::to_string(sum) + ", expected 2j = " +
                                   std::to_string(p.two_j)};
    }
  }
  return std::nullopt;
}

inline void require_valid(const Configuration& c, const ModelParams& p) {
  if (auto v = validate(c, p)) throw std::invalid_argument("invalid configuration: " + v->message);
}

/// Exchange across edge (x, x+1): a species-k particle at x swaps with a
/// species-l particle at x+1.
struct Exchange {
  int site;
  int from_species;  // k, leaves x
  int to_species;    // l, leaves x+1
};

/// A species-k particle at x turns into species l (k, l >= 1).
struct Mutation {
  int site;
  int from_species;
  int to_species;
};

using Move = std::variant<Exchange, Mutation>;

/// eta_k^x * eta_l^{x+1}.
inline long exchange_rate(const Configuration& c, int x, int k, int l) {
  return static_cast<long>(c(x, k)) * c(c.next(x), l);
}

/// Sum over k != l of exchange_rate, via (2j)^2 - sum_k eta_k^x eta_k^{x+1}.
inline long edge_active_rate(const Configuration& c, int x, int two_j) {
  const int y = c.next(x);
  long same = 0;
  for (int k = 0; k < c.species_count(); ++k) same += static_cast<long>(c(x, k)) * c(y, k);
  return static_cast<long>(two_j) * two_j - same;
}

/// Total mutation rate at x: gamma (n-1) sum_{k>=1} zeta_k^x.
inline double mutation_rate(const Configuration& c, int x, const ModelParams& p) {
  return p.gamma() * (p.n_species - 1) * c.particles_at(x);
}

namespace detail {

inline void check_species(const Configuration& c, int k) {
  if (k < 0 || k >= c.species_count()) throw std::out_of_range("species index out of range");
}

}  // namespace detail

/// In-place version of apply_move; throws on zero-rate moves.
inline void apply_move_inplace(Configuration& c, const Move& move) {
  if (const auto* e = std::get_if<Exchange>(&move)) {
    detail::check_species(c, e->from_species);
    detail::check_species(c, e->to_species);
    if (e->site < 0 || e->site >= c.sites()) throw std::out_of_range("exchange site out of range");
    if (e->from_species == e->to_species) return;
    const int x = e->site;
    const int y = c.next(x);
    if (c(x, e->from_species) == 0 || c(y, e->to_species) == 0)
      throw std::invalid_argument("exchange has zero rate in this configuration");
    --c(x, e->from_species);
    ++c(x, e->to_species);
    ++c(y, e->from_species);
    --c(y, e->to_species);
    return;
  }
  const auto& m = std::get<Mutation>(move);
  detail::check_species(c, m.from_species);
  detail::check_species(c, m.to_species);
  if (m.site < 0 || m.site >= c.sites()) throw std::out_of_range("mutation site out of range");
  if (m.from_species == 0 || m.to_species == 0)
    throw std::invalid_argument("holes never mutate");
  if (m.from_species == m.to_species) throw std::invalid_argument("mutation requires k != l");
  if (c(m.site, m.from_species) == 0)
    throw std::invalid_argument("mutation has zero rate in this configuration");
  --c(m.site, m.from_species);
  ++c(m.site, m.to_species);
}

inline Configuration apply_move(Configuration c, const Move& move) {
  apply_move_inplace(c, move);
  return c;
}

// Snapshot CSV: header `site,species_0,...,species_n`, one row per site.

inline void write_configuration_csv(std::ostream& os, const Configuration& c) {
  os << "site";
  for (int k = 0; k < c.species_count(); ++k) os << ",species_" << k;
  os << '\n';
  for (int x = 0; x < c.sites(); ++x) {
    os << x;
    for (int k = 0; k < c.species_count(); ++k) os << ',' << int{c(x, k)};
    os << '\n';
  }
}

inline Configuration read_configuration_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("configuration CSV: missing header");
  const auto columns = std::count(line.begin(), line.end(), ',');
  if (line.rfind("site,species_0", 0) != 0 || columns < 2)
    throw std::runtime_error("configuration CSV: bad header '" + line + "'");
  std::vector<std::vector<int>> sites;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    if (std::stoi(cell) != static_cast<int>(sites.size()))
      throw std::runtime_error("configuration CSV: rows must be ordered by site");
    std::vector<int> v;
    while (std::getline(row, cell, ',')) v.push_back(std::stoi(cell));
    if (static_cast<long>(v.size()) != columns)
      throw std::runtime_error("configuration CSV: wrong column count at site " +
                               std::to_string(sites.size()));
    sites.push_back(std::move(v));
  }
  return Configuration::from_sites(sites);
}

}  // namespace stirring
