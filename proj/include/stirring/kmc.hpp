#pragma once

// Exact continuous-time simulation of the stirring + mutation dynamics.
//
// Event selection: the total rate is sum_e r_e + gamma (n-1) P, where r_e is
// the active exchange rate of edge (x, x+1) and P the (conserved) number of
// non-hole particles. Edges are drawn from a Fenwick tree over the integer
// rates r_e, mutation sites from a Fenwick tree over per-site particle
// counts. Identity moves (k = l exchanges) never enter the event set.
//
// The engine runs in microscopic time; a macroscopic schedule time t maps
// to t N^2.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stirring/model.hpp"
#include "stirring/rng.hpp"
#include "stirring/sum_tree.hpp"

namespace stirring {

struct Schedule {
  std::vector<double> macro_times;

  void validate() const {
    for (std::size_t i = 0; i < macro_times.size(); ++i) {
      if (!(macro_times[i] >= 0.0) || !std::isfinite(macro_times[i]))
        throw std::invalid_argument("schedule times must be finite and >= 0");
      if (i > 0 && macro_times[i] < macro_times[i - 1])
        throw std::invalid_argument("schedule times must be non-decreasing");
    }
  }
};

struct EventCounters {
  std::uint64_t exchanges = 0;
  std::uint64_t mutations = 0;
  std::uint64_t total() const { return exchanges + mutations; }
};

class Engine {
 public:
  Engine(const ModelParams& params, Configuration initial)
      : params_(params), config_(std::move(initial)),
        edges_(static_cast<std::size_t>(params.lattice_size)),
        particles_(static_cast<std::size_t>(params.lattice_size)) {
    require_valid(params_);
    require_valid(config_, params_);
    for (int x = 0; x < config_.sites(); ++x) {
      edges_.set(x, edge_active_rate(config_, x, params_.two_j));
      particles_.set(x, config_.particles_at(x));
    }
    mutation_per_particle_ = params_.n_species >= 2 ? params_.gamma() * (params_.n_species - 1) : 0.0;
  }

  const ModelParams& params() const { return params_; }
  const Configuration& configuration() const { return config_; }
  double time() const { return time_; }
  double macro_time() const {
    const double n = params_.scaling();
    return time_ / (n * n);
  }
  const EventCounters& counters() const { return counters_; }

  std::int64_t edge_rate_total() const { return edges_.total(); }
  double mutation_rate_total() const { return mutation_per_particle_ * particles_.total(); }
  double total_rate() const { return static_cast<double>(edges_.total()) + mutation_rate_total(); }

  /// Runs check_consistency() after every `every` events (0 disables).
  void set_consistency_checks(std::uint64_t every) { check_every_ = every; }

  /// Tracks F(eta) = sum_{x,k} w[x (n+1) + k] eta_k^x and its time integral
  /// (microscopic time) from now on. Returns a handle.
  int track(std::vector<double> weights) {
    if (weights.size() != config_.data().size())
      throw std::invalid_argument("tracked functional needs L*(n+1) weights");
    Tracked t{std::move(weights), 0.0, 0.0};
    t.value = evaluate(t.weights);
    tracked_.push_back(std::move(t));
    return static_cast<int>(tracked_.size()) - 1;
  }
  double functional_value(int handle) const { return tracked_.at(handle).value; }
  double functional_integral(int handle) const { return tracked_.at(handle).integral; }

  /// Fires one event. Returns false (and does nothing) if the total rate is 0.
  bool step(Rng& rng) {
    const double rate = total_rate();
    if (rate <= 0.0) return false;
    const double dt = exponential(rng, rate);
    accumulate(dt);
    time_ += dt;
    fire(rng, rate);
    return true;
  }

  /// Advances to microscopic time `t_micro`. The event that would overshoot
  /// is discarded, which is exact by memorylessness.
  void advance_to(double t_micro, Rng& rng) {
    if (t_micro < time_) throw std::invalid_argument("cannot advance backwards in time");
    for (;;) {
      const double rate = total_rate();
      if (rate <= 0.0) break;
      const double dt = exponential(rng, rate);
      if (time_ + dt > t_micro) break;
      accumulate(dt);
      time_ += dt;
      fire(rng, rate);
    }
    accumulate(t_micro - time_);
    time_ = t_micro;
  }

  /// Calls observer(macro_time, configuration) at each schedule time.
  template <class Observer>
  void simulate(const Schedule& schedule, Rng& rng, Observer&& observer) {
    schedule.validate();
    const double n2 = static_cast<double>(params_.scaling()) * params_.scaling();
    for (double t : schedule.macro_times) {
      advance_to(std::max(t * n2, time_), rng);
      observer(t, static_cast<const Configuration&>(config_));
    }
  }

  /// Recomputes every cached rate and tracked value; throws std::logic_error
  /// naming the first mismatch.
  void check_consistency() const {
    std::int64_t edge_sum = 0, particle_sum = 0;
    for (int x = 0; x < config_.sites(); ++x) {
      const auto r = edge_active_rate(config_, x, params_.two_j);
      if (edges_.weight(x) != r) {
        std::ostringstream os;
        os << "rate index corrupted: edge " << x << " stores " << edges_.weight(x)
           << ", recomputed " << r << " after " << counters_.total() << " events";
        throw std::logic_error(os.str());
      }
      edge_sum += r;
      if (particles_.weight(x) != config_.particles_at(x)) {
        std::ostringstream os;
        os << "rate index corrupted: site " << x << " particle count " << particles_.weight(x)
           << ", recomputed " << config_.particles_at(x);
        throw std::logic_error(os.str());
      }
      particle_sum += config_.particles_at(x);
    }
    if (edge_sum != edges_.total() || particle_sum != particles_.total())
      throw std::logic_error("rate index corrupted: cached totals differ from recomputed sums");
    if (auto v = validate(config_, params_)) throw std::logic_error("invalid state: " + v->message);
    for (std::size_t i = 0; i < tracked_.size(); ++i) {
      const double fresh = evaluate(tracked_[i].weights);
      if (std::abs(fresh - tracked_[i].value) > 1e-9 * (1.0 + std::abs(fresh))) {
        std::ostringstream os;
        os.precision(17);
        os << "tracked functional " << i << " drifted: cached " << tracked_[i].value
           << ", recomputed " << fresh;
        throw std::logic_error(os.str());
      }
    }
  }

 private:
  struct Tracked {
    std::vector<double> weights;
    double value;
    double integral;
  };

  double evaluate(const std::vector<double>& w) const {
    const auto occ = config_.data();
    double s = 0.0;
    for (std::size_t i = 0; i < occ.size(); ++i) s += w[i] * occ[i];
    return s;
  }

  void accumulate(double dt) {
    for (auto& t : tracked_) t.integral += t.value * dt;
  }

  std::size_t slot(int x, int k) const {
    return static_cast<std::size_t>(x) * config_.species_count() + k;
  }

  void fire(Rng& rng, double rate) {
    const double edge_total = static_cast<double>(edges_.total());
    if (uniform01(rng) * rate < edge_total) {
      fire_exchange(rng);
    } else {
      fire_mutation(rng);
    }
    if (check_every_ != 0 && counters_.total() % check_every_ == 0) check_consistency();
  }

  void fire_exchange(Rng& rng) {
    std::int64_t offset = static_cast<std::int64_t>(uniform_index(rng, edges_.total()));
    const int x = static_cast<int>(edges_.find(offset));
    const int y = config_.next(x);
    const int s = config_.species_count();
    // offset is uniform on [0, r_x): resolve (k, l) by enumeration over k != l
    int k = 0, l = 0;
    for (k = 0; k < s; ++k) {
      const std::int64_t ek = config_(x, k);
      if (ek == 0) continue;
      for (l = 0; l < s; ++l) {
        if (l == k) continue;
        const std::int64_t r = ek * config_(y, l);
        if (offset < r) goto found;
        offset -= r;
      }
    }
    throw std::logic_error("exchange selection fell through: rate index out of sync");
  found:
    --config_(x, k);
    ++config_(x, l);
    ++config_(y, k);
    --config_(y, l);
    for (auto& t : tracked_)
      t.value += t.weights[slot(x, l)] - t.weights[slot(x, k)] + t.weights[slot(y, k)] -
                 t.weights[slot(y, l)];
    refresh_edge(config_.prev(x));
    refresh_edge(x);
    refresh_edge(y);
    if (k == 0 || l == 0) {
      particles_.set(x, config_.particles_at(x));
      particles_.set(y, config_.particles_at(y));
    }
    ++counters_.exchanges;
  }

  void fire_mutation(Rng& rng) {
    std::int64_t offset = static_cast<std::int64_t>(uniform_index(rng, particles_.total()));
    const int x = static_cast<int>(particles_.find(offset));
    int k = 1;
    for (; k < config_.species_count(); ++k) {
      if (offset < config_(x, k)) break;
      offset -= config_(x, k);
    }
    int l = 1 + static_cast<int>(uniform_index(rng, params_.n_species - 1));
    if (l >= k) ++l;
    --config_(x, k);
    ++config_(x, l);
    for (auto& t : tracked_) t.value += t.weights[slot(x, l)] - t.weights[slot(x, k)];
    refresh_edge(config_.prev(x));
    refresh_edge(x);
    ++counters_.mutations;
  }

  void refresh_edge(int x) { edges_.set(x, edge_active_rate(config_, x, params_.two_j)); }

  ModelParams params_;
  Configuration config_;
  SumTree edges_;
  SumTree particles_;
  double mutation_per_particle_ = 0.0;
  double time_ = 0.0;
  EventCounters counters_;
  std::uint64_t check_every_ = 0;
  std::vector<Tracked> tracked_;
};

/// Upper bound on the number of events over macroscopic horizon T:
/// L (2j)^2 T N^2 exchanges plus Upsilon (n-1) L 2j T mutations.
inline double estimate_event_budget(const ModelParams& params, double macro_horizon) {
  const double n2 = static_cast<double>(params.scaling()) * params.scaling();
  const double exchanges = static_cast<double>(params.lattice_size) * params.two_j * params.two_j *
                           macro_horizon * n2;
  const double mutations = params.n_species >= 2
                               ? params.gamma() * (params.n_species - 1) * params.lattice_size *
                                     params.two_j * macro_horizon * n2
                               : 0.0;
  return exchanges + mutations;
}

/// Expected event count at the current total rate of `config`.
inline double estimate_event_budget(const ModelParams& params, const Configuration& config,
                                    double macro_horizon) {
  const double n2 = static_cast<double>(params.scaling()) * params.scaling();
  double rate = 0.0;
  for (int x = 0; x < config.sites(); ++x) {
    rate += static_cast<double>(edge_active_rate(config, x, params.two_j));
    rate += mutation_rate(config, x, params);
  }
  return rate * macro_horizon * n2;
}

}  // namespace stirring
