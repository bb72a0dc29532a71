#pragma once

// JSON experiment configuration: schema validation, built-in presets and
// resolution into typed settings.
//
// A config file names a `kind` and a mandatory `seed`; every other key falls
// back to the preset of that kind. `model` and `spde` are merged key by key,
// every other key is replaced wholesale. Unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stirring/equilibrium.hpp"
#include "stirring/exact.hpp"
#include "stirring/kmc.hpp"
#include "stirring/limit_theory.hpp"
#include "stirring/model.hpp"
#include "stirring/test_function.hpp"

namespace stirring {

using Json = nlohmann::ordered_json;

/// Schema violation; field() is the dotted path of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class ExperimentKind {
  verify_exact,
  duality,
  stationarity,
  hydro,
  fluctuations,
  lemma1,
  spde,
  reaction_hydro,
  reaction_fluctuations,
};

struct CatalogEntry {
  ExperimentKind kind;
  const char* name;
  const char* summary;
};

inline const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries = {
      {ExperimentKind::verify_exact, "verify-exact",
       "reversibility of nu_p and Lambda_p, Carre-du-Champ closed forms and Dynkin drift on a tiny ring"},
      {ExperimentKind::duality, "duality",
       "self-duality of the stirring process with the multinomial duality function"},
      {ExperimentKind::stationarity, "stationarity",
       "site marginals stay multinomial under the dynamics started from nu_p"},
      {ExperimentKind::hydro, "hydro",
       "density field vs the heat equation d_t rho = 2j Laplacian rho"},
      {ExperimentKind::fluctuations, "fluctuations",
       "equilibrium fluctuation-field covariances vs the Ornstein-Uhlenbeck limit"},
      {ExperimentKind::lemma1, "lemma1",
       "N^2 Gamma of the fluctuation field converges to its Dirichlet-energy limit"},
      {ExperimentKind::spde, "spde",
       "Euler-Maruyama OU system with conservative noise reproduces 2j Sigma"},
      {ExperimentKind::reaction_hydro, "reaction-hydro",
       "density field vs the linear reaction-diffusion system"},
      {ExperimentKind::reaction_fluctuations, "reaction-fluctuations",
       "martingale quadratic variation with stirring and mutation noise"},
  };
  return entries;
}

inline const char* to_string(ExperimentKind k) {
  for (const auto& e : catalog())
    if (e.kind == k) return e.name;
  return "?";
}

inline std::optional<ExperimentKind> kind_from_string(const std::string& s) {
  for (const auto& e : catalog())
    if (s == e.name) return e.kind;
  return std::nullopt;
}

struct SpdeExperimentSettings {
  SpdeSettings integrator;
  double burn_in = 0.05;
  int batches = 50;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::verify_exact;
  std::uint64_t seed = 0;
  ModelParams model;
  unsigned threads = 0;  // 0 = available parallelism
  std::string output_dir;
  std::size_t replicas = 0;
  std::vector<double> times;
  TestFunction phi = TestFunction::sine(1);
  TestFunction psi = TestFunction::sine(1);
  ProfileSpec profiles;
  ReactionVariant b_variant = ReactionVariant::generator;
  double z_threshold = 3.0;

  // fluctuations
  std::vector<double> discriminate_times;
  double discriminate_z = 4.0;
  // hydro
  double relative_tolerance = -1.0;
  // stationarity
  double p_min = 1e-3;
  // lemma1
  std::vector<int> sizes;
  // spde
  SpdeExperimentSettings spde;
  // duality
  int pairs = 20;
  // verify-exact
  std::vector<double> reaction_probs;
  double reaction_upsilon = 1.0;
  std::optional<ModelParams> cdc_model;
  int cdc_random_states = 50;
  std::vector<double> dynkin_times;

  Json resolved;  // fully merged config; hashed into the manifest
};

/// Hard limits; exceeding any raises CapExceeded.
struct Caps {
  static constexpr std::size_t max_replicas = 10'000'000;
  static constexpr int max_lattice = 1'000'000;
  static constexpr double max_events = 1e12;
  static constexpr double max_spde_updates = 1e11;
};

inline Json preset(ExperimentKind kind) {
  const Json sym_model = {{"n_species", 2}, {"two_j", 2}, {"lattice_size", 128},
                          {"probs", {0.5, 0.25, 0.25}}, {"upsilon", 0.0}};
  const Json sine = {{"name", "sine"}, {"mode", 1}};
  switch (kind) {
    case ExperimentKind::verify_exact:
      return {{"kind", "verify-exact"},
              {"model", {{"n_species", 2}, {"two_j", 2}, {"lattice_size", 3}, {"probs", {0.5, 0.3, 0.2}}, {"upsilon", 0.0}}},
              {"phi", {{"name", "gaussian-bump"}, {"center", 0.3}, {"width", 0.2}}},
              {"psi", {{"name", "cosine"}, {"mode", 1}}},
              {"reaction_probs", {0.4, 0.3, 0.3}},
              {"reaction_upsilon", 1.0},
              {"cdc_model", {{"n_species", 3}, {"two_j", 3}, {"lattice_size", 2}, {"probs", {0.4, 0.2, 0.2, 0.2}}}},
              {"cdc_random_states", 50},
              {"dynkin_times", {0.0, 0.5}}};
    case ExperimentKind::duality:
      return {{"kind", "duality"},
              {"model", {{"n_species", 2}, {"two_j", 2}, {"lattice_size", 3}, {"probs", {0.5, 0.3, 0.2}}, {"upsilon", 0.0}}},
              {"pairs", 20},
              {"times", {0.1, 0.5, 2.0}}};
    case ExperimentKind::stationarity:
      return {{"kind", "stationarity"}, {"model", sym_model}, {"replicas", 1000}, {"times", {0.05}}, {"p_min", 1e-3}};
    case ExperimentKind::hydro: {
      Json m = sym_model;
      m["lattice_size"] = 256;
      return {{"kind", "hydro"},
              {"model", m},
              {"replicas", 20},
              {"times", {0.005, 0.02}},
              {"phi", {{"name", "gaussian-bump"}, {"center", 0.25}, {"width", 0.1}}},
              {"profiles",
               {{{"name", "step"}, {"inside", 1.5}, {"outside", 0.25}, {"lo", 0.0}, {"hi", 0.5}},
                {{"name", "step"}, {"inside", 0.25}, {"outside", 1.5}, {"lo", 0.0}, {"hi", 0.5}}}},
              {"relative_tolerance", 0.05},
              {"z_threshold", 3.0}};
    }
    case ExperimentKind::fluctuations:
      return {{"kind", "fluctuations"},
              {"model", sym_model},
              {"replicas", 2000},
              {"times", {0.005, 0.02}},
              {"phi", sine},
              {"psi", sine},
              {"discriminate_times", {0.02}},
              {"discriminate_z", 4.0},
              {"z_threshold", 3.0}};
    case ExperimentKind::lemma1:
      return {{"kind", "lemma1"},
              {"model", sym_model},
              {"replicas", 10000},
              {"sizes", {32, 64, 128}},
              {"phi", sine},
              {"z_threshold", 3.0}};
    case ExperimentKind::spde:
      return {{"kind", "spde"},
              {"model", sym_model},
              {"phi", sine},
              {"spde",
               {{"cells", 256}, {"dt_fraction", 0.5}, {"horizon", 5.0}, {"sample_interval", 0.002},
                {"burn_in", 0.05}, {"batches", 50}}},
              {"b_variant", "generator"},
              {"z_threshold", 3.0}};
    case ExperimentKind::reaction_hydro: {
      Json m = sym_model;
      m["lattice_size"] = 256;
      m["upsilon"] = 2.0;
      return {{"kind", "reaction-hydro"},
              {"model", m},
              {"replicas", 20},
              {"times", {0.005, 0.02}},
              {"phi", {{"name", "gaussian-bump"}, {"center", 0.25}, {"width", 0.1}}},
              {"profiles",
               {{{"name", "step"}, {"inside", 2.0}, {"outside", 0.0}, {"lo", 0.0}, {"hi", 0.5}},
                {{"name", "constant"}, {"value", 0.0}}}},
              {"b_variant", "generator"},
              {"relative_tolerance", -1.0},
              {"z_threshold", 3.0}};
    }
    case ExperimentKind::reaction_fluctuations: {
      Json m = sym_model;
      m["upsilon"] = 2.0;
      return {{"kind", "reaction-fluctuations"},
              {"model", m},
              {"replicas", 2000},
              {"times", {0.002}},
              {"phi", sine},
              {"b_variant", "generator"},
              {"z_threshold", 3.0}};
    }
  }
  return {};
}

namespace detail {

class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key), "missing required key");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  long long integer(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<long long>();
  }
  long long integer(const std::string& key, long long fallback) { return has(key) ? integer(key) : fallback; }

  std::string string(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(field(key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<int> integers(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ConfigError(field(key), "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline ModelParams parse_model(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  ModelParams m;
  m.n_species = static_cast<int>(r.integer("n_species"));
  m.two_j = static_cast<int>(r.integer("two_j"));
  m.lattice_size = static_cast<int>(r.integer("lattice_size"));
  m.scaling_n = static_cast<int>(r.integer("scaling_n", 0));
  m.probs = r.numbers("probs");
  m.upsilon = r.number("upsilon", 0.0);
  r.finish();
  if (m.lattice_size > Caps::max_lattice)
    throw CapExceeded(path + ".lattice_size exceeds the cap of " + std::to_string(Caps::max_lattice));
  if (auto err = check_params(m)) throw ConfigError(path, *err);
  return m;
}

inline TestFunction parse_test_function(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  const std::string name = r.string("name");
  TestFunction f;
  if (name == "sine" || name == "cosine") {
    const int mode = static_cast<int>(r.integer("mode"));
    const double amp = r.number("amplitude", 1.0);
    if (mode < 1) throw ConfigError(r.field("mode"), "mode must be >= 1");
    f = name == "sine" ? TestFunction::sine(mode, amp) : TestFunction::cosine(mode, amp);
  } else if (name == "constant") {
    f = TestFunction::constant(r.number("value"));
  } else if (name == "gaussian-bump") {
    const double center = r.number("center"), width = r.number("width");
    if (!(width > 0.0)) throw ConfigError(r.field("width"), "width must be > 0");
    f = TestFunction::gaussian_bump(center, width, r.number("amplitude", 1.0));
  } else if (name == "compact-bump") {
    const double center = r.number("center"), half = r.number("half_width");
    if (!(half > 0.0 && half < 0.5)) throw ConfigError(r.field("half_width"), "half_width must be in (0, 0.5)");
    f = TestFunction::compact_bump(center, half, r.number("amplitude", 1.0));
  } else {
    throw ConfigError(r.field("name"), "unknown test function '" + name +
                                           "' (sine|cosine|constant|gaussian-bump|compact-bump)");
  }
  r.finish();
  return f;
}

inline Profile parse_profile(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  const std::string name = r.string("name");
  Profile p;
  if (name == "constant") {
    p = Profile::constant(r.number("value"));
  } else if (name == "step") {
    const double inside = r.number("inside"), outside = r.number("outside");
    const double lo = r.number("lo", 0.0), hi = r.number("hi", 0.5);
    if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) throw ConfigError(path, "step needs 0 <= lo < hi <= 1");
    p = Profile::step(inside, outside, lo, hi);
  } else if (name == "gaussian-bump") {
    const double base = r.number("baseline"), amp = r.number("amplitude");
    const double center = r.number("center"), width = r.number("width");
    if (!(width > 0.0)) throw ConfigError(r.field("width"), "width must be > 0");
    p = Profile::gaussian_bump(base, amp, center, width);
  } else if (name == "cosine") {
    p = Profile::cosine(r.number("baseline"), r.number("amplitude"), static_cast<int>(r.integer("mode")));
  } else {
    throw ConfigError(r.field("name"), "unknown profile '" + name + "' (constant|step|gaussian-bump|cosine)");
  }
  r.finish();
  return p;
}

inline std::vector<double> check_times(std::vector<double> t, const std::string& field) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= 0.0) || !std::isfinite(t[i])) throw ConfigError(field, "times must be finite and >= 0");
    if (i > 0 && t[i] < t[i - 1]) throw ConfigError(field, "times must be non-decreasing");
  }
  return t;
}

}  // namespace detail

/// Merges `user` over the preset of its kind.
inline Json merge_with_preset(const Json& user) {
  if (!user.is_object()) throw ConfigError("<root>", "expected an object");
  if (!user.contains("kind")) throw ConfigError("kind", "missing required key");
  if (!user["kind"].is_string()) throw ConfigError("kind", "expected a string");
  const auto kind = kind_from_string(user["kind"].get<std::string>());
  if (!kind) throw ConfigError("kind", "unknown experiment kind '" + user["kind"].get<std::string>() + "'");
  Json merged = preset(*kind);
  for (const auto& [key, value] : user.items()) {
    if ((key == "model" || key == "spde") && value.is_object() && merged.contains(key)) {
      for (const auto& [k, v] : value.items()) merged[key][k] = v;
    } else {
      merged[key] = value;
    }
  }
  return merged;
}

/// Validates and resolves a config. Throws ConfigError on schema violations
/// and CapExceeded when a size limit is exceeded.
inline ExperimentConfig parse_config(const Json& user) {
  const Json merged = merge_with_preset(user);
  detail::ObjectReader r(merged, "");
  ExperimentConfig c;
  c.kind = *kind_from_string(r.string("kind"));
  if (!user.contains("seed")) throw ConfigError("seed", "missing required key");
  {
    const Json& s = r.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0))
      throw ConfigError("seed", "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  c.model = detail::parse_model(r.at("model"), "model");
  if (r.has("threads")) {
    const long long t = r.integer("threads");
    if (t < 0) throw ConfigError("threads", "must be >= 0");
    c.threads = static_cast<unsigned>(t);
  }
  if (r.has("output_dir")) c.output_dir = r.string("output_dir");
  if (r.has("replicas")) {
    const long long n = r.integer("replicas");
    if (n < 2) throw ConfigError("replicas", "need at least 2 replicas");
    if (static_cast<std::size_t>(n) > Caps::max_replicas)
      throw CapExceeded("replicas exceeds the cap of " + std::to_string(Caps::max_replicas));
    c.replicas = static_cast<std::size_t>(n);
  }
  if (r.has("times")) c.times = detail::check_times(r.numbers("times"), "times");
  if (r.has("phi")) c.phi = detail::parse_test_function(r.at("phi"), "phi");
  if (r.has("psi")) c.psi = detail::parse_test_function(r.at("psi"), "psi");
  if (r.has("b_variant")) {
    try {
      c.b_variant = reaction_variant_from_string(r.string("b_variant"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("b_variant", e.what());
    }
  }
  c.z_threshold = r.number("z_threshold", 3.0);
  if (!(c.z_threshold > 0.0)) throw ConfigError("z_threshold", "must be > 0");

  if (r.has("profiles")) {
    const Json& arr = r.at("profiles");
    if (!arr.is_array()) throw ConfigError("profiles", "expected an array with one profile per species");
    for (std::size_t i = 0; i < arr.size(); ++i)
      c.profiles.species.push_back(detail::parse_profile(arr[i], "profiles[" + std::to_string(i) + "]"));
    if (static_cast<int>(c.profiles.species.size()) != c.model.n_species)
      throw ConfigError("profiles", "expected " + std::to_string(c.model.n_species) + " profiles");
    if (auto err = c.profiles.check(c.model.two_j, c.model.lattice_size, c.model.scaling()))
      throw ConfigError("profiles", *err);
  }
  if (r.has("discriminate_times")) c.discriminate_times = detail::check_times(r.numbers("discriminate_times"), "discriminate_times");
  c.discriminate_z = r.number("discriminate_z", 4.0);
  c.relative_tolerance = r.number("relative_tolerance", -1.0);
  c.p_min = r.number("p_min", 1e-3);
  if (!(c.p_min > 0.0 && c.p_min < 1.0)) throw ConfigError("p_min", "must be in (0, 1)");
  if (r.has("sizes")) {
    c.sizes = r.integers("sizes");
    for (int n : c.sizes) {
      if (n < 2) throw ConfigError("sizes", "lattice sizes must be >= 2");
      if (n > Caps::max_lattice) throw CapExceeded("sizes entry exceeds the cap of " + std::to_string(Caps::max_lattice));
    }
    if (c.sizes.empty()) throw ConfigError("sizes", "need at least one size");
  }
  if (r.has("spde")) {
    detail::ObjectReader s(r.at("spde"), "spde");
    auto& st = c.spde.integrator;
    st.cells = static_cast<int>(s.integer("cells"));
    st.dt_fraction = s.number("dt_fraction");
    st.horizon = s.number("horizon");
    st.sample_interval = s.number("sample_interval");
    c.spde.burn_in = s.number("burn_in");
    c.spde.batches = static_cast<int>(s.integer("batches"));
    s.finish();
    if (st.cells < 4) throw ConfigError("spde.cells", "need >= 4 cells");
    if (!(st.dt_fraction > 0.0 && st.dt_fraction < 1.0))
      throw ConfigError("spde.dt_fraction", "must be in (0, 1) to respect the stability bound");
    if (!(st.horizon > 0.0)) throw ConfigError("spde.horizon", "must be > 0");
    if (!(st.sample_interval > 0.0)) throw ConfigError("spde.sample_interval", "must be > 0");
    if (!(c.spde.burn_in >= 0.0 && c.spde.burn_in < st.horizon))
      throw ConfigError("spde.burn_in", "must be in [0, horizon)");
    if (c.spde.batches < 2) throw ConfigError("spde.batches", "need >= 2 batches");
    st.variant = c.b_variant;
    const double dt = st.dt_fraction * spde_stability_bound(st.cells, c.model.two_j);
    if (st.horizon / dt * st.cells * c.model.n_species > Caps::max_spde_updates)
      throw CapExceeded("SPDE run exceeds the cap of " + std::to_string(Caps::max_spde_updates) + " cell updates");
  }
  if (r.has("pairs")) {
    c.pairs = static_cast<int>(r.integer("pairs"));
    if (c.pairs < 1) throw ConfigError("pairs", "must be >= 1");
  }
  if (r.has("reaction_probs")) c.reaction_probs = r.numbers("reaction_probs");
  c.reaction_upsilon = r.number("reaction_upsilon", 1.0);
  if (r.has("cdc_model")) c.cdc_model = detail::parse_model(r.at("cdc_model"), "cdc_model");
  c.cdc_random_states = static_cast<int>(r.integer("cdc_random_states", 50));
  if (r.has("dynkin_times")) c.dynkin_times = detail::check_times(r.numbers("dynkin_times"), "dynkin_times");
  r.finish();

  // Keys that only make sense for other kinds are rejected as unknown.
  const Json base = preset(c.kind);
  static const std::set<std::string> common = {"kind", "seed", "model", "threads", "output_dir"};
  for (const auto& [key, value] : merged.items())
    if (!common.count(key) && !base.contains(key))
      throw ConfigError(key, std::string("unknown key for kind '") + to_string(c.kind) + "'");

  if (c.kind == ExperimentKind::verify_exact) {
    ModelParams rp = c.model;
    rp.probs = c.reaction_probs;
    if (auto err = check_params(rp)) throw ConfigError("reaction_probs", *err);
    if (!(c.reaction_upsilon > 0.0)) throw ConfigError("reaction_upsilon", "must be > 0");
  }
  if (c.kind == ExperimentKind::fluctuations) {
    for (double t : c.discriminate_times)
      if (std::find(c.times.begin(), c.times.end(), t) == c.times.end())
        throw ConfigError("discriminate_times", "every entry must also appear in times");
  }
  if ((c.kind == ExperimentKind::reaction_fluctuations || c.kind == ExperimentKind::reaction_hydro) &&
      !(c.model.upsilon > 0.0))
    throw ConfigError("model.upsilon", "reaction experiments need upsilon > 0");
  if (c.kind == ExperimentKind::reaction_fluctuations) {
    for (double t : c.times)
      if (!(t > 0.0)) throw ConfigError("times", "quadratic-variation slopes need t > 0");
  }

  // event budget
  if (!c.times.empty() && c.replicas > 0) {
    const double events = estimate_event_budget(c.model, c.times.back()) * static_cast<double>(c.replicas);
    if (events > Caps::max_events)
      throw CapExceeded("expected event count " + std::to_string(events) + " exceeds the cap of " +
                        std::to_string(Caps::max_events));
  }

  c.resolved = merged;
  return c;
}

/// Applies command-line overrides to a user config before parsing.
inline void apply_overrides(Json& user, std::optional<std::uint64_t> seed, std::optional<long long> replicas,
                            std::optional<long long> threads) {
  if (seed) user["seed"] = *seed;
  if (replicas) user["replicas"] = *replicas;
  if (threads) user["threads"] = *threads;
}

}  // namespace stirring
