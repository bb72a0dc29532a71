#pragma once

// Experiment results: CSV tables, verdicts and the on-disk layout
//   <out>/manifest.json  <out>/theory.json  <out>/verdicts.json  <out>/data/*.csv

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "stirring/config.hpp"

namespace stirring {

inline constexpr const char* kVersion = "0.1.0";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed 17-significant-digit rendering used for every float we emit.
inline std::string format_double(double v) { return fmt::format("{:.17g}", v); }

class DataTable {
 public:
  DataTable(std::string name, std::vector<std::string> columns)
      : name_(std::move(name)), columns_(std::move(columns)) {}

  const std::string& name() const { return name_; }
  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& row(std::size_t i) const { return rows_.at(i); }

  template <class... Args>
  void add(const Args&... args) {
    if (sizeof...(Args) != columns_.size())
      throw std::invalid_argument("table " + name_ + ": row has the wrong number of cells");
    rows_.push_back({cell(args)...});
  }

  void add_cells(std::vector<std::string> cells) {
    if (cells.size() != columns_.size())
      throw std::invalid_argument("table " + name_ + ": row has the wrong number of cells");
    rows_.push_back(std::move(cells));
  }

  std::string csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns_.size(); ++i) out += (i ? "," : "") + columns_[i];
    out += '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
      out += '\n';
    }
    return out;
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class T>
    requires std::is_integral_v<T>
  static std::string cell(T v) { return std::to_string(v); }

  std::string name_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// One pass/fail check. `comparison` says how statistic and tolerance relate:
/// "<=" (statistic must not exceed tolerance) or ">=" / ">" (must reach it).
struct Verdict {
  std::string check;
  std::string anchor;
  Json parameters = Json::object();
  double estimate = 0.0;
  double theory = 0.0;
  double std_error = 0.0;
  double statistic = 0.0;
  std::string comparison = "<=";
  double tolerance = 0.0;
  bool pass = false;

  Json to_json() const {
    return {{"check", check},         {"anchor", anchor},       {"parameters", parameters},
            {"estimate", estimate},   {"theory", theory},       {"std_error", std_error},
            {"statistic", statistic}, {"comparison", comparison}, {"tolerance", tolerance},
            {"pass", pass}};
  }
};

inline Verdict make_verdict(std::string check, std::string anchor, Json parameters, double estimate,
                            double theory, double std_error, double statistic, std::string comparison,
                            double tolerance) {
  Verdict v{std::move(check), std::move(anchor), std::move(parameters), estimate, theory, std_error,
            statistic, std::move(comparison), tolerance, false};
  if (v.comparison == "<=") v.pass = statistic <= tolerance;
  else if (v.comparison == ">=") v.pass = statistic >= tolerance;
  else if (v.comparison == ">") v.pass = statistic > tolerance;
  else throw std::invalid_argument("unknown verdict comparison " + v.comparison);
  return v;
}

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::verify_exact;
  std::vector<DataTable> tables;
  Json theory = Json::object();
  std::vector<Verdict> verdicts;

  bool passed() const {
    for (const auto& v : verdicts)
      if (!v.pass) return false;
    return true;
  }
  const DataTable& table(const std::string& name) const {
    for (const auto& t : tables)
      if (t.name() == name) return t;
    throw std::out_of_range("no table named " + name);
  }
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const Json& resolved) { return fmt::format("{:016x}", fnv1a(resolved.dump())); }

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << contents;
  os.close();
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace detail

inline Json verdicts_json(const ExperimentResult& r) {
  Json arr = Json::array();
  for (const auto& v : r.verdicts) arr.push_back(v.to_json());
  return {{"kind", to_string(r.kind)}, {"pass", r.passed()}, {"verdicts", arr}};
}

inline void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                          const ExperimentResult& result, double wall_seconds) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "data", ec);
  if (ec) throw IoError("cannot create " + (dir / "data").string() + ": " + ec.message());
  Json files = Json::array();
  for (const auto& t : result.tables) {
    detail::write_file(dir / "data" / (t.name() + ".csv"), t.csv());
    files.push_back("data/" + t.name() + ".csv");
  }
  detail::write_file(dir / "theory.json", result.theory.dump(2) + "\n");
  detail::write_file(dir / "verdicts.json", verdicts_json(result).dump(2) + "\n");
  files.push_back("theory.json");
  files.push_back("verdicts.json");
  const Json manifest = {{"kind", to_string(cfg.kind)},
                         {"seed", cfg.seed},
                         {"config_hash", config_hash(cfg.resolved)},
                         {"version", kVersion},
                         {"wall_time_seconds", wall_seconds},
                         {"files", files},
                         {"config", cfg.resolved}};
  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace stirring
