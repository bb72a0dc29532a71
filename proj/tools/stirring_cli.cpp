// stirring: run simulation/verification experiments from JSON configs.
//
//   stirring list
//   stirring run <config.json> [--seed S] [--out DIR] [--threads T] [--replicas R]
//   stirring <kind> --seed S [--config overrides.json] [--out DIR] [--threads T] [--replicas R]
//
// Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 schema/usage error,
// 3 cap violation, 4 I/O error, 5 other runtime error.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "stirring/experiments.hpp"

namespace {

enum ExitCode { kOk = 0, kVerdictFailure = 1, kUsage = 2, kCap = 3, kIo = 4, kRuntime = 5 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<long long> replicas;
  std::optional<long long> threads;
  std::string out;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--threads", o.threads, "worker threads (0 = available parallelism)");
  cmd->add_option("--replicas", o.replicas, "replica count (overrides the config)");
}

stirring::Json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw stirring::IoError("cannot read " + path);
  try {
    return stirring::Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw stirring::ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
}

std::filesystem::path output_dir(const Overrides& o, const stirring::ExperimentConfig& cfg) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("STIRRING_OUT_DIR"); env && *env) return env;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return std::filesystem::path("out") / stirring::to_string(cfg.kind);
}

int execute(stirring::Json user, const Overrides& o) {
  stirring::apply_overrides(user, o.seed, o.replicas, o.threads);
  const auto cfg = stirring::parse_config(user);
  const auto dir = output_dir(o, cfg);
  const auto start = std::chrono::steady_clock::now();
  const auto result = stirring::run_experiment(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  stirring::write_outputs(dir, cfg, result, wall);

  int failed = 0;
  for (const auto& v : result.verdicts) {
    if (!v.pass) ++failed;
    std::cout << fmt::format("{:4} {:<40} statistic={:<12.6g} {} {:<10.4g} [{}]\n", v.pass ? "PASS" : "FAIL",
                             v.check, v.statistic, v.comparison, v.tolerance, v.anchor);
  }
  std::cout << fmt::format("{}: {}/{} verdicts pass, {:.1f} s, output in {}\n", stirring::to_string(cfg.kind),
                           result.verdicts.size() - failed, result.verdicts.size(), wall, dir.string());
  return failed ? kVerdictFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-species stirring process: simulation and verification experiments"};
  app.require_subcommand(1);

  app.add_subcommand("list", "list experiment kinds")->callback([] {
    for (const auto& e : stirring::catalog()) std::cout << fmt::format("{:<22} {}\n", e.name, e.summary);
  });

  Overrides run_o;
  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment described by a JSON config");
  run->add_option("config", config_path, "config file")->required();
  add_override_flags(run, run_o);

  std::vector<std::pair<CLI::App*, std::string>> kind_cmds;
  Overrides kind_o;
  std::string kind_config;
  for (const auto& e : stirring::catalog()) {
    auto* cmd = app.add_subcommand(e.name, e.summary);
    cmd->add_option("--config", kind_config, "JSON file with keys overriding the preset");
    add_override_flags(cmd, kind_o);
    kind_cmds.emplace_back(cmd, e.name);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return execute(read_json(config_path), run_o);
    for (const auto& [cmd, name] : kind_cmds) {
      if (!*cmd) continue;
      stirring::Json user = kind_config.empty() ? stirring::Json::object() : read_json(kind_config);
      if (user.contains("kind") && user["kind"] != name)
        throw stirring::ConfigError("kind", "config kind does not match the subcommand '" + name + "'");
      user["kind"] = name;
      return execute(std::move(user), kind_o);
    }
    return kOk;
  } catch (const stirring::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const stirring::CapExceeded& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return kCap;
  } catch (const stirring::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
