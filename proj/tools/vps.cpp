// Experiment driver: run, converge and exact subcommands.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vps/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kSolverError = 3;

int cmd_run(const std::string& path) {
  const vps::RunConfig cfg = vps::load_config(path);
  if (!cfg.ladder.empty() || cfg.reference) throw vps::ConfigError("run configs must not carry a ladder");
  const vps::RunReport rep = vps::run(cfg);
  std::printf("%zu steps to t=%.17g, output in %s\n", rep.steps.size() - 1, rep.steps.back().time,
              vps::output_directory(cfg).c_str());
  return 0;
}

int cmd_converge(const std::string& path) {
  const vps::RunConfig cfg = vps::load_config(path);
  const vps::ConvergenceTable t = vps::converge(cfg);
  const std::filesystem::path dir = vps::output_directory(cfg);
  std::filesystem::create_directories(dir);
  vps::write_convergence_csv(dir / "convergence.csv", t, cfg.output.precision);
  int failed = 0;
  for (const auto& r : t.rows) {
    if (!r.ok) {
      ++failed;
      std::fprintf(stderr, "level N=%zu tau=%g failed: %s\n", r.level.n, r.level.tau, r.message.c_str());
    }
  }
  std::printf("%zu levels, %d failed, table in %s\n", t.rows.size(), failed,
              (dir / "convergence.csv").string().c_str());
  return failed ? kSolverError : 0;
}

int cmd_exact(const std::string& id, double t, std::size_t grid, std::optional<double> gamma,
              const std::string& output) {
  const vps::ExactRows rows = vps::exact_profile(id, t, grid, gamma);
  if (output.empty()) {
    vps::write_exact_csv(std::cout, rows);
  } else {
    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (!out) throw vps::ConfigError("cannot write '" + output + "'");
    vps::write_exact_csv(out, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational particle schemes for porous medium, heat and Euler equations"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "run one trajectory and write profile and energy CSV");
  run->add_option("--config", config, "JSON configuration")->required();
  auto* conv = app.add_subcommand("converge", "run a ladder of resolutions and write the error table");
  conv->add_option("--config", config, "JSON configuration")->required();

  std::string profile;
  double t = 0.0;
  std::size_t grid = 0;
  std::optional<double> gamma;
  std::string output;
  auto* exact = app.add_subcommand("exact", "sample an exact solution");
  exact->add_option("--profile", profile,
                    "barenblatt | heat_kernel | shock_shock | shock_rarefaction | rarefaction_rarefaction")
      ->required();
  exact->add_option("--t", t, "time")->required();
  exact->add_option("--grid", grid, "number of sample points")->required();
  exact->add_option("--gamma", gamma, "adiabatic exponent");
  exact->add_option("--output", output, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return cmd_run(config);
    if (*conv) return cmd_converge(config);
    return cmd_exact(profile, t, grid, gamma, output);
  } catch (const vps::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const vps::SolverError& e) {
    std::fprintf(stderr, "solver error at %s\n", e.what());
    return kSolverError;
  } catch (const vps::DomainError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
