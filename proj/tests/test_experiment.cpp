#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vps/vps.hpp"

using namespace vps;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vps-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(row);
  }
  return rows;
}

json barenblatt_config(const fs::path& dir) {
  return json{{"problem", "porous_medium"},
              {"scheme", "pm2"},
              {"gamma", 5.0 / 3.0},
              {"initial_data", {{"recipe", "barenblatt"}, {"t0", 1.0}}},
              {"n", 40},
              {"tau", 0.1},
              {"t_final", 2.0},
              {"output", {{"directory", dir.string()}, {"snapshots", {1.0, 1.5, 2.0}}}}};
}

json failing_ladder(const fs::path& dir) {
  // the first step from the block needs more than 20 iterations only at N = 1000
  return json{{"problem", "porous_medium"},
              {"scheme", "pm1"},
              {"gamma", 2.0},
              {"initial_data", {{"recipe", "dirac_block"}}},
              {"t_final", 0.5},
              {"optimizer", {{"max_iters", 20}}},
              {"ladder", {{{"n", 10}, {"tau", 0.1}}, {{"n", 100}, {"tau", 0.1}}, {{"n", 1000}, {"tau", 0.1}}}},
              {"output", {{"directory", dir.string()}}}};
}

void expect_config_error(json j, const std::string& why) {
  EXPECT_THROW(parse_config(j), ConfigError) << why << ": " << j.dump();
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(VPS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_json(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST(Config, ParsesEveryField) {
  const json j = {{"problem", "isentropic_euler"},
                  {"scheme", "vps2"},
                  {"alpha", 0.5},
                  {"gamma", 5.0},
                  {"kappa", 0.3},
                  {"initial_data", {{"recipe", "parabolic"}, {"placement", "weighted"}}},
                  {"n", 50},
                  {"tau", 0.4},
                  {"t_final", 4.0},
                  {"output", {{"directory", "out"}, {"snapshots", {0.0, 4.0}}, {"precision", 12}}},
                  {"optimizer",
                   {{"step_rule", "scaled_ball"}, {"delta0", 0.25}, {"delta_max", 0.5}, {"grad_tol", 1e-12},
                    {"max_iters", 77}, {"eta", 0.01}}}};
  const RunConfig c = parse_config(j);
  EXPECT_EQ(c.problem, Problem::IsentropicEuler);
  EXPECT_EQ(c.scheme, SchemeKind::VPS2);
  EXPECT_EQ(c.alpha, 0.5);
  EXPECT_EQ(*c.gamma, 5.0);
  EXPECT_EQ(*c.kappa, 0.3);
  EXPECT_EQ(c.initial.recipe, "parabolic");
  EXPECT_EQ(c.initial.placement, KnotPlacement::Weighted);
  EXPECT_EQ(c.n, 50u);
  EXPECT_EQ(c.tau, 0.4);
  EXPECT_EQ(c.output.directory, "out");
  EXPECT_EQ(c.output.precision, 12);
  EXPECT_EQ(c.output.snapshots.size(), 2u);
  EXPECT_EQ(c.optimizer.rule, StepRule::ScaledBall);
  EXPECT_EQ(c.optimizer.max_iters, 77);
  EXPECT_EQ(c.optimizer.eta, 0.01);
  EXPECT_EQ(step_count(c, c.tau), 10);
  EXPECT_EQ(energy_model(c).kappa(), 0.3);
}

TEST(Config, DefaultsAndStartTimes) {
  const RunConfig c = parse_config(barenblatt_config("x"));
  EXPECT_EQ(c.alpha, 2.0 / 3.0);
  EXPECT_EQ(c.output.precision, 17);
  EXPECT_EQ(c.optimizer.rule, StepRule::GapNewton);
  EXPECT_EQ(start_time(c), 1.0);
  EXPECT_EQ(step_count(c, c.tau), 10);
  EXPECT_EQ(energy_model(c).kappa(), 1.0);
  json h = {{"problem", "heat"}, {"scheme", "pm2"}, {"initial_data", {{"recipe", "heat_kernel"}}},
            {"n", 100}, {"tau", 0.01}, {"t_final", 2.0}};
  EXPECT_EQ(start_time(parse_config(h)), 1.0);
  json e = {{"problem", "isentropic_euler"}, {"scheme", "vps1a"}, {"gamma", 5.0 / 3.0},
            {"initial_data", {{"recipe", "shock_shock"}}}, {"n", 100}, {"tau", 0.04}, {"t_final", 1.6}};
  const RunConfig ec = parse_config(e);
  EXPECT_EQ(start_time(ec), 0.0);
  EXPECT_EQ(step_count(ec, ec.tau), 40);
  EXPECT_NEAR(energy_model(ec).kappa(), (1.0 / 9) / (5.0 / 3), 1e-15);
}

TEST(Config, UnknownKeysAreRejectedAtEveryLevel) {
  const json base = barenblatt_config("x");
  json j = base;
  j["colour"] = 1;
  expect_config_error(j, "top level");
  j = base;
  j["initial_data"]["width"] = 2;
  expect_config_error(j, "initial_data");
  j = base;
  j["output"]["format"] = "csv";
  expect_config_error(j, "output");
  j = base;
  j["optimizer"] = {{"radius", 1.0}};
  expect_config_error(j, "optimizer");
  j = base;
  j.erase("n");
  j.erase("tau");
  j["ladder"] = {{{"n", 10}, {"tau", 0.1}, {"weight", 1}}};
  expect_config_error(j, "ladder entry");
}

TEST(Config, InvalidCombinationsAreRejected) {
  const json base = barenblatt_config("x");
  auto with = [&](const char* key, json v) {
    json j = base;
    j[key] = v;
    return j;
  };
  expect_config_error(with("scheme", "vps2"), "Euler scheme on a gradient flow");
  expect_config_error(with("scheme", "rk4"), "unknown scheme");
  expect_config_error(with("problem", "wave"), "unknown problem");
  expect_config_error(with("problem", "heat"), "heat takes no gamma and a heat recipe");
  expect_config_error(with("gamma", 1.0), "gamma must exceed one");
  expect_config_error(with("alpha", 0.0), "alpha range");
  expect_config_error(with("n", -5), "negative N");
  expect_config_error(with("n", "many"), "non-numeric N");
  expect_config_error(with("tau", 0.3), "t_final not a multiple of tau");
  expect_config_error(with("t_final", 0.5), "t_final before t0");
  json j = base;
  j.erase("gamma");
  expect_config_error(j, "missing gamma");
  j = base;
  j["output"]["precision"] = 18;
  expect_config_error(j, "precision");
  j = base;
  j["output"]["snapshots"] = {0.5};
  expect_config_error(j, "snapshot before start");
  j = base;
  j["scheme"] = "pm1";
  j["initial_data"]["placement"] = "weighted";
  expect_config_error(j, "weighted particles");
  j = base;
  j["initial_data"]["placement"] = "random";
  expect_config_error(j, "placement value");
  j = {{"problem", "isentropic_euler"}, {"scheme", "pm2"}, {"gamma", 5.0 / 3.0},
       {"initial_data", {{"recipe", "shock_shock"}}}, {"n", 100}, {"tau", 0.04}, {"t_final", 1.6}};
  expect_config_error(j, "gradient-flow scheme on Euler");
  j["scheme"] = "vps2";
  j["kappa"] = 1.0;
  expect_config_error(j, "Riemann recipe with kappa");
  j.erase("kappa");
  j["problem"] = "isothermal_euler";
  j.erase("gamma");
  expect_config_error(j, "isothermal Riemann data");
  j = {{"problem", "porous_medium"}, {"scheme", "pm2"}, {"gamma", 2.0},
       {"initial_data", {{"recipe", "asymmetric_block"}}}, {"n", 100}, {"tau", 0.1}, {"t_final", 1.0}};
  expect_config_error(j, "asymmetric block on cells");
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, OutputDirectoryOverride) {
  RunConfig c = parse_config(barenblatt_config("configured"));
  ::unsetenv("VPS_OUTPUT_DIR");
  EXPECT_EQ(output_directory(c), "configured");
  ::setenv("VPS_OUTPUT_DIR", "/tmp/elsewhere", 1);
  EXPECT_EQ(output_directory(c), "/tmp/elsewhere");
  ::unsetenv("VPS_OUTPUT_DIR");
}

TEST(Run, WritesEnergyProfilesAndErrors) {
  ::unsetenv("VPS_OUTPUT_DIR");
  const fs::path dir = scratch("run");
  const RunConfig c = parse_config(barenblatt_config(dir));
  const RunReport rep = run(c);
  ASSERT_EQ(rep.steps.size(), 11u);
  EXPECT_EQ(rep.steps.back().time, 2.0);
  const auto energy = read_csv(dir / "energy.csv");
  ASSERT_EQ(energy.size(), 12u);
  EXPECT_EQ(energy[0], (std::vector<std::string>{"t", "kinetic", "internal", "total"}));
  for (std::size_t k = 1; k < energy.size(); ++k) {
    EXPECT_EQ(std::stod(energy[k][1]), 0.0);
    // printed at 17 digits, every value reads back exactly
    EXPECT_EQ(std::stod(energy[k][3]), rep.steps[k - 1].energy.total);
    EXPECT_EQ(std::stod(energy[k][0]), rep.steps[k - 1].time);
    if (k > 1) { EXPECT_LE(std::stod(energy[k][3]), std::stod(energy[k - 1][3])); }
  }
  for (const char* f : {"profile_000000.csv", "profile_000005.csv", "profile_000010.csv"}) {
    const auto rows = read_csv(dir / f);
    ASSERT_EQ(rows.size(), 41u) << f;
    EXPECT_EQ(rows[0], (std::vector<std::string>{"x_mid", "density", "velocity"}));
  }
  EXPECT_EQ(rep.snapshot_files.size(), 3u);
  const auto errors = read_csv(dir / "errors.csv");
  ASSERT_EQ(errors.size(), 2u);
  EXPECT_EQ(errors[0], (std::vector<std::string>{"t", "center", "linf", "l1", "W", "E_W", "E_tot"}));
  EXPECT_EQ(std::stod(errors[1][1]), rep.errors.center_error);
  EXPECT_GT(rep.errors.center_error, 0.0);
  EXPECT_LT(rep.errors.center_error, 1e-2);
  EXPECT_EQ(errors[1][5], "nan");
}

TEST(Run, OutputIsByteIdenticalAcrossRuns) {
  const fs::path a = scratch("det-a"), b = scratch("det-b");
  json ja = {{"problem", "isentropic_euler"}, {"scheme", "vps2"}, {"gamma", 5.0 / 3.0},
             {"initial_data", {{"recipe", "shock_shock"}}}, {"n", 60}, {"tau", 0.04}, {"t_final", 0.8},
             {"output", {{"directory", a.string()}, {"snapshots", {0.4, 0.8}}}}};
  json jb = ja;
  jb["output"]["directory"] = b.string();
  run(parse_config(ja));
  run(parse_config(jb));
  for (const char* f : {"energy.csv", "errors.csv", "profile_000010.csv", "profile_000020.csv"}) {
    const std::string sa = slurp(a / f);
    EXPECT_FALSE(sa.empty()) << f;
    EXPECT_EQ(sa, slurp(b / f)) << f;
  }
}

TEST(Run, NumbersUseTheConfiguredPrecision) {
  EXPECT_EQ(detail::fmt(0.1, 17), "0.10000000000000001");
  EXPECT_EQ(detail::fmt(1.0 / 3.0, 5), "0.33333");
  for (double v : {1.0 / 3.0, 2.0 / 7.0, 1e-300, 6.02214076e23, -0.0})
    EXPECT_EQ(std::strtod(detail::fmt(v, 17).c_str(), nullptr), v);
}

TEST(Run, RecipesWithoutExactSolutionWriteNoErrorTable) {
  const fs::path dir = scratch("noexact");
  json j = {{"problem", "isothermal_euler"}, {"scheme", "vps1a"}, {"initial_data", {{"recipe", "parabolic"}}},
            {"n", 20}, {"tau", 0.1}, {"t_final", 0.5}, {"output", {{"directory", dir.string()}}}};
  run(parse_config(j));
  EXPECT_TRUE(fs::exists(dir / "energy.csv"));
  EXPECT_FALSE(fs::exists(dir / "errors.csv"));
}

TEST(Run, SingleUniformCellSpreadsAndLosesNoEnergy) {
  json j = {{"problem", "isentropic_euler"}, {"scheme", "vps1a"}, {"gamma", 2.0},
            {"initial_data", {{"recipe", "dirac_block"}}}, {"n", 1}, {"tau", 0.01}, {"t_final", 1.0}};
  const RunConfig c = parse_config(j);
  const RunReport rep = simulate(c, {c.n, c.tau});
  for (std::size_t k = 1; k < rep.steps.size(); ++k)
    EXPECT_LE(rep.steps[k].energy.total, rep.steps[k - 1].energy.total + 1e-12) << k;
  std::optional<Simulation> sim;
  simulate(c, {c.n, c.tau}, {}, &sim);
  const CellState& s = sim->cell_state();
  EXPECT_NEAR(s.knots[0], -s.knots[1], 1e-12);
  EXPECT_GT(s.knots[1], 0.01);
}

TEST(Run, SolverFailureReportsTheStep) {
  json j = failing_ladder(scratch("fail"));
  j.erase("ladder");
  j["n"] = 1000;
  j["tau"] = 0.1;
  const RunConfig c = parse_config(j);
  try {
    simulate(c, {c.n, c.tau});
    FAIL() << "expected a solver failure";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.step(), 1);
  }
}

TEST(Converge, TableAgainstTheExactSolution) {
  json j = barenblatt_config("unused");
  j.erase("n");
  j.erase("tau");
  j["ladder"] = {{{"n", 50}, {"tau", 0.1}}, {{"n", 100}, {"tau", 0.05}}, {{"n", 200}, {"tau", 0.025}}};
  const ConvergenceTable t = converge(parse_config(j));
  ASSERT_EQ(t.rows.size(), 3u);
  for (const auto& r : t.rows) EXPECT_TRUE(r.ok);
  const auto rates = t.rates(&ErrorReport::center_error);
  ASSERT_EQ(rates.size(), 2u);
  for (double r : rates) EXPECT_NEAR(r, 2.0, 0.3);
  const fs::path dir = scratch("conv");
  write_convergence_csv(dir / "c.csv", t, 17);
  const auto rows = read_csv(dir / "c.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].size(), 16u);
  EXPECT_EQ(rows[0][0], "N");
  EXPECT_EQ(rows[0][14], "status");
  EXPECT_EQ(rows[1][8], "");
  EXPECT_EQ(std::stod(rows[2][8]), rates[0]);
  EXPECT_EQ(rows[3][14], "ok");
}

TEST(Converge, FailingLevelIsRecordedAndOthersContinue) {
  const ConvergenceTable t = converge(parse_config(failing_ladder("unused")));
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_TRUE(t.rows[0].ok);
  EXPECT_TRUE(t.rows[1].ok);
  EXPECT_FALSE(t.rows[2].ok);
  EXPECT_EQ(t.rows[2].failed_step, 1);
  EXPECT_GT(t.rows[1].errors.linf, 0.0);
}

TEST(Converge, ReferenceLevelReplacesTheExactSolution) {
  json j = {{"problem", "isentropic_euler"}, {"scheme", "vps2"}, {"gamma", 5.0},
            {"initial_data", {{"recipe", "parabolic"}}}, {"t_final", 1.6},
            {"ladder", {{{"n", 20}, {"tau", 0.4}}, {{"n", 40}, {"tau", 0.2}}}}};
  EXPECT_THROW(converge(parse_config(j)), ConfigError);
  j["reference"] = {{"n", 400}, {"tau", 0.02}};
  const ConvergenceTable t = converge(parse_config(j));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_LT(t.rows[1].errors.e_w, t.rows[0].errors.e_w);
  EXPECT_GT(t.rows[1].errors.wasserstein, 0.0);
  EXPECT_TRUE(std::isnan(t.rows[0].errors.center_error));
}

TEST(Exact, ShockShockPlateau) {
  const ExactRows r = exact_profile("shock_shock", 0.5, 1001);
  ASSERT_EQ(r.x.size(), 1001u);
  const RiemannSolution s = solve_riemann_intermediate(riemann_presets::shock_shock());
  int plateau = 0;
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    if (r.x[i] > 0.5 * s.s_l + 1e-9 && r.x[i] < 0.5 * s.s_r - 1e-9) {
      EXPECT_NEAR(r.density[i], 1.16641, 5e-5);
      EXPECT_NEAR(r.velocity[i], 0.5, 1e-12);
      ++plateau;
    }
  }
  EXPECT_GT(plateau, 10);
  EXPECT_THROW(exact_profile("shock_shock", 100.0, 11), ConfigError);
  EXPECT_THROW(exact_profile("tsunami", 1.0, 11), ConfigError);
}

TEST(Exact, BarenblattAndHeatKernel) {
  const ExactRows b = exact_profile("barenblatt", 1.0, 1001);
  for (std::size_t i = 0; i < b.x.size(); ++i) EXPECT_NEAR(b.density[i], b.density[b.x.size() - 1 - i], 1e-13);
  EXPECT_NEAR(b.density.front(), 0.0, 1e-20);
  EXPECT_NEAR(b.density.back(), 0.0, 1e-20);
  const ExactRows h = exact_profile("heat_kernel", 10.0, 1001);
  EXPECT_NEAR(h.x[500], 0.0, 1e-12);
  EXPECT_NEAR(h.density[500], 0.0892062, 5e-8);
  std::ostringstream out;
  write_exact_csv(out, exact_profile("heat_kernel", 1.0, 3));
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "x,density,velocity");
}

TEST(Cli, ExitCodes) {
  ::unsetenv("VPS_OUTPUT_DIR");
  const fs::path dir = scratch("cli");
  const fs::path good = write_json(dir, barenblatt_config(dir / "configured"));
  const fs::path override_dir = dir / "override";
  EXPECT_EQ(run_cli("run --config " + good.string(), "VPS_OUTPUT_DIR=" + override_dir.string()), 0);
  EXPECT_TRUE(fs::exists(override_dir / "energy.csv"));
  EXPECT_FALSE(fs::exists(dir / "configured"));

  EXPECT_EQ(run_cli("exact --profile shock_shock --t 0.5 --grid 101 --output " + (dir / "ss.csv").string()), 0);
  EXPECT_EQ(read_csv(dir / "ss.csv").size(), 102u);

  EXPECT_EQ(run_cli("exact --profile shock_shock --t 50 --grid 101"), 2);
  EXPECT_EQ(run_cli("exact --profile barenblatt --grid 101"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("run --config " + (dir / "missing.json").string()), 2);

  json bad = barenblatt_config(dir);
  bad["extra"] = true;
  const fs::path bad_dir = dir / "bad";
  fs::create_directories(bad_dir);
  EXPECT_EQ(run_cli("run --config " + write_json(bad_dir, bad).string()), 2);

  const fs::path fail_dir = dir / "fail";
  fs::create_directories(fail_dir);
  json f = failing_ladder(fail_dir / "out");
  EXPECT_EQ(run_cli("converge --config " + write_json(fail_dir, f).string()), 3);
  const auto rows = read_csv(fail_dir / "out" / "convergence.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[3][14], "failed");
  EXPECT_EQ(rows[3][15], "1");
  EXPECT_EQ(rows[1][14], "ok");
  f.erase("ladder");
  f["n"] = 1000;
  f["tau"] = 0.1;
  EXPECT_EQ(run_cli("run --config " + write_json(fail_dir, f).string()), 3);
}
