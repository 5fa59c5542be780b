#ifndef VPS_EXPERIMENT_HPP
#define VPS_EXPERIMENT_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vps/error.hpp"
#include "vps/metrics.hpp"
#include "vps/oracles.hpp"
#include "vps/physics.hpp"
#include "vps/schemes.hpp"

namespace vps {

enum class Problem { PorousMedium, Heat, IsentropicEuler, IsothermalEuler };

inline bool is_euler(Problem p) { return p == Problem::IsentropicEuler || p == Problem::IsothermalEuler; }

struct InitialData {
  std::string recipe;
  double t0 = 1.0;  // start time of the barenblatt recipe
  KnotPlacement placement = KnotPlacement::Uniform;
};

struct OutputConfig {
  std::string directory = "vps-output";
  std::vector<double> snapshots;
  int precision = 17;
};

struct Level {
  std::size_t n = 0;
  double tau = 0.0;
};

struct RunConfig {
  Problem problem = Problem::PorousMedium;
  SchemeKind scheme = SchemeKind::PM2;
  double alpha = alpha_presets::standard;
  std::optional<double> gamma;
  std::optional<double> kappa;
  InitialData initial;
  std::size_t n = 0;
  double tau = 0.0;
  double t_final = 0.0;
  OutputConfig output;
  TrustRegionConfig optimizer{};
  std::vector<Level> ladder;
  std::optional<Level> reference;
};

/// Failure of the nonlinear solve in a given step (CLI exit code 3).
class SolverError : public Error {
 public:
  SolverError(long step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

// ---------------------------------------------------------------------------
// Configuration

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const char* where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

inline std::size_t count(const json& v, const char* key) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(std::string("'") + key + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

template <typename T>
T required(const json& j, const char* key, const char* where) {
  if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "' in " + where);
  return j.at(key).get<T>();
}

inline Level parse_level(const json& j, const char* where) {
  reject_unknown(j, where, {"n", "tau"});
  if (!j.contains("n")) throw ConfigError(std::string("missing key 'n' in ") + where);
  return {count(j.at("n"), "n"), required<double>(j, "tau", where)};
}

inline Problem parse_problem(const std::string& s) {
  if (s == "porous_medium") return Problem::PorousMedium;
  if (s == "heat") return Problem::Heat;
  if (s == "isentropic_euler") return Problem::IsentropicEuler;
  if (s == "isothermal_euler") return Problem::IsothermalEuler;
  throw ConfigError("unknown problem '" + s + "'");
}

inline SchemeKind parse_scheme(const std::string& s) {
  for (SchemeKind k : {SchemeKind::VPS1, SchemeKind::VPS1a, SchemeKind::VPS2, SchemeKind::DIRK2,
                       SchemeKind::PM1, SchemeKind::PM2})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown scheme '" + s + "'");
}

inline bool is_riemann_recipe(const std::string& r) {
  return r == "shock_shock" || r == "shock_rarefaction" || r == "rarefaction_rarefaction";
}

}  // namespace detail

/// Whether the configured problem has a closed-form solution to compare with:
/// Barenblatt profiles for unit-coefficient porous media, the heat kernel, and
/// the isentropic Riemann problems.
inline bool has_exact_solution(const RunConfig& c) {
  const std::string& r = c.initial.recipe;
  switch (c.problem) {
    case Problem::PorousMedium:
      return (r == "dirac_block" || r == "barenblatt") && c.kappa.value_or(1.0) == 1.0;
    case Problem::Heat:
      return r == "heat_kernel";
    case Problem::IsentropicEuler:
      return detail::is_riemann_recipe(r);
    case Problem::IsothermalEuler:
      return false;
  }
  return false;
}

inline double start_time(const RunConfig& c) {
  if (c.initial.recipe == "barenblatt") return c.initial.t0;
  if (c.initial.recipe == "heat_kernel") return 1.0;
  return 0.0;
}

inline long step_count(const RunConfig& c, double tau) {
  const double duration = c.t_final - start_time(c);
  const double k = std::round(duration / tau);
  if (!(k >= 1.0) || std::abs(k * tau - duration) > 1e-9 * std::max(1.0, duration))
    throw ConfigError("t_final - start time must be a positive multiple of tau");
  return static_cast<long>(k);
}

inline EnergyModel energy_model(const RunConfig& c) {
  switch (c.problem) {
    case Problem::PorousMedium:
      return EnergyModel::polytropic(*c.gamma, c.kappa.value_or(1.0));
    case Problem::IsentropicEuler:
      return c.kappa ? EnergyModel::polytropic(*c.gamma, *c.kappa) : EnergyModel::polytropic(*c.gamma);
    case Problem::Heat:
    case Problem::IsothermalEuler:
      return EnergyModel::isothermal();
  }
  return EnergyModel::isothermal();
}

inline void validate(const RunConfig& c, bool need_level = true) {
  const bool euler = is_euler(c.problem);
  if (euler == is_gradient_flow_scheme(c.scheme))
    throw ConfigError("scheme " + to_string(c.scheme) + " does not apply to this problem");
  const bool polytropic = c.problem == Problem::PorousMedium || c.problem == Problem::IsentropicEuler;
  if (polytropic && !c.gamma) throw ConfigError("gamma is required for polytropic problems");
  if (!polytropic && (c.gamma || c.kappa)) throw ConfigError("gamma and kappa apply to polytropic problems only");
  if (c.gamma && !(*c.gamma > 1.0)) throw ConfigError("gamma must exceed one");
  if (c.kappa && !(*c.kappa > 0.0)) throw ConfigError("kappa must be positive");
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw ConfigError("alpha must lie in (0,1]");

  const std::string& r = c.initial.recipe;
  const bool particles = is_particle_scheme(c.scheme);
  bool ok = false;
  switch (c.problem) {
    case Problem::PorousMedium:
      ok = r == "dirac_block" || r == "barenblatt" || (r == "asymmetric_block" && particles);
      break;
    case Problem::Heat:
      ok = r == "heat_kernel";
      break;
    case Problem::IsentropicEuler:
      ok = detail::is_riemann_recipe(r) || r == "parabolic" || r == "dirac_block";
      break;
    case Problem::IsothermalEuler:
      ok = r == "parabolic" || r == "dirac_block";
      break;
  }
  if (!ok) throw ConfigError("initial data recipe '" + r + "' does not apply to this problem and scheme");
  if (detail::is_riemann_recipe(r) && c.kappa)
    throw ConfigError("Riemann recipes fix kappa = theta^2/gamma");
  if (r == "barenblatt" && !(c.initial.t0 > 0.0)) throw ConfigError("barenblatt t0 must be positive");
  if (c.initial.placement == KnotPlacement::Weighted && (particles || (r != "barenblatt" && r != "parabolic")))
    throw ConfigError("weighted knot placement applies to barenblatt and parabolic cells only");

  if (!(c.t_final > start_time(c))) throw ConfigError("t_final must exceed the start time");
  if (c.output.precision < 1 || c.output.precision > 17) throw ConfigError("precision must lie in [1,17]");
  for (double s : c.output.snapshots)
    if (!(s >= start_time(c) && s <= c.t_final)) throw ConfigError("snapshot times must lie in [start, t_final]");

  auto check_level = [&](const Level& l) {
    const std::size_t min_n = r == "heat_kernel" ? 3 : particles ? 2 : 1;
    if (l.n < min_n) throw ConfigError("N is too small for the recipe");
    if (!(l.tau > 0.0)) throw ConfigError("tau must be positive");
    step_count(c, l.tau);
  };
  if (need_level) check_level({c.n, c.tau});
  for (const Level& l : c.ladder) check_level(l);
  if (c.reference) check_level(*c.reference);
  try {
    validate(c.optimizer);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("optimizer: ") + e.what());
  }
}

/// Parses and validates a run or convergence configuration. Unknown keys are
/// rejected at every level.
inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::required;
  RunConfig c;
  try {
    detail::reject_unknown(j, "config", {"problem", "scheme", "alpha", "gamma", "kappa", "initial_data", "n",
                                         "tau", "t_final", "output", "optimizer", "ladder", "reference"});
    c.problem = detail::parse_problem(required<std::string>(j, "problem", "config"));
    c.scheme = detail::parse_scheme(required<std::string>(j, "scheme", "config"));
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
    if (j.contains("kappa")) c.kappa = j.at("kappa").get<double>();

    const auto& init = j.contains("initial_data") ? j.at("initial_data") : throw ConfigError("missing initial_data");
    detail::reject_unknown(init, "initial_data", {"recipe", "t0", "placement"});
    c.initial.recipe = required<std::string>(init, "recipe", "initial_data");
    if (init.contains("t0")) c.initial.t0 = init.at("t0").get<double>();
    if (init.contains("placement")) {
      const std::string p = init.at("placement").get<std::string>();
      if (p == "uniform")
        c.initial.placement = KnotPlacement::Uniform;
      else if (p == "weighted")
        c.initial.placement = KnotPlacement::Weighted;
      else
        throw ConfigError("placement must be 'uniform' or 'weighted'");
    }

    if (j.contains("n")) c.n = detail::count(j.at("n"), "n");
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    c.t_final = required<double>(j, "t_final", "config");

    if (j.contains("output")) {
      const auto& o = j.at("output");
      detail::reject_unknown(o, "output", {"directory", "snapshots", "precision"});
      if (o.contains("directory")) c.output.directory = o.at("directory").get<std::string>();
      if (o.contains("snapshots")) c.output.snapshots = o.at("snapshots").get<std::vector<double>>();
      if (o.contains("precision")) c.output.precision = o.at("precision").get<int>();
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      detail::reject_unknown(o, "optimizer", {"step_rule", "delta0", "delta_max", "grad_tol", "max_iters", "eta"});
      if (o.contains("step_rule")) {
        const std::string s = o.at("step_rule").get<std::string>();
        if (s == "gap_newton")
          c.optimizer.rule = StepRule::GapNewton;
        else if (s == "scaled_ball")
          c.optimizer.rule = StepRule::ScaledBall;
        else
          throw ConfigError("step_rule must be 'gap_newton' or 'scaled_ball'");
      }
      if (o.contains("delta0")) c.optimizer.delta0 = o.at("delta0").get<double>();
      if (o.contains("delta_max")) c.optimizer.delta_max = o.at("delta_max").get<double>();
      if (o.contains("grad_tol")) c.optimizer.grad_tol = o.at("grad_tol").get<double>();
      if (o.contains("max_iters")) c.optimizer.max_iters = o.at("max_iters").get<int>();
      if (o.contains("eta")) c.optimizer.eta = o.at("eta").get<double>();
    }
    if (j.contains("ladder")) {
      if (!j.at("ladder").is_array()) throw ConfigError("ladder must be an array");
      for (const auto& l : j.at("ladder")) c.ladder.push_back(detail::parse_level(l, "ladder entry"));
    }
    if (j.contains("reference")) c.reference = detail::parse_level(j.at("reference"), "reference");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  validate(c, c.ladder.empty());
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Output directory, overridden by VPS_OUTPUT_DIR when set and nonempty.
inline std::string output_directory(const RunConfig& c) {
  const char* env = std::getenv("VPS_OUTPUT_DIR");
  return (env && *env) ? std::string(env) : c.output.directory;
}

// ---------------------------------------------------------------------------
// Trajectories

/// One trajectory of a configured scheme. Particle schemes hold a
/// ParticleState, cell schemes a two-level history.
class Simulation {
 public:
  Simulation(const RunConfig& c, Level level) : cfg_(c) {
    scheme_.scheme = c.scheme;
    scheme_.alpha = c.alpha;
    scheme_.tau = level.tau;
    scheme_.model = energy_model(c);
    scheme_.optimizer = c.optimizer;
    if (is_particle_scheme(c.scheme))
      state_ = initial_particles(c, level.n);
    else
      state_ = Bdf2History{std::nullopt, initial_cells(c, level.n)};
    set_time(start_time(c));
  }

  const SchemeConfig& scheme() const noexcept { return scheme_; }
  long steps_taken() const noexcept { return steps_; }
  bool particles() const noexcept { return std::holds_alternative<ParticleState>(state_); }
  const ParticleState& particle_state() const { return std::get<ParticleState>(state_); }
  const CellState& cell_state() const { return std::get<Bdf2History>(state_).current; }

  double time() const { return particles() ? particle_state().time : cell_state().time; }

  /// Gradient flows report the internal energy only.
  Energy energy() const {
    Energy e = particles() ? total_energy_particles(particle_state(), scheme_.model)
                           : total_energy_cells(cell_state(), scheme_.model);
    if (is_gradient_flow_scheme(scheme_.scheme)) e = {0.0, e.internal, e.internal};
    return e;
  }

  /// Advances one step; any solver failure is rethrown with the step index.
  MinimizeStats step() {
    MinimizeStats st;
    const long k = steps_ + 1;
    const double t_next = start_time(cfg_) + static_cast<double>(k) * scheme_.tau;
    try {
      if (auto* p = std::get_if<ParticleState>(&state_)) {
        *p = scheme_.scheme == SchemeKind::VPS1 ? vps1_step(*p, scheme_, &st) : pm1_step(*p, scheme_, &st);
      } else {
        auto& h = std::get<Bdf2History>(state_);
        CellState next;
        switch (scheme_.scheme) {
          case SchemeKind::VPS2: next = vps2_step(h, scheme_, &st); break;
          case SchemeKind::VPS1a: next = vps1a_step(h, scheme_, &st); break;
          case SchemeKind::PM2: next = pm2_step(h, scheme_, &st); break;
          case SchemeKind::DIRK2: next = dirk2_step(h.current, scheme_, &st); break;
          default: throw DomainError("not a cell scheme");
        }
        h.advance(std::move(next));
      }
    } catch (const Error& e) {
      throw SolverError(k, e.what());
    }
    steps_ = k;
    set_time(t_next);  // avoids drift from accumulating tau
    return st;
  }

  /// Interval midpoints, densities and mean velocities.
  struct ProfileRows {
    std::vector<double> x_mid;
    std::vector<double> density;
    std::vector<double> velocity;
  };

  ProfileRows profile() const {
    ProfileRows r;
    const DensitySamples d = particles() ? density_samples(particle_state()) : density_samples(cell_state());
    const std::vector<double>& u = particles() ? particle_state().velocities : cell_state().velocities;
    for (std::size_t i = 0; i < d.value.size(); ++i) {
      r.x_mid.push_back(0.5 * (d.left[i] + d.right[i]));
      r.density.push_back(d.value[i]);
      r.velocity.push_back(0.5 * (u[i] + u[i + 1]));
    }
    return r;
  }

 private:
  static RiemannData riemann_data(const RunConfig& c) {
    RiemannData d = c.initial.recipe == "shock_shock"         ? riemann_presets::shock_shock()
                    : c.initial.recipe == "shock_rarefaction" ? riemann_presets::shock_rarefaction()
                                                              : riemann_presets::rarefaction_rarefaction();
    d.gamma = *c.gamma;
    return d;
  }

  static ParticleState initial_particles(const RunConfig& c, std::size_t n) {
    const std::string& r = c.initial.recipe;
    if (r == "dirac_block") return dirac_block_particles(n);
    if (r == "asymmetric_block") return asymmetric_block_particles(n);
    if (r == "barenblatt") return barenblatt_particles(n, *c.gamma, c.initial.t0);
    if (r == "heat_kernel")
      return particles_from_quantiles(n, [](double s) { return -2.0 * erfc_inv(2.0 * s); }, zero_velocity);
    if (r == "parabolic") return parabolic_particles(n);
    return riemann_particles(riemann_data(c), n);
  }

  static CellState initial_cells(const RunConfig& c, std::size_t n) {
    const std::string& r = c.initial.recipe;
    if (r == "dirac_block") return dirac_block_cells(n);
    if (r == "barenblatt") return barenblatt_cells(n, *c.gamma, c.initial.t0, c.initial.placement);
    if (r == "heat_kernel") return heat_kernel_cells(n);
    if (r == "parabolic") return parabolic_cells(n, c.initial.placement);
    return riemann_cells(riemann_data(c), n);
  }

  void set_time(double t) {
    if (auto* p = std::get_if<ParticleState>(&state_))
      p->time = t;
    else
      std::get<Bdf2History>(state_).current.time = t;
  }

  friend struct Comparison;
  RunConfig cfg_;
  SchemeConfig scheme_;
  std::variant<ParticleState, Bdf2History> state_;
  long steps_ = 0;
};

// ---------------------------------------------------------------------------
// Errors against exact solutions or a reference run

/// Target of an error evaluation at a fixed time. Members that are absent
/// leave the matching error fields NaN.
struct Comparison {
  std::optional<DensityFn> density;
  std::optional<ExactProfile> profile;
  std::optional<CellState> reference;
  std::optional<double> energy;
  bool center = false;

  /// Exact solution of the configured recipe at time t, when one is known.
  static Comparison exact(const RunConfig& c, double t) {
    Comparison out;
    if (!has_exact_solution(c)) return out;
    if (c.problem == Problem::PorousMedium) {
      const Barenblatt b(*c.gamma);
      out.density = [b, t](double x) { return b.density(t, x); };
      out.center = true;
    } else if (c.problem == Problem::Heat) {
      out.density = [t](double x) { return heat_kernel(t, x); };
      out.center = true;
    } else {
      const RiemannData d = Simulation::riemann_data(c);
      const RiemannSolution sol = solve_riemann_intermediate(d);
      if (t > sol.t_max) return out;
      out.profile = riemann_profile(sol, d, t);
      const ExactProfile& p = *out.profile;
      out.density = [p](double x) { return p.density(x); };
      out.energy = p.energy(energy_model(c));
    }
    return out;
  }

  static Comparison against(const Simulation& ref) {
    if (ref.particles()) throw ConfigError("reference runs must use a cell scheme");
    Comparison out;
    out.reference = ref.cell_state();
    const std::vector<double> knots = out.reference->knots;
    std::vector<double> rho(out.reference->cells());
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = out.reference->density(i);
    out.density = [knots, rho](double x) {
      auto it = std::upper_bound(knots.begin(), knots.end(), x);
      if (it == knots.begin() || it == knots.end()) return 0.0;
      return rho[static_cast<std::size_t>(it - knots.begin()) - 1];
    };
    out.energy = ref.energy().total;
    return out;
  }

  bool empty() const { return !density && !profile && !reference && !energy; }
};

inline bool is_euler_scheme(const Simulation& s) { return !is_gradient_flow_scheme(s.scheme().scheme); }

inline ErrorReport evaluate_errors(const Simulation& s, const Comparison& cmp) {
  ErrorReport e;
  auto with_state = [&](auto&& fn) {
    if (s.particles())
      fn(s.particle_state());
    else
      fn(s.cell_state());
  };
  if (cmp.density) {
    with_state([&](const auto& st) {
      e.linf = linf_error(st, *cmp.density);
      e.l1 = l1_error(st, *cmp.density);
      if (cmp.center) e.center_error = center_error(st, *cmp.density);
    });
  }
  if (!s.particles()) {
    if (cmp.profile) {
      e.wasserstein = wasserstein_error(s.cell_state(), *cmp.profile);
      if (is_euler_scheme(s)) e.e_w = ew_error(s.cell_state(), *cmp.profile);
    } else if (cmp.reference) {
      e.wasserstein = wasserstein_error(s.cell_state(), *cmp.reference);
      if (is_euler_scheme(s)) e.e_w = ew_error(s.cell_state(), *cmp.reference);
    }
  }
  if (cmp.energy) e.energy_error = std::abs(s.energy().total - *cmp.energy);
  return e;
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail {

inline std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

inline std::ofstream open_csv(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  return out;
}

}  // namespace detail

inline void write_profile_csv(const std::filesystem::path& p, const Simulation::ProfileRows& rows, int precision) {
  auto out = detail::open_csv(p);
  out << "x_mid,density,velocity\n";
  for (std::size_t i = 0; i < rows.x_mid.size(); ++i)
    out << detail::fmt(rows.x_mid[i], precision) << ',' << detail::fmt(rows.density[i], precision) << ','
        << detail::fmt(rows.velocity[i], precision) << '\n';
}

// ---------------------------------------------------------------------------
// Drivers

struct StepRecord {
  long step = 0;
  double time = 0.0;
  Energy energy;
  int iterations = 0;
  int accepted = 0;
  int lambda_iterations = 0;
};

struct RunReport {
  std::vector<StepRecord> steps;  // steps[0] is the initial state
  std::vector<std::string> snapshot_files;
  ErrorReport errors;
};

/// Per-step callback, called after the initial state and after every step.
using StepObserver = std::function<void(const Simulation&, const StepRecord&)>;

/// Runs one trajectory without writing files.
inline RunReport simulate(const RunConfig& c, Level level, const StepObserver& observe = {},
                          std::optional<Simulation>* final_state = nullptr) {
  Simulation sim(c, level);
  RunReport rep;
  const long steps = step_count(c, level.tau);
  auto record = [&](const MinimizeStats& st) {
    StepRecord r{sim.steps_taken(), sim.time(), sim.energy(), st.iterations, st.accepted, st.lambda_iterations};
    rep.steps.push_back(r);
    if (observe) observe(sim, r);
  };
  record(MinimizeStats{});
  for (long k = 0; k < steps; ++k) record(sim.step());
  const Comparison cmp = Comparison::exact(c, sim.time());
  rep.errors = evaluate_errors(sim, cmp);
  if (final_state) *final_state = std::move(sim);
  return rep;
}

/// Runs the configured trajectory and writes energy.csv, errors.csv (when an
/// exact solution exists) and one profile_<step>.csv per snapshot time.
/// Snapshot times are rounded to the nearest step.
inline RunReport run(const RunConfig& c) {
  validate(c);
  const std::filesystem::path dir = output_directory(c);
  std::filesystem::create_directories(dir);
  const int prec = c.output.precision;
  const double t0 = start_time(c);

  std::vector<long> snap_steps;
  for (double t : c.output.snapshots) snap_steps.push_back(std::lround((t - t0) / c.tau));
  std::sort(snap_steps.begin(), snap_steps.end());
  snap_steps.erase(std::unique(snap_steps.begin(), snap_steps.end()), snap_steps.end());

  std::vector<std::string> files;
  auto energy_out = detail::open_csv(dir / "energy.csv");
  energy_out << "t,kinetic,internal,total\n";
  RunReport rep = simulate(c, {c.n, c.tau}, [&](const Simulation& sim, const StepRecord& r) {
    energy_out << detail::fmt(r.time, prec) << ',' << detail::fmt(r.energy.kinetic, prec) << ','
               << detail::fmt(r.energy.internal, prec) << ',' << detail::fmt(r.energy.total, prec) << '\n';
    if (std::binary_search(snap_steps.begin(), snap_steps.end(), r.step)) {
      char name[32];
      std::snprintf(name, sizeof name, "profile_%06ld.csv", r.step);
      write_profile_csv(dir / name, sim.profile(), prec);
      files.push_back((dir / name).string());
    }
  });
  rep.snapshot_files = std::move(files);

  const ErrorReport& e = rep.errors;
  if (has_exact_solution(c)) {
    auto out = detail::open_csv(dir / "errors.csv");
    out << "t,center,linf,l1,W,E_W,E_tot\n";
    out << detail::fmt(rep.steps.back().time, prec) << ',' << detail::fmt(e.center_error, prec) << ','
        << detail::fmt(e.linf, prec) << ',' << detail::fmt(e.l1, prec) << ','
        << detail::fmt(e.wasserstein, prec) << ',' << detail::fmt(e.e_w, prec) << ','
        << detail::fmt(e.energy_error, prec) << '\n';
  }
  return rep;
}

struct LevelResult {
  Level level;
  ErrorReport errors;
  bool ok = true;
  long failed_step = 0;
  std::string message;
};

struct ConvergenceTable {
  std::vector<LevelResult> rows;

  /// Rates between consecutive levels in N (or tau when N repeats).
  std::vector<double> rates(double ErrorReport::*field) const {
    std::vector<double> r;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const Level a = rows[k - 1].level;
      const Level b = rows[k].level;
      const double e[2] = {rows[k - 1].errors.*field, rows[k].errors.*field};
      const double h[2] = {a.n != b.n ? 1.0 / static_cast<double>(a.n) : a.tau,
                           a.n != b.n ? 1.0 / static_cast<double>(b.n) : b.tau};
      r.push_back(convergence_rates(e, h).front());
    }
    return r;
  }
};

/// Runs every ladder level against the exact solution, or against the
/// reference level when one is configured. A failing level is recorded and
/// the remaining levels still run.
inline ConvergenceTable converge(const RunConfig& c) {
  validate(c, false);
  if (c.ladder.empty()) throw ConfigError("converge needs a nonempty ladder");
  std::optional<Comparison> fixed;
  if (c.reference) {
    std::optional<Simulation> ref;
    simulate(c, *c.reference, {}, &ref);
    fixed = Comparison::against(*ref);
  } else if (!has_exact_solution(c)) {
    throw ConfigError("recipe has no exact solution; configure a reference level");
  }
  ConvergenceTable table;
  for (const Level& l : c.ladder) {
    LevelResult row{l, {}, true, 0, {}};
    try {
      std::optional<Simulation> sim;
      const RunReport rep = simulate(c, l, {}, &sim);
      row.errors = fixed ? evaluate_errors(*sim, *fixed) : rep.errors;
    } catch (const SolverError& e) {
      row.ok = false;
      row.failed_step = e.step();
      row.message = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline void write_convergence_csv(const std::filesystem::path& p, const ConvergenceTable& t, int precision) {
  using F = double ErrorReport::*;
  const F fields[] = {&ErrorReport::center_error, &ErrorReport::linf,  &ErrorReport::l1,
                      &ErrorReport::wasserstein,  &ErrorReport::e_w,   &ErrorReport::energy_error};
  std::vector<std::vector<double>> rates;
  for (F f : fields) rates.push_back(t.rates(f));
  auto out = detail::open_csv(p);
  out << "N,tau,center,linf,l1,W,E_W,E_tot,rate_center,rate_linf,rate_l1,rate_W,rate_E_W,rate_E_tot,"
         "status,failed_step\n";
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const LevelResult& r = t.rows[k];
    out << r.level.n << ',' << detail::fmt(r.level.tau, precision);
    for (F f : fields) out << ',' << detail::fmt(r.errors.*f, precision);
    for (const auto& rr : rates) out << ',' << (k == 0 ? std::string() : detail::fmt(rr[k - 1], precision));
    out << ',' << (r.ok ? "ok" : "failed") << ',' << r.failed_step << '\n';
  }
}

// ---------------------------------------------------------------------------
// Exact profiles for plotting

struct ExactRows {
  std::vector<double> x;
  std::vector<double> density;
  std::vector<double> velocity;
};

/// Samples a named exact solution at time t on `grid` uniform points across
/// its support (the heat kernel on |x| <= 8 sqrt(t)).
inline ExactRows exact_profile(const std::string& id, double t, std::size_t grid,
                               std::optional<double> gamma = std::nullopt) {
  if (grid < 2) throw ConfigError("grid needs at least two points");
  ExactRows r;
  auto sample = [&](double a, double b, auto&& rho, auto&& u) {
    const std::vector<double> x = uniform_knots(a, b, grid - 1);
    for (double v : x) {
      r.x.push_back(v);
      r.density.push_back(rho(v));
      r.velocity.push_back(u(v));
    }
  };
  if (id == "barenblatt") {
    if (!(t > 0.0)) throw ConfigError("barenblatt profile requires t > 0");
    const Barenblatt b(gamma.value_or(5.0 / 3.0));
    const double rad = b.support_radius(t);
    sample(-rad, rad, [&](double x) { return b.density(t, x); }, zero_velocity);
  } else if (id == "heat_kernel") {
    if (!(t > 0.0)) throw ConfigError("heat kernel requires t > 0");
    const double l = 8.0 * std::sqrt(t);
    sample(-l, l, [&](double x) { return heat_kernel(t, x); }, zero_velocity);
  } else if (detail::is_riemann_recipe(id)) {
    RiemannData d = id == "shock_shock"         ? riemann_presets::shock_shock()
                    : id == "shock_rarefaction" ? riemann_presets::shock_rarefaction()
                                                : riemann_presets::rarefaction_rarefaction();
    if (gamma) d.gamma = *gamma;
    if (!(t >= 0.0)) throw ConfigError("Riemann profile requires t >= 0");
    const RiemannSolution sol = solve_riemann_intermediate(d);
    if (t > sol.t_max) throw ConfigError("t lies beyond the interaction time of the exact solution");
    const ExactProfile p = t == 0.0 ? riemann_initial_profile(d) : riemann_profile(sol, d, t);
    sample(p.left(), p.right(), [&](double x) { return p.density(x); }, [&](double x) { return p.velocity(x); });
  } else {
    throw ConfigError("unknown profile '" + id + "'");
  }
  return r;
}

inline void write_exact_csv(std::ostream& out, const ExactRows& r, int precision = 17) {
  out << "x,density,velocity\n";
  for (std::size_t i = 0; i < r.x.size(); ++i)
    out << detail::fmt(r.x[i], precision) << ',' << detail::fmt(r.density[i], precision) << ','
        << detail::fmt(r.velocity[i], precision) << '\n';
}

}  // namespace vps

#endif  // VPS_EXPERIMENT_HPP
