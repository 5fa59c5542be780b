#ifndef VPS_SCHEMES_HPP
#define VPS_SCHEMES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vps/error.hpp"
#include "vps/optimizer.hpp"
#include "vps/physics.hpp"
#include "vps/transport1d.hpp"
#include "vps/tridiag.hpp"

namespace vps {

enum class SchemeKind { VPS1, VPS1a, VPS2, DIRK2, PM1, PM2 };

inline std::string to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::VPS1: return "vps1";
    case SchemeKind::VPS1a: return "vps1a";
    case SchemeKind::VPS2: return "vps2";
    case SchemeKind::DIRK2: return "dirk2";
    case SchemeKind::PM1: return "pm1";
    case SchemeKind::PM2: return "pm2";
  }
  return "?";
}

/// Whether the scheme evolves equal-mass particles rather than cells.
inline bool is_particle_scheme(SchemeKind k) {
  return k == SchemeKind::VPS1 || k == SchemeKind::PM1;
}

/// Whether the scheme solves a gradient flow (velocities are not state).
inline bool is_gradient_flow_scheme(SchemeKind k) {
  return k == SchemeKind::PM1 || k == SchemeKind::PM2;
}

namespace alpha_presets {
inline constexpr double backward_euler = 1.0;
inline constexpr double standard = 2.0 / 3.0;
inline constexpr double taylor = 0.5;
}  // namespace alpha_presets

struct SchemeConfig {
  SchemeKind scheme = SchemeKind::VPS1;
  double alpha = alpha_presets::standard;
  double tau = 0.01;
  EnergyModel model = EnergyModel::isothermal();
  TrustRegionConfig optimizer{};
};

inline void validate(const SchemeConfig& c) {
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
  if (!(c.tau > 0.0) || !std::isfinite(c.tau)) throw DomainError("tau must be positive");
  validate(c.optimizer);
}

/// Sum over quadratic terms w_k |z - y_k|^2_M plus the internal energy of the
/// intervals [z_i, z_{i+1}] carrying gap_masses[i]. The metric M is the
/// identity for particles and the hat-function mass matrix for cells.
class TransportObjective {
 public:
  struct Term {
    double weight;
    std::vector<double> target;
  };

  TransportObjective(SymTridiag metric, std::vector<Term> terms, std::vector<double> gap_masses,
                     EnergyModel model)
      : metric_(std::move(metric)),
        terms_(std::move(terms)),
        gap_masses_(std::move(gap_masses)),
        model_(model) {
    const std::size_t n = metric_.size();
    if (gap_masses_.size() + 1 != n) throw DomainError("objective: n points need n-1 gaps");
    weight_ = 0.0;
    for (const auto& t : terms_) {
      if (t.target.size() != n) throw DomainError("objective: target dimension mismatch");
      weight_ += t.weight;
    }
    if (!(weight_ > 0.0)) throw DomainError("objective: net quadratic weight must be positive");
  }

  std::size_t size() const noexcept { return metric_.size(); }
  double net_weight() const noexcept { return weight_; }
  const SymTridiag& metric() const noexcept { return metric_; }

  /// sum_k w_k y_k / sum_k w_k, the minimizer of the quadratic part.
  std::vector<double> combined_target() const {
    std::vector<double> y(size(), 0.0);
    for (const auto& t : terms_)
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += t.weight * t.target[i];
    for (double& v : y) v /= weight_;
    return y;
  }

  /// 2 (sum_k w_k) M.
  SymTridiag quadratic_hessian() const {
    SymTridiag h = metric_;
    for (double& v : h.diag) v *= 2.0 * weight_;
    for (double& v : h.off) v *= 2.0 * weight_;
    return h;
  }

  double quadratic_value(std::span<const double> z) const {
    double s = 0.0;
    std::vector<double> r(size());
    for (const auto& t : terms_) {
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = z[i] - t.target[i];
      s += t.weight * std::max(metric_.quadratic_form(r), 0.0);
    }
    return s;
  }

  double internal_value(std::span<const double> z) const {
    double s = 0.0;
    for (std::size_t i = 0; i < gap_masses_.size(); ++i) {
      const double g = z[i + 1] - z[i];
      if (!(g > 0.0) && gap_masses_[i] > 0.0) return std::numeric_limits<double>::infinity();
      s += model_.cell_energy(gap_masses_[i], g);
    }
    return s;
  }

  double value(std::span<const double> z) const {
    const double e = internal_value(z);
    if (!std::isfinite(e)) return e;
    return quadratic_value(z) + e;
  }

  Evaluation evaluate(std::span<const double> z) const {
    const std::size_t n = size();
    Evaluation ev;
    ev.value = value(z);
    if (!std::isfinite(ev.value)) throw InfeasibleError("objective evaluated at a non-increasing point");
    const std::vector<double> w = weighted_residual(z);
    ev.gradient = metric_.multiply(w);
    for (double& v : ev.gradient) v *= 2.0;
    ev.hessian = quadratic_hessian();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double m = gap_masses_[i];
      const double g = z[i + 1] - z[i];
      const double d1 = model_.cell_energy_d1(m, g);
      const double d2 = model_.cell_energy_d2(m, g);
      ev.gradient[i] -= d1;
      ev.gradient[i + 1] += d1;
      ev.hessian.diag[i] += d2;
      ev.hessian.diag[i + 1] += d2;
      ev.hessian.off[i] -= d2;
    }
    return ev;
  }

  /// F(z + p) - F(z), formed term by term.
  double change(std::span<const double> z, std::span<const double> p) const {
    double e = 0.0;
    for (std::size_t i = 0; i < gap_masses_.size(); ++i) {
      const double de = model_.cell_energy_change(gap_masses_[i], z[i + 1] - z[i], p[i + 1] - p[i]);
      if (!std::isfinite(de)) return std::numeric_limits<double>::infinity();
      e += de;
    }
    const std::vector<double> w = weighted_residual(z);
    return 2.0 * metric_.bilinear_form(p, w) + weight_ * metric_.quadratic_form(p) + e;
  }

 private:
  std::vector<double> weighted_residual(std::span<const double> z) const {
    std::vector<double> w(size(), 0.0);
    for (const auto& t : terms_)
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += t.weight * (z[i] - t.target[i]);
    return w;
  }

  SymTridiag metric_;
  std::vector<Term> terms_;
  std::vector<double> gap_masses_;
  EnergyModel model_;
  double weight_ = 0.0;
};

/// Particle objective: sum (m/(2 alpha tau^2)) |z_i - xhat_i|^2 + internal energy.
inline TransportObjective objective_vps1(std::span<const double> xhat, double tau, double alpha,
                                         double m, const EnergyModel& model) {
  const std::size_t n = xhat.size();
  const double c = m / (2.0 * alpha * tau * tau);
  return TransportObjective(SymTridiag::identity(n),
                            {{c, std::vector<double>(xhat.begin(), xhat.end())}},
                            std::vector<double>(n > 0 ? n - 1 : 0, m), model);
}

/// Gradient-flow particle objective: sum (m/(2 tau)) |z_i - x_i|^2 + internal energy.
inline TransportObjective objective_pm1(std::span<const double> x, double tau, double m,
                                        const EnergyModel& model) {
  const std::size_t n = x.size();
  return TransportObjective(SymTridiag::identity(n),
                            {{m / (2.0 * tau), std::vector<double>(x.begin(), x.end())}},
                            std::vector<double>(n > 0 ? n - 1 : 0, m), model);
}

/// Cell objective with quadratic weights 3/(2 tau^2) on X' and -3/(8 tau^2) on
/// X''; on the first step a single weight 1/(2 alpha tau^2) on X'.
inline TransportObjective objective_vps2(std::span<const double> xprime,
                                         std::span<const double> xdoubleprime, double tau,
                                         std::span<const double> masses, const EnergyModel& model,
                                         bool first_step, double alpha = alpha_presets::standard) {
  std::vector<TransportObjective::Term> terms;
  const double t2 = tau * tau;
  if (first_step) {
    terms.push_back({1.0 / (2.0 * alpha * t2), {xprime.begin(), xprime.end()}});
  } else {
    terms.push_back({3.0 / (2.0 * t2), {xprime.begin(), xprime.end()}});
    terms.push_back({-3.0 / (8.0 * t2), {xdoubleprime.begin(), xdoubleprime.end()}});
  }
  return TransportObjective(mass_matrix(masses), std::move(terms),
                            std::vector<double>(masses.begin(), masses.end()), model);
}

/// BDF2 gradient-flow objective (1/tau)|Z-X^n|^2 - (1/(4 tau))|Z-X^{n-1}|^2,
/// or (1/(2 tau))|Z-X^n|^2 on the first step.
inline TransportObjective objective_pm2(std::span<const double> xn, std::span<const double> xprev,
                                        double tau, std::span<const double> masses,
                                        const EnergyModel& model, bool first_step) {
  std::vector<TransportObjective::Term> terms;
  if (first_step) {
    terms.push_back({1.0 / (2.0 * tau), {xn.begin(), xn.end()}});
  } else {
    terms.push_back({1.0 / tau, {xn.begin(), xn.end()}});
    terms.push_back({-1.0 / (4.0 * tau), {xprev.begin(), xprev.end()}});
  }
  return TransportObjective(mass_matrix(masses), std::move(terms),
                            std::vector<double>(masses.begin(), masses.end()), model);
}

/// Second DIRK stage: (12/tau^2)|Z-Y1|^2 - (15/(2 tau^2))|Z-Y2|^2.
inline TransportObjective objective_dirk2_stage2(std::span<const double> y1,
                                                 std::span<const double> y2, double tau,
                                                 std::span<const double> masses,
                                                 const EnergyModel& model) {
  const double t2 = tau * tau;
  std::vector<TransportObjective::Term> terms;
  terms.push_back({12.0 / t2, {y1.begin(), y1.end()}});
  terms.push_back({-15.0 / (2.0 * t2), {y2.begin(), y2.end()}});
  return TransportObjective(mass_matrix(masses), std::move(terms),
                            std::vector<double>(masses.begin(), masses.end()), model);
}

// Velocity updates, written so they can be exercised with any force law.

/// u = u' + (1/(alpha tau)) (x - x').
inline std::vector<double> first_order_velocity(std::span<const double> uprime,
                                                std::span<const double> x,
                                                std::span<const double> xprime, double tau,
                                                double alpha) {
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = uprime[i] + (x[i] - xprime[i]) / (alpha * tau);
  return u;
}

/// u = 2u' - u'' + (2/tau)(x - x') - (1/(2 tau))(x - x'').
inline std::vector<double> bdf2_velocity(std::span<const double> uprime,
                                         std::span<const double> udoubleprime,
                                         std::span<const double> x,
                                         std::span<const double> xprime,
                                         std::span<const double> xdoubleprime, double tau) {
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = 2.0 * uprime[i] - udoubleprime[i] + (2.0 / tau) * (x[i] - xprime[i]) -
           (x[i] - xdoubleprime[i]) / (2.0 * tau);
  return u;
}

/// V = 6u'_1 - 5u'_2 + (8/tau)(x - x'_1) - (5/tau)(x - x'_2).
inline std::vector<double> dirk2_velocity(std::span<const double> u1, std::span<const double> u2,
                                          std::span<const double> x, std::span<const double> x1,
                                          std::span<const double> x2, double tau) {
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = 6.0 * u1[i] - 5.0 * u2[i] + (8.0 / tau) * (x[i] - x1[i]) - (5.0 / tau) * (x[i] - x2[i]);
  return v;
}

/// Knot positions after moving by dt * v, sorting, redistributing the cell
/// masses and projecting back onto the fixed masses. Mirrors free transport
/// followed by the dissipative projection.
struct TransportedKnots {
  std::vector<double> knots;
  std::vector<double> velocity;  // (knots - origin) / dt
};

inline TransportedKnots transport_and_project(std::span<const double> x,
                                              std::span<const double> v, double dt,
                                              std::span<const double> masses) {
  const std::size_t n = x.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + dt * v[i];
  TransportedKnots out;
  out.knots = project_fixed_masses(push_forward(masses, y), masses);
  out.velocity.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.velocity[i] = (out.knots[i] - x[i]) / dt;
  return out;
}

inline double half_min_gap(std::span<const double> x) {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < x.size(); ++i) g = std::min(g, x[i + 1] - x[i]);
  return 0.5 * g;
}

/// Minimizer started from the spread combined target.
inline std::vector<double> minimize_from_target(const TransportObjective& f, double dmin,
                                                const TrustRegionConfig& cfg,
                                                MinimizeStats* stats) {
  const std::vector<double> z0 = spread_initial_guess(f.combined_target(), dmin);
  MinimizeResult r = minimize(f, z0, cfg);
  if (stats) *stats = std::move(r.stats);
  return std::move(r.z);
}

/// One step of the particle scheme: free transport, sort, implicit pressure
/// correction, velocity update.
inline ParticleState vps1_step(const ParticleState& s, const SchemeConfig& cfg,
                               MinimizeStats* stats = nullptr) {
  validate(s);
  validate(cfg);
  const std::size_t n = s.size();
  const double tau = cfg.tau;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = s.positions[i] + tau * s.velocities[i];
  const std::vector<double> xhat = sort_with_permutation(y).sorted;
  std::vector<double> uhat(n);
  for (std::size_t i = 0; i < n; ++i) uhat[i] = (xhat[i] - s.positions[i]) / tau;

  const TransportObjective f = objective_vps1(xhat, tau, cfg.alpha, s.particle_mass, cfg.model);
  ParticleState out;
  out.positions = minimize_from_target(f, half_min_gap(s.positions), cfg.optimizer, stats);
  out.velocities = first_order_velocity(uhat, out.positions, xhat, tau, cfg.alpha);
  out.particle_mass = s.particle_mass;
  out.time = s.time + tau;
  return out;
}

/// One JKO step for the particle gradient flow. Output velocities hold the
/// discrete displacement rate (x^{n+1} - x^n)/tau.
inline ParticleState pm1_step(const ParticleState& s, const SchemeConfig& cfg,
                              MinimizeStats* stats = nullptr) {
  validate(s);
  validate(cfg);
  const TransportObjective f = objective_pm1(s.positions, cfg.tau, s.particle_mass, cfg.model);
  ParticleState out;
  out.positions = minimize_from_target(f, half_min_gap(s.positions), cfg.optimizer, stats);
  out.velocities.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    out.velocities[i] = (out.positions[i] - s.positions[i]) / cfg.tau;
  out.particle_mass = s.particle_mass;
  out.time = s.time + cfg.tau;
  return out;
}

/// Two consecutive cell states; previous is empty before the first step.
struct Bdf2History {
  std::optional<CellState> previous;
  CellState current;

  bool first_step() const noexcept { return !previous.has_value(); }

  void advance(CellState next) {
    previous = std::move(current);
    current = std::move(next);
  }
};

inline void validate(const Bdf2History& h) {
  validate(h.current);
  if (h.previous) {
    validate(*h.previous);
    if (h.previous->masses != h.current.masses)
      throw DomainError("history states must carry identical cell masses");
  }
}

namespace detail {

inline CellState make_cell_state(std::vector<double> knots, const std::vector<double>& masses,
                                 std::vector<double> velocities, double time) {
  CellState c;
  c.knots = std::move(knots);
  c.masses = masses;
  c.velocities = std::move(velocities);
  c.time = time;
  return c;
}

inline CellState first_order_cell_step(const CellState& s, double tau, double alpha,
                                       const SchemeConfig& cfg, MinimizeStats* stats) {
  const TransportedKnots xp = transport_and_project(s.knots, s.velocities, tau, s.masses);
  const TransportObjective f = objective_vps2(xp.knots, xp.knots, tau, s.masses, cfg.model, true, alpha);
  std::vector<double> x = minimize_from_target(f, half_min_gap(s.knots), cfg.optimizer, stats);
  std::vector<double> u = first_order_velocity(xp.velocity, x, xp.knots, tau, alpha);
  return make_cell_state(std::move(x), s.masses, std::move(u), s.time + tau);
}

}  // namespace detail

/// BDF2 step on cells. The first step falls back to the first-order update.
inline CellState vps2_step(const Bdf2History& h, const SchemeConfig& cfg,
                           MinimizeStats* stats = nullptr) {
  validate(h);
  validate(cfg);
  const CellState& cur = h.current;
  const double tau = cfg.tau;
  if (h.first_step()) return detail::first_order_cell_step(cur, tau, cfg.alpha, cfg, stats);

  const CellState& prev = *h.previous;
  const TransportedKnots x1 = transport_and_project(cur.knots, cur.velocities, tau, cur.masses);
  std::vector<double> v2(cur.knots.size());
  for (std::size_t i = 0; i < v2.size(); ++i)
    v2[i] = (2.0 / 3.0) * cur.velocities[i] + (1.0 / 3.0) * prev.velocities[i];
  const TransportedKnots x2 = transport_and_project(prev.knots, v2, 2.0 * tau, prev.masses);

  const TransportObjective f =
      objective_vps2(x1.knots, x2.knots, tau, cur.masses, cfg.model, false);
  std::vector<double> x = minimize_from_target(f, half_min_gap(cur.knots), cfg.optimizer, stats);
  std::vector<double> u = bdf2_velocity(x1.velocity, x2.velocity, x, x1.knots, x2.knots, tau);
  return detail::make_cell_state(std::move(x), cur.masses, std::move(u), cur.time + tau);
}

/// Cell scheme with the first-order update at every step.
inline CellState vps1a_step(const Bdf2History& h, const SchemeConfig& cfg,
                            MinimizeStats* stats = nullptr) {
  validate(h.current);
  validate(cfg);
  return detail::first_order_cell_step(h.current, cfg.tau, cfg.alpha, cfg, stats);
}

/// BDF2 gradient-flow step on cells; knot velocities hold (X^{n+1} - X^n)/tau.
inline CellState pm2_step(const Bdf2History& h, const SchemeConfig& cfg,
                          MinimizeStats* stats = nullptr) {
  validate(h);
  validate(cfg);
  const CellState& cur = h.current;
  const std::vector<double>& prev = h.first_step() ? cur.knots : h.previous->knots;
  const TransportObjective f =
      objective_pm2(cur.knots, prev, cfg.tau, cur.masses, cfg.model, h.first_step());
  std::vector<double> x = minimize_from_target(f, half_min_gap(cur.knots), cfg.optimizer, stats);
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) u[i] = (x[i] - cur.knots[i]) / cfg.tau;
  return detail::make_cell_state(std::move(x), cur.masses, std::move(u), cur.time + cfg.tau);
}

/// Two-stage diagonally implicit step: a backward-Euler stage of length tau/4
/// followed by the reduced second stage.
inline CellState dirk2_step(const CellState& s, const SchemeConfig& cfg,
                            MinimizeStats* stats = nullptr) {
  validate(s);
  validate(cfg);
  const double tau = cfg.tau;
  MinimizeStats st1;
  const CellState quarter =
      detail::first_order_cell_step(s, 0.25 * tau, alpha_presets::backward_euler, cfg, &st1);

  const TransportedKnots y1 =
      transport_and_project(quarter.knots, quarter.velocities, 0.75 * tau, s.masses);
  std::vector<double> v2(s.knots.size());
  for (std::size_t i = 0; i < v2.size(); ++i)
    v2[i] = (1.0 / 3.0) * s.velocities[i] + (2.0 / 3.0) * quarter.velocities[i];
  const TransportedKnots y2 = transport_and_project(s.knots, v2, tau, s.masses);

  const TransportObjective f = objective_dirk2_stage2(y1.knots, y2.knots, tau, s.masses, cfg.model);
  std::vector<double> x = minimize_from_target(f, half_min_gap(s.knots), cfg.optimizer, stats);
  if (stats) {
    stats->iterations += st1.iterations;
    stats->accepted += st1.accepted;
    stats->lambda_iterations += st1.lambda_iterations;
  }
  std::vector<double> v = dirk2_velocity(y1.velocity, y2.velocity, x, y1.knots, y2.knots, tau);
  return detail::make_cell_state(std::move(x), s.masses, std::move(v), s.time + tau);
}

}  // namespace vps

#endif  // VPS_SCHEMES_HPP
