#ifndef VPS_ORACLES_HPP
#define VPS_ORACLES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "vps/error.hpp"
#include "vps/physics.hpp"
#include "vps/transport1d.hpp"

namespace vps {

// ---------------------------------------------------------------------------
// Special functions

/// Lanczos approximation (g = 7, nine terms), relative error near 1e-15 for
/// positive arguments.
inline double lanczos_gamma(double z) {
  static constexpr std::array<double, 9> c = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (z < 0.5) return std::numbers::pi / (std::sin(std::numbers::pi * z) * lanczos_gamma(1.0 - z));
  z -= 1.0;
  double x = c[0];
  for (std::size_t i = 1; i < c.size(); ++i) x += c[i] / (z + static_cast<double>(i));
  const double t = z + 7.5;
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, z + 0.5) * std::exp(-t) * x;
}

/// Inverse of erfc on (0,2) by Newton's method on log erfc.
inline double erfc_inv(double y) {
  if (!(y > 0.0 && y < 2.0)) throw DomainError("erfc_inv: argument must lie in (0,2)");
  if (y > 1.0) return -erfc_inv(2.0 - y);
  if (y == 1.0) return 0.0;
  const double target = std::log(y);
  double lo = 0.0;
  double hi = 27.0;
  double x = std::sqrt(std::max(-std::log(y) - 0.5 * std::log(-std::log(y) + 1.0), 0.0));
  for (int it = 0; it < 100; ++it) {
    const double e = std::erfc(x);
    const double g = std::log(e) - target;
    if (g > 0.0) lo = x; else hi = x;
    const double dg = -2.0 / std::sqrt(std::numbers::pi) * std::exp(-x * x) / e;
    double next = x - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

/// Smallest s-quantile of a continuous nondecreasing cdf on [a,b] by bisection.
inline double bisect_quantile(const std::function<double(double)>& cdf, double s, double a,
                              double b) {
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    const double mid = 0.5 * (a + b);
    if (cdf(mid) < s) a = mid; else b = mid;
  }
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Self-similar solutions

/// Barenblatt profile of d_t rho = d_xx rho^gamma with unit mass.
class Barenblatt {
 public:
  explicit Barenblatt(double gamma) : gamma_(gamma) {
    if (!(gamma > 1.0)) throw DomainError("Barenblatt profile requires gamma > 1");
    alpha_ = 1.0 / (gamma + 1.0);
    beta_ = alpha_;
    k_ = (gamma - 1.0) / (2.0 * gamma * (gamma + 1.0));
    const double base = std::sqrt((gamma - 1.0) / (2.0 * std::numbers::pi * gamma * (gamma + 1.0))) *
                        lanczos_gamma(1.5 + 1.0 / (gamma - 1.0)) /
                        lanczos_gamma(gamma / (gamma - 1.0));
    c_ = std::pow(base, (gamma - 1.0) / (gamma + 1.0));
  }

  double gamma() const noexcept { return gamma_; }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double k() const noexcept { return k_; }
  double c() const noexcept { return c_; }

  /// Support is [-r, r] with r = C t^beta / sqrt(k).
  double support_radius(double t) const {
    check_time(t);
    return c_ * std::pow(t, beta_) / std::sqrt(k_);
  }

  double density(double t, double x) const {
    check_time(t);
    const double v = c_ * c_ - k_ * std::pow(t, -2.0 * beta_) * x * x;
    if (v <= 0.0) return 0.0;
    return std::pow(t, -alpha_) * std::pow(v, 1.0 / (gamma_ - 1.0));
  }

  /// Mass to the left of x, via the incomplete beta function.
  double cdf(double t, double x) const {
    const double r = support_radius(t);
    if (x <= -r) return 0.0;
    if (x >= r) return 1.0;
    const double w = x / r;
    const double n = 1.0 / (gamma_ - 1.0);
    // integral_0^w (1-v^2)^n dv = B(w^2; 1/2, n+1) / 2, normalized by its value at w = 1
    const double half = 0.5 * boost::math::ibeta(0.5, n + 1.0, w * w);
    return w >= 0.0 ? 0.5 + half : 0.5 - half;
  }

  /// integral of x rho(t,x) over [a,b].
  double first_moment(double t, double a, double b) const {
    const double r = support_radius(t);
    a = std::clamp(a, -r, r);
    b = std::clamp(b, -r, r);
    const double n = 1.0 / (gamma_ - 1.0);
    const double kt = k_ * std::pow(t, -2.0 * beta_);
    auto prim = [&](double x) {
      const double v = std::max(c_ * c_ - kt * x * x, 0.0);
      return -std::pow(t, -alpha_) * std::pow(v, n + 1.0) / (2.0 * kt * (n + 1.0));
    };
    return prim(b) - prim(a);
  }

 private:
  static void check_time(double t) {
    if (!(t > 0.0)) throw DomainError("Barenblatt profile requires t > 0");
  }

  double gamma_;
  double alpha_;
  double beta_;
  double k_;
  double c_;
};

inline double barenblatt(double t, double x, double gamma) { return Barenblatt(gamma).density(t, x); }

inline double heat_kernel(double t, double x) {
  if (!(t > 0.0)) throw DomainError("heat kernel requires t > 0");
  return std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * std::numbers::pi * t);
}

inline double heat_kernel_cdf(double t, double x) {
  if (!(t > 0.0)) throw DomainError("heat kernel requires t > 0");
  return 0.5 * std::erfc(-x / (2.0 * std::sqrt(t)));
}

// ---------------------------------------------------------------------------
// Piecewise exact profiles

/// On [a,b]: density (A + Bx)^p with A + Bx >= 0, velocity uc + ub x.
/// Constant states use B = 0 and A = rho^(1/p).
struct ProfilePiece {
  double a;
  double b;
  double A;
  double B;
  double uc;
  double ub;
};

class ExactProfile {
 public:
  ExactProfile(double p, std::vector<ProfilePiece> pieces) : p_(p), pieces_(std::move(pieces)) {
    if (!(p > 0.0)) throw DomainError("profile exponent must be positive");
    for (const auto& pc : pieces_)
      if (!(pc.a <= pc.b)) throw DomainError("profile pieces must have a <= b");
    for (std::size_t i = 0; i + 1 < pieces_.size(); ++i)
      if (pieces_[i].b > pieces_[i + 1].a + 1e-14 * (1.0 + std::abs(pieces_[i].b)))
        throw DomainError("profile pieces must be ordered");
    nodes_.assign(pieces_.size() + 1, 0.0);
    for (std::size_t i = 0; i < pieces_.size(); ++i) nodes_[i + 1] = nodes_[i] + piece_mass(i);
  }

  double exponent() const noexcept { return p_; }
  const std::vector<ProfilePiece>& pieces() const noexcept { return pieces_; }
  /// Cumulative masses at the piece boundaries.
  const std::vector<double>& mass_nodes() const noexcept { return nodes_; }
  double total_mass() const noexcept { return nodes_.back(); }
  double left() const { return pieces_.front().a; }
  double right() const { return pieces_.back().b; }

  double piece_density(std::size_t i, double x) const {
    const auto& pc = pieces_[i];
    return std::pow(std::max(pc.A + pc.B * x, 0.0), p_);
  }

  double piece_velocity(std::size_t i, double x) const { return pieces_[i].uc + pieces_[i].ub * x; }

  double density(double x) const {
    const auto i = locate(x);
    return i ? piece_density(*i, x) : 0.0;
  }

  double velocity(double x) const {
    const auto i = locate(x);
    return i ? piece_velocity(*i, x) : 0.0;
  }

  double piece_mass(std::size_t i) const { return piece_mass_between(i, pieces_[i].a, pieces_[i].b); }

  /// Position x in piece i with mass mu between pc.a and x.
  double piece_quantile(std::size_t i, double mu) const {
    const auto& pc = pieces_[i];
    if (pc.b == pc.a) return pc.a;
    if (pc.B == 0.0) {
      const double rho = std::pow(pc.A, p_);
      return std::clamp(pc.a + mu / rho, pc.a, pc.b);
    }
    const double q = p_ + 1.0;
    const double w = std::pow(std::max(pc.A + pc.B * pc.a, 0.0), q) + mu * pc.B * q;
    const double x = (std::pow(std::max(w, 0.0), 1.0 / q) - pc.A) / pc.B;
    return std::clamp(x, pc.a, pc.b);
  }

  /// Inverse distribution function, s in [0, total_mass].
  double inverse_cdf(double s) const {
    if (s <= 0.0) return left();
    if (s >= nodes_.back()) return right();
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
    return piece_quantile(i, s - nodes_[i]);
  }

  /// Total energy: integral of rho u^2 / 2 + U(rho).
  double energy(const EnergyModel& model) const {
    double e = 0.0;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const auto& pc = pieces_[i];
      if (pc.b <= pc.a) continue;
      auto f = [&](double x) {
        const double rho = piece_density(i, x);
        const double u = piece_velocity(i, x);
        return 0.5 * rho * u * u + model.energy(rho);
      };
      if (pc.B == 0.0 && pc.ub == 0.0) {
        e += (pc.b - pc.a) * f(pc.a);
      } else {
        e += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, pc.a, pc.b, 15, 1e-14);
      }
    }
    return e;
  }

 private:
  double piece_mass_between(std::size_t i, double x0, double x1) const {
    const auto& pc = pieces_[i];
    if (x1 <= x0) return 0.0;
    if (pc.B == 0.0) return std::pow(pc.A, p_) * (x1 - x0);
    const double q = p_ + 1.0;
    return (std::pow(std::max(pc.A + pc.B * x1, 0.0), q) - std::pow(std::max(pc.A + pc.B * x0, 0.0), q)) /
           (pc.B * q);
  }

  std::optional<std::size_t> locate(double x) const {
    for (std::size_t i = 0; i < pieces_.size(); ++i)
      if (x >= pieces_[i].a && x < pieces_[i].b) return i;
    return std::nullopt;
  }

  double p_;
  std::vector<ProfilePiece> pieces_;
  std::vector<double> nodes_;
};

// ---------------------------------------------------------------------------
// Riemann problems for the polytropic gas with kappa = theta^2/gamma

/// A block [x_l, x_r] of gas with a single discontinuity at 0 and vacuum
/// outside.
struct RiemannData {
  double x_l = -1.0;
  double x_r = 1.0;
  double rho_l = 1.0;
  double rho_r = 1.0;
  double u_l = 0.0;
  double u_r = 0.0;
  double gamma = 5.0 / 3.0;

  double theta() const noexcept { return 0.5 * (gamma - 1.0); }
};

inline void validate(const RiemannData& d) {
  if (!(d.rho_l > 0.0 && d.rho_r > 0.0)) throw DomainError("Riemann data needs positive densities");
  if (!(d.x_l < 0.0 && 0.0 < d.x_r)) throw DomainError("Riemann data needs x_l < 0 < x_r");
  if (!(d.gamma > 1.0)) throw DomainError("Riemann data needs gamma > 1");
}

enum class WavePattern { ShockShock, ShockRarefaction, RarefactionRarefaction };

struct RiemannSolution {
  WavePattern pattern = WavePattern::ShockShock;
  bool left_shock = false;
  bool right_shock = false;
  double rho_m = 0.0;
  double u_m = 0.0;
  double s_l = std::numeric_limits<double>::quiet_NaN();  // NaN unless the 1-wave is a shock
  double s_r = std::numeric_limits<double>::quiet_NaN();  // NaN unless the 2-wave is a shock
  double t_max = 0.0;
};

/// Velocity change along a wave curve from density rho_k to rho:
/// shock branch for rho > rho_k, rarefaction branch otherwise.
inline double wave_curve_jump(double rho, double rho_k, const EnergyModel& model) {
  if (rho > rho_k) {
    const double dp = model.pressure(rho) - model.pressure(rho_k);
    return std::sqrt(dp * (rho - rho_k) / (rho * rho_k));
  }
  const double th = model.theta();
  return std::pow(rho, th) - std::pow(rho_k, th);
}

namespace detail {

struct Boundary {
  double c;  // position at t = 0
  double d;  // speed
};

inline std::vector<Boundary> wave_boundaries(const RiemannSolution& s, const RiemannData& d) {
  const double th = d.theta();
  const double al = std::pow(d.rho_l, th);
  const double ar = std::pow(d.rho_r, th);
  const double am = std::pow(s.rho_m, th);
  std::vector<Boundary> b;
  b.push_back({d.x_l, d.u_l - al});
  b.push_back({d.x_l, d.u_l + th * al});
  if (s.left_shock) {
    b.push_back({0.0, s.s_l});
  } else {
    b.push_back({0.0, d.u_l - th * al});
    b.push_back({0.0, s.u_m - th * am});
  }
  if (s.right_shock) {
    b.push_back({0.0, s.s_r});
  } else {
    b.push_back({0.0, s.u_m + th * am});
    b.push_back({0.0, d.u_r + th * ar});
  }
  b.push_back({d.x_r, d.u_r - th * ar});
  b.push_back({d.x_r, d.u_r + ar});
  return b;
}

}  // namespace detail

/// Intermediate state of the central Riemann problem, with shock speeds from
/// mass balance and the time before adjacent waves interact.
inline RiemannSolution solve_riemann_intermediate(const RiemannData& d) {
  validate(d);
  const EnergyModel model = EnergyModel::polytropic(d.gamma);
  const double th = d.theta();
  if (d.u_l + std::pow(d.rho_l, th) <= d.u_r - std::pow(d.rho_r, th))
    throw DomainError("Riemann data forms a vacuum: unsupported pattern");

  auto residual = [&](double rho) {
    return wave_curve_jump(rho, d.rho_l, model) + wave_curve_jump(rho, d.rho_r, model) + d.u_r - d.u_l;
  };
  double lo = 0.0;
  double hi = std::max(d.rho_l, d.rho_r);
  while (residual(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 400 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (residual(mid) < 0.0) lo = mid; else hi = mid;
  }
  RiemannSolution s;
  s.rho_m = 0.5 * (lo + hi);
  const double ul = d.u_l - wave_curve_jump(s.rho_m, d.rho_l, model);
  const double ur = d.u_r + wave_curve_jump(s.rho_m, d.rho_r, model);
  s.u_m = 0.5 * (ul + ur);
  s.left_shock = s.rho_m > d.rho_l;
  s.right_shock = s.rho_m > d.rho_r;
  if (s.left_shock) s.s_l = (s.rho_m * s.u_m - d.rho_l * d.u_l) / (s.rho_m - d.rho_l);
  if (s.right_shock) s.s_r = (s.rho_m * s.u_m - d.rho_r * d.u_r) / (s.rho_m - d.rho_r);
  if (s.left_shock && s.right_shock)
    s.pattern = WavePattern::ShockShock;
  else if (s.left_shock || s.right_shock)
    s.pattern = WavePattern::ShockRarefaction;
  else
    s.pattern = WavePattern::RarefactionRarefaction;

  const auto b = detail::wave_boundaries(s, d);
  s.t_max = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    const double dc = b[i + 1].c - b[i].c;
    const double dd = b[i + 1].d - b[i].d;
    if (dd < 0.0 && dc > 0.0) s.t_max = std::min(s.t_max, -dc / dd);
  }
  return s;
}

/// Exact density and velocity at time 0 < t <= t_max as profile pieces.
inline ExactProfile riemann_profile(const RiemannSolution& s, const RiemannData& d, double t) {
  if (!(t > 0.0)) throw DomainError("Riemann profile requires t > 0");
  if (t > s.t_max) throw DomainError("Riemann profile requested beyond the interaction time");
  const double th = d.theta();
  const double p = 1.0 / th;
  const double al = std::pow(d.rho_l, th);
  const double ar = std::pow(d.rho_r, th);
  const double am = std::pow(s.rho_m, th);
  const double k = 1.0 / ((1.0 + th) * t);
  std::vector<ProfilePiece> pcs;

  auto at = [&](double c, double v) { return c + t * v; };
  const double x1 = at(d.x_l, d.u_l - al);
  const double x2 = at(d.x_l, d.u_l + th * al);
  // left vacuum fan: rho^theta = ((x - x_l)/t - u_l + al) / (1 + theta), u = u_l - al + rho^theta
  {
    const double A = (-d.x_l / t - d.u_l + al) / (1.0 + th);
    pcs.push_back({x1, x2, A, k, d.u_l - al + A, k});
  }
  double cursor = x2;
  if (s.left_shock) {
    const double xs = t * s.s_l;
    pcs.push_back({cursor, xs, al, 0.0, d.u_l, 0.0});
    cursor = xs;
  } else {
    const double x3 = t * (d.u_l - th * al);
    const double x4 = t * (s.u_m - th * am);
    pcs.push_back({cursor, x3, al, 0.0, d.u_l, 0.0});
    // centred 1-fan: rho^theta = (u_l + al - x/t) / (1 + theta), u = u_l + al - rho^theta
    const double A = (d.u_l + al) / (1.0 + th);
    pcs.push_back({x3, x4, A, -k, d.u_l + al - A, k});
    cursor = x4;
  }
  if (s.right_shock) {
    const double xs = t * s.s_r;
    pcs.push_back({cursor, xs, am, 0.0, s.u_m, 0.0});
    cursor = xs;
  } else {
    const double x5 = t * (s.u_m + th * am);
    const double x6 = t * (d.u_r + th * ar);
    pcs.push_back({cursor, x5, am, 0.0, s.u_m, 0.0});
    // centred 2-fan: rho^theta = (x/t - u_r + ar) / (1 + theta), u = u_r - ar + rho^theta
    const double A = (-d.u_r + ar) / (1.0 + th);
    pcs.push_back({x5, x6, A, k, d.u_r - ar + A, k});
    cursor = x6;
  }
  const double x5 = at(d.x_r, d.u_r - th * ar);
  const double x6 = at(d.x_r, d.u_r + ar);
  pcs.push_back({cursor, x5, ar, 0.0, d.u_r, 0.0});
  // right vacuum fan: rho^theta = (u_r + ar - (x - x_r)/t) / (1 + theta), u = u_r + ar - rho^theta
  {
    const double A = (d.u_r + ar + d.x_r / t) / (1.0 + th);
    pcs.push_back({x5, x6, A, -k, d.u_r + ar - A, k});
  }
  // At t = t_max adjacent boundaries meet; keep rounding from reversing them.
  for (std::size_t i = 0; i < pcs.size(); ++i) {
    if (i > 0) pcs[i].a = std::max(pcs[i].a, pcs[i - 1].b);
    pcs[i].b = std::max(pcs[i].b, pcs[i].a);
  }
  return ExactProfile(p, std::move(pcs));
}

inline double riemann_density(const RiemannSolution& s, const RiemannData& d, double t, double x) {
  return riemann_profile(s, d, t).density(x);
}

inline double riemann_velocity(const RiemannSolution& s, const RiemannData& d, double t, double x) {
  return riemann_profile(s, d, t).velocity(x);
}

namespace riemann_presets {
inline RiemannData shock_shock() { return {-2.0, 2.0, 0.25, 0.25, 1.0, 0.0, 5.0 / 3.0}; }
inline RiemannData shock_rarefaction() { return {-1.0, 2.0, 0.5, 0.25, 0.0, 0.0, 5.0 / 3.0}; }
inline RiemannData rarefaction_rarefaction() { return {-2.0, 2.0, 0.25, 0.25, -0.5, 0.5, 5.0 / 3.0}; }
}  // namespace riemann_presets

/// Piecewise-constant initial profile of the Riemann block, u constant per side.
inline ExactProfile riemann_initial_profile(const RiemannData& d) {
  const double th = d.theta();
  return ExactProfile(1.0 / th, {{d.x_l, 0.0, std::pow(d.rho_l, th), 0.0, d.u_l, 0.0},
                                 {0.0, d.x_r, std::pow(d.rho_r, th), 0.0, d.u_r, 0.0}});
}

// ---------------------------------------------------------------------------
// Initial data

/// Normalized weight f(x) = int_0^x sqrt(1-y^2) dy / int_0^1 sqrt(1-y^2) dy.
inline double knot_weight(double x) {
  if (!(x >= -1.0 && x <= 1.0)) throw DomainError("knot_weight: argument must lie in [-1,1]");
  return (x * std::sqrt(1.0 - x * x) + std::asin(x)) / (0.5 * std::numbers::pi);
}

/// Equal-mass particles at the quantile midpoints (i - 1/2)/N.
inline ParticleState particles_from_quantiles(std::size_t n, const std::function<double(double)>& quantile,
                                              const std::function<double(double)>& velocity) {
  if (n < 2) throw DomainError("need at least two particles");
  ParticleState s;
  s.particle_mass = 1.0 / static_cast<double>(n);
  s.positions.resize(n);
  s.velocities.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.positions[i] = quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    s.velocities[i] = velocity(s.positions[i]);
  }
  return s;
}

/// Cells with given knots and masses; velocities sampled at the knots.
inline CellState make_cells(std::vector<double> knots, std::vector<double> masses,
                            const std::function<double(double)>& velocity) {
  CellState c;
  c.knots = std::move(knots);
  c.masses = std::move(masses);
  c.velocities.resize(c.knots.size());
  for (std::size_t i = 0; i < c.knots.size(); ++i) c.velocities[i] = velocity(c.knots[i]);
  validate(c);
  return c;
}

inline std::vector<double> uniform_knots(double a, double b, std::size_t n) {
  std::vector<double> x(n + 1);
  for (std::size_t i = 0; i <= n; ++i)
    x[i] = a + (b - a) * (static_cast<double>(i) / static_cast<double>(n));
  x[n] = b;
  return x;
}

inline std::vector<double> masses_from_cdf(std::span<const double> knots,
                                           const std::function<double(double)>& cdf) {
  std::vector<double> m(knots.size() - 1);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) m[i] = cdf(knots[i + 1]) - cdf(knots[i]);
  return m;
}

inline double zero_velocity(double) { return 0.0; }

/// Block of height 50 on (-0.01, 0.01).
inline ParticleState dirac_block_particles(std::size_t n) {
  return particles_from_quantiles(n, [](double s) { return -0.01 + 0.02 * s; }, zero_velocity);
}

inline CellState dirac_block_cells(std::size_t n) {
  return make_cells(uniform_knots(-0.01, 0.01, n), std::vector<double>(n, 1.0 / static_cast<double>(n)),
                    zero_velocity);
}

/// Density 0.5 on (-1,0) and 0.25 on (0,2).
inline ParticleState asymmetric_block_particles(std::size_t n) {
  return particles_from_quantiles(
      n, [](double s) { return s <= 0.5 ? -1.0 + 2.0 * s : 4.0 * (s - 0.5); }, zero_velocity);
}

/// Barenblatt profile at time t: equal-mass intervals, particles at their
/// centers of mass.
inline ParticleState barenblatt_particles(std::size_t n, double gamma, double t) {
  if (n < 2) throw DomainError("need at least two particles");
  const Barenblatt b(gamma);
  const double r = b.support_radius(t);
  auto cdf = [&](double x) { return b.cdf(t, x); };
  std::vector<double> edges(n + 1);
  edges[0] = -r;
  edges[n] = r;
  for (std::size_t i = 1; i < n; ++i)
    edges[i] = bisect_quantile(cdf, static_cast<double>(i) / static_cast<double>(n), -r, r);
  ParticleState s;
  s.particle_mass = 1.0 / static_cast<double>(n);
  s.positions.resize(n);
  s.velocities.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = cdf(edges[i + 1]) - cdf(edges[i]);
    s.positions[i] = b.first_moment(t, edges[i], edges[i + 1]) / m;
  }
  return s;
}

enum class KnotPlacement { Uniform, Weighted };

/// Barenblatt profile at time t on knots spanning its support; each cell
/// carries the exact mass of the profile over it.
inline CellState barenblatt_cells(std::size_t n, double gamma, double t,
                                  KnotPlacement placement = KnotPlacement::Uniform) {
  const Barenblatt b(gamma);
  const double r = b.support_radius(t);
  std::vector<double> x = uniform_knots(-r, r, n);
  if (placement == KnotPlacement::Weighted)
    for (std::size_t i = 0; i <= n; ++i)
      x[i] = knot_weight(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n)) * r;
  x.front() = -r;
  x.back() = r;
  std::vector<double> m = masses_from_cdf(x, [&](double y) { return b.cdf(t, y); });
  return make_cells(std::move(x), std::move(m), zero_velocity);
}

/// Heat kernel at time one: masses proportional to q(i/(N+1)) q(1 - i/(N+1)),
/// q(x) = 10x^2 + x/10, interior knots at the exact quantiles, end knots
/// extrapolated linearly.
inline CellState heat_kernel_cells(std::size_t n) {
  if (n < 3) throw DomainError("heat kernel cells need N >= 3");
  auto q = [](double x) { return 10.0 * x * x + x / 10.0; };
  std::vector<double> m(n);
  KahanSum total;
  for (std::size_t i = 1; i <= n; ++i) {
    const double y = static_cast<double>(i) / static_cast<double>(n + 1);
    m[i - 1] = q(y) * q(1.0 - y);
    total.add(m[i - 1]);
  }
  for (double& v : m) v /= total.value();
  const std::vector<double> s = mass_nodes(m);
  std::vector<double> x(n + 1);
  for (std::size_t i = 1; i < n; ++i) x[i] = -2.0 * erfc_inv(2.0 * s[i]);
  x[0] = 3.0 * x[1] - 2.0 * x[2];
  x[n] = 3.0 * x[n - 1] - 2.0 * x[n - 2];
  return make_cells(std::move(x), std::move(m), zero_velocity);
}

/// Velocity of piecewise-constant Riemann data sampled at a knot: one-sided
/// value inside each block, mean of both at the discontinuity.
inline double riemann_data_velocity(const RiemannData& d, double x) {
  if (x < 0.0) return d.u_l;
  if (x > 0.0) return d.u_r;
  return 0.5 * (d.u_l + d.u_r);
}

inline ParticleState riemann_particles(const RiemannData& d, std::size_t n) {
  validate(d);
  const ExactProfile p = riemann_initial_profile(d);
  if (std::abs(p.total_mass() - 1.0) > 1e-12) throw DomainError("Riemann data must have unit mass");
  return particles_from_quantiles(
      n, [&](double s) { return p.inverse_cdf(s); }, [&](double x) { return riemann_data_velocity(d, x); });
}

/// Riemann block on cells with masses 6 int_{(i-1)/N}^{i/N} y(1-y) dy, which
/// refine towards both vacuum boundaries; knots at the exact quantiles.
inline CellState riemann_cells(const RiemannData& d, std::size_t n) {
  validate(d);
  const ExactProfile p = riemann_initial_profile(d);
  if (std::abs(p.total_mass() - 1.0) > 1e-12) throw DomainError("Riemann data must have unit mass");
  std::vector<double> s(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double y = static_cast<double>(i) / static_cast<double>(n);
    s[i] = y * y * (3.0 - 2.0 * y);
  }
  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = s[i + 1] - s[i];
  // Knots are classified by mass, so a knot at the discontinuity gets x = 0
  // and the mean velocity even when the quantile rounds to either side.
  const double s_jump = p.piece_mass(0) / p.total_mass();
  const double eps = 4.0 * std::numeric_limits<double>::epsilon();
  std::vector<double> x(n + 1);
  std::vector<double> u(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    if (std::abs(s[i] - s_jump) <= eps) {
      x[i] = 0.0;
      u[i] = riemann_data_velocity(d, 0.0);
    } else {
      x[i] = p.inverse_cdf(s[i]);
      u[i] = s[i] < s_jump ? d.u_l : d.u_r;
    }
  }
  x.front() = d.x_l;
  x.back() = d.x_r;
  CellState c = make_cells(std::move(x), std::move(m), zero_velocity);
  c.velocities = std::move(u);
  return c;
}

/// (3/8)(1 - x^2/4) on [-2,2] and its distribution function.
inline double parabolic_density(double x) { return std::abs(x) >= 2.0 ? 0.0 : 0.375 * (1.0 - 0.25 * x * x); }
inline double parabolic_cdf(double x) {
  x = std::clamp(x, -2.0, 2.0);
  return 0.375 * ((x + 2.0) - (x * x * x + 8.0) / 12.0);
}

inline ParticleState parabolic_particles(std::size_t n) {
  return particles_from_quantiles(
      n, [](double s) { return bisect_quantile(parabolic_cdf, s, -2.0, 2.0); }, zero_velocity);
}

inline CellState parabolic_cells(std::size_t n, KnotPlacement placement = KnotPlacement::Uniform) {
  std::vector<double> x = uniform_knots(-2.0, 2.0, n);
  if (placement == KnotPlacement::Weighted)
    for (std::size_t i = 0; i <= n; ++i)
      x[i] = 2.0 * knot_weight(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n));
  x.front() = -2.0;
  x.back() = 2.0;
  std::vector<double> m = masses_from_cdf(x, parabolic_cdf);
  return make_cells(std::move(x), std::move(m), zero_velocity);
}

}  // namespace vps

#endif  // VPS_ORACLES_HPP
