#ifndef VPS_PHYSICS_HPP
#define VPS_PHYSICS_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "vps/error.hpp"

namespace vps {

enum class EnergyKind {
  Polytropic,   // U = kappa rho^gamma / (gamma - 1)
  Isothermal,   // U = rho log rho
  Pressureless  // U = 0, test hook for free transport
};

/// Internal-energy law U(rho) together with its derivatives and the pressure
/// P = U'(rho) rho - U(rho).
///
/// The cell_* members evaluate the contribution g U(m/g) of one interval of
/// length g carrying mass m, which is the building block of every discrete
/// internal energy in the library.
class EnergyModel {
 public:
  /// kappa defaults to theta^2/gamma with theta = (gamma-1)/2.
  static EnergyModel polytropic(double gamma) {
    const double theta = 0.5 * (gamma - 1.0);
    return polytropic(gamma, theta * theta / gamma);
  }

  static EnergyModel polytropic(double gamma, double kappa) {
    if (!(gamma > 1.0)) throw DomainError("polytropic model requires gamma > 1");
    if (!(kappa > 0.0)) throw DomainError("polytropic model requires kappa > 0");
    return EnergyModel(EnergyKind::Polytropic, gamma, kappa);
  }

  static EnergyModel isothermal() { return EnergyModel(EnergyKind::Isothermal, 1.0, 1.0); }

  static EnergyModel pressureless() { return EnergyModel(EnergyKind::Pressureless, 1.0, 0.0); }

  EnergyKind kind() const noexcept { return kind_; }
  double gamma() const noexcept { return gamma_; }
  double kappa() const noexcept { return kappa_; }
  double theta() const noexcept { return 0.5 * (gamma_ - 1.0); }

  double energy(double rho) const {
    check(rho);
    switch (kind_) {
      case EnergyKind::Polytropic:
        return kappa_ * std::pow(rho, gamma_) / (gamma_ - 1.0);
      case EnergyKind::Isothermal:
        return rho > 0.0 ? rho * std::log(rho) : 0.0;
      case EnergyKind::Pressureless:
        return 0.0;
    }
    return 0.0;
  }

  double energy_d1(double rho) const {
    check(rho);
    switch (kind_) {
      case EnergyKind::Polytropic:
        return kappa_ * gamma_ * std::pow(rho, gamma_ - 1.0) / (gamma_ - 1.0);
      case EnergyKind::Isothermal:
        if (rho == 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(rho) + 1.0;
      case EnergyKind::Pressureless:
        return 0.0;
    }
    return 0.0;
  }

  double energy_d2(double rho) const {
    check(rho);
    switch (kind_) {
      case EnergyKind::Polytropic:
        return kappa_ * gamma_ * std::pow(rho, gamma_ - 2.0);
      case EnergyKind::Isothermal:
        return 1.0 / rho;
      case EnergyKind::Pressureless:
        return 0.0;
    }
    return 0.0;
  }

  double pressure(double rho) const {
    check(rho);
    switch (kind_) {
      case EnergyKind::Polytropic:
        return kappa_ * std::pow(rho, gamma_);
      case EnergyKind::Isothermal:
        return rho;
      case EnergyKind::Pressureless:
        return 0.0;
    }
    return 0.0;
  }

  /// dP/drho = rho U''(rho).
  double pressure_d1(double rho) const {
    check(rho);
    switch (kind_) {
      case EnergyKind::Polytropic:
        return kappa_ * gamma_ * std::pow(rho, gamma_ - 1.0);
      case EnergyKind::Isothermal:
        return 1.0;
      case EnergyKind::Pressureless:
        return 0.0;
    }
    return 0.0;
  }

  /// g U(m/g); +inf when g <= 0 and m > 0.
  double cell_energy(double m, double g) const {
    if (m == 0.0 || kind_ == EnergyKind::Pressureless) return 0.0;
    if (!(g > 0.0)) return std::numeric_limits<double>::infinity();
    return g * energy(m / g);
  }

  /// d/dg [g U(m/g)] = -P(m/g).
  double cell_energy_d1(double m, double g) const {
    if (m == 0.0 || kind_ == EnergyKind::Pressureless) return 0.0;
    return -pressure(m / g);
  }

  /// d^2/dg^2 [g U(m/g)] = rho P'(rho) / g.
  double cell_energy_d2(double m, double g) const {
    if (m == 0.0 || kind_ == EnergyKind::Pressureless) return 0.0;
    const double rho = m / g;
    return rho * pressure_d1(rho) / g;
  }

  /// (g+d) U(m/(g+d)) - g U(m/g) without cancellation.
  double cell_energy_change(double m, double g, double d) const {
    if (m == 0.0 || kind_ == EnergyKind::Pressureless) return 0.0;
    if (!(g + d > 0.0)) return std::numeric_limits<double>::infinity();
    const double r = std::log1p(d / g);
    switch (kind_) {
      case EnergyKind::Polytropic:
        return cell_energy(m, g) * std::expm1((1.0 - gamma_) * r);
      case EnergyKind::Isothermal:
        return -m * r;
      case EnergyKind::Pressureless:
        return 0.0;
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind_) {
      case EnergyKind::Polytropic:
        return "polytropic";
      case EnergyKind::Isothermal:
        return "isothermal";
      case EnergyKind::Pressureless:
        return "pressureless";
    }
    return "?";
  }

 private:
  EnergyModel(EnergyKind kind, double gamma, double kappa)
      : kind_(kind), gamma_(gamma), kappa_(kappa) {}

  static void check(double rho) {
    if (!(rho >= 0.0)) throw DomainError("density must be nonnegative");
  }

  EnergyKind kind_;
  double gamma_;
  double kappa_;
};

inline double energy_density(const EnergyModel& model, double rho) { return model.energy(rho); }
inline double pressure(const EnergyModel& model, double rho) { return model.pressure(rho); }

/// Equal-mass point particles (first-order particle scheme).
struct ParticleState {
  std::vector<double> positions;
  std::vector<double> velocities;
  double particle_mass = 0.0;
  double time = 0.0;

  std::size_t size() const noexcept { return positions.size(); }
};

/// Piecewise-constant density on N cells between N+1 knots, with a velocity
/// that is linear on each cell and given by its knot values.
struct CellState {
  std::vector<double> knots;
  std::vector<double> masses;
  std::vector<double> velocities;
  double time = 0.0;

  std::size_t cells() const noexcept { return masses.size(); }
  double density(std::size_t i) const { return masses[i] / (knots[i + 1] - knots[i]); }
};

struct Energy {
  double kinetic = 0.0;
  double internal = 0.0;
  double total = 0.0;
};

inline void validate(const ParticleState& s) {
  const std::size_t n = s.positions.size();
  if (n < 2) throw DomainError("particle state needs at least two particles");
  if (s.velocities.size() != n) throw DomainError("particle state velocity count mismatch");
  if (!(s.particle_mass > 0.0)) throw DomainError("particle mass must be positive");
  if (std::abs(s.particle_mass * static_cast<double>(n) - 1.0) > 1e-12)
    throw DomainError("particle masses must sum to one");
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!(s.positions[i] < s.positions[i + 1]))
      throw InfeasibleError("particle positions must be strictly increasing");
}

inline void validate(const CellState& s) {
  const std::size_t n = s.masses.size();
  if (n < 1) throw DomainError("cell state needs at least one cell");
  if (s.knots.size() != n + 1 || s.velocities.size() != n + 1)
    throw DomainError("cell state needs N+1 knots and velocities");
  double total = 0.0;
  for (double m : s.masses) {
    if (!(m >= 0.0)) throw DomainError("cell masses must be nonnegative");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("cell masses must sum to one");
  for (std::size_t i = 0; i < n; ++i)
    if (!(s.knots[i] < s.knots[i + 1]))
      throw InfeasibleError("knots must be strictly increasing");
}

inline Energy total_energy_particles(const ParticleState& s, const EnergyModel& model) {
  Energy e;
  for (double u : s.velocities) e.kinetic += 0.5 * s.particle_mass * u * u;
  for (std::size_t i = 0; i + 1 < s.positions.size(); ++i) {
    const double g = s.positions[i + 1] - s.positions[i];
    if (!(g > 0.0)) throw InfeasibleError("coincident particles have infinite internal energy");
    e.internal += model.cell_energy(s.particle_mass, g);
  }
  e.total = e.kinetic + e.internal;
  return e;
}

/// Kinetic part is the exact integral of rho u^2 / 2 for constant rho and
/// linear u on each cell.
inline Energy total_energy_cells(const CellState& s, const EnergyModel& model) {
  Energy e;
  for (std::size_t i = 0; i < s.masses.size(); ++i) {
    const double g = s.knots[i + 1] - s.knots[i];
    if (!(g > 0.0)) throw InfeasibleError("degenerate cell has infinite internal energy");
    const double a = s.velocities[i];
    const double b = s.velocities[i + 1];
    e.kinetic += s.masses[i] / 6.0 * (a * a + a * b + b * b);
    e.internal += model.cell_energy(s.masses[i], g);
  }
  e.total = e.kinetic + e.internal;
  return e;
}

}  // namespace vps

#endif  // VPS_PHYSICS_HPP
