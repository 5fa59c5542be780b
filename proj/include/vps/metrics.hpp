#ifndef VPS_METRICS_HPP
#define VPS_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vps/error.hpp"
#include "vps/oracles.hpp"
#include "vps/physics.hpp"
#include "vps/transport1d.hpp"

namespace vps {

using DensityFn = std::function<double(double)>;

/// Discrete density samples: value on each interval and the interval itself.
struct DensitySamples {
  std::vector<double> left;
  std::vector<double> right;
  std::vector<double> value;
};

/// Particles: interval between neighbours i, i+1 with density m / gap.
inline DensitySamples density_samples(const ParticleState& s) {
  DensitySamples d;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    d.left.push_back(s.positions[i]);
    d.right.push_back(s.positions[i + 1]);
    d.value.push_back(s.particle_mass / (s.positions[i + 1] - s.positions[i]));
  }
  return d;
}

inline DensitySamples density_samples(const CellState& s) {
  DensitySamples d;
  for (std::size_t i = 0; i < s.cells(); ++i) {
    d.left.push_back(s.knots[i]);
    d.right.push_back(s.knots[i + 1]);
    d.value.push_back(s.density(i));
  }
  return d;
}

/// max over intervals of |discrete density - exact density at the midpoint|.
template <typename State>
double linf_error(const State& s, const DensityFn& exact) {
  const DensitySamples d = density_samples(s);
  double e = 0.0;
  for (std::size_t i = 0; i < d.value.size(); ++i)
    e = std::max(e, std::abs(d.value[i] - exact(0.5 * (d.left[i] + d.right[i]))));
  return e;
}

/// Midpoint errors weighted by interval lengths.
template <typename State>
double l1_error(const State& s, const DensityFn& exact) {
  const DensitySamples d = density_samples(s);
  KahanSum e;
  for (std::size_t i = 0; i < d.value.size(); ++i)
    e.add(std::abs(d.value[i] - exact(0.5 * (d.left[i] + d.right[i]))) * (d.right[i] - d.left[i]));
  return e.value();
}

/// |density of the interval [left, right) containing x0 - exact(x0)|.
template <typename State>
double center_error(const State& s, const DensityFn& exact, double x0 = 0.0) {
  const DensitySamples d = density_samples(s);
  for (std::size_t i = 0; i < d.value.size(); ++i)
    if (x0 >= d.left[i] && x0 < d.right[i]) return std::abs(d.value[i] - exact(x0));
  throw DomainError("center_error: the point lies outside the discrete support");
}

// ---------------------------------------------------------------------------
// Transport-based errors (cell states)

namespace detail {

/// Affine inverse CDF and pulled-back velocity of cell i evaluated at mass s.
struct CellPullback {
  const CellState& c;
  std::vector<double> s;

  explicit CellPullback(const CellState& cs) : c(cs), s(mass_nodes(cs.masses)) {}

  double position(std::size_t i, double v) const {
    const double w = (v - s[i]) / (s[i + 1] - s[i]);
    return c.knots[i] + (c.knots[i + 1] - c.knots[i]) * w;
  }
  double velocity(std::size_t i, double v) const {
    const double w = (v - s[i]) / (s[i + 1] - s[i]);
    return c.velocities[i] + (c.velocities[i + 1] - c.velocities[i]) * w;
  }
};

inline std::vector<double> profile_mass_nodes(const ExactProfile& p) {
  std::vector<double> n = p.mass_nodes();
  const double total = n.back();
  for (double& v : n) v /= total;
  n.back() = 1.0;
  return n;
}

struct TransportTerms {
  double w2 = 0.0;   // integral |R - R*|^2 ds
  double v2 = 0.0;   // integral |u o R - u* o R*|^2 ds
};

inline TransportTerms transport_terms(const CellState& c, const ExactProfile& p) {
  const CellPullback cp(c);
  const std::vector<double> pn = profile_mass_nodes(p);
  const double total = p.total_mass();
  TransportTerms t;
  KahanSum w2;
  KahanSum v2;
  using gk = boost::math::quadrature::gauss_kronrod<double, 15>;
  for_each_merged_segment(cp.s, pn, [&](double a, double b, std::size_t i, std::size_t j) {
    auto rex = [&](double v) { return p.piece_quantile(j, (v - pn[j]) * total); };
    auto fw = [&](double v) {
      const double d = cp.position(i, v) - rex(v);
      return d * d;
    };
    auto fv = [&](double v) {
      const double d = cp.velocity(i, v) - p.piece_velocity(j, rex(v));
      return d * d;
    };
    w2.add(gk::integrate(fw, a, b, 10, 1e-12));
    v2.add(gk::integrate(fv, a, b, 10, 1e-12));
  });
  t.w2 = std::max(w2.value(), 0.0);
  t.v2 = std::max(v2.value(), 0.0);
  return t;
}

inline TransportTerms transport_terms(const CellState& c, const CellState& r) {
  const CellPullback cp(c);
  const CellPullback rp(r);
  TransportTerms t;
  KahanSum w2;
  KahanSum v2;
  for_each_merged_segment(cp.s, rp.s, [&](double a, double b, std::size_t i, std::size_t j) {
    w2.add(integral_of_square_linear(b - a, cp.position(i, a) - rp.position(j, a),
                                     cp.position(i, b) - rp.position(j, b)));
    v2.add(integral_of_square_linear(b - a, cp.velocity(i, a) - rp.velocity(j, a),
                                     cp.velocity(i, b) - rp.velocity(j, b)));
  });
  t.w2 = std::max(w2.value(), 0.0);
  t.v2 = std::max(v2.value(), 0.0);
  return t;
}

}  // namespace detail

/// Quadratic Wasserstein distance between the cell density and the exact one.
inline double wasserstein_error(const CellState& c, const ExactProfile& p) {
  return std::sqrt(detail::transport_terms(c, p).w2);
}

inline double wasserstein_error(const CellState& c, const CellState& r) {
  return std::sqrt(detail::transport_terms(c, r).w2);
}

/// sqrt(W^2 + (1/2) integral over [0,1] of |u o R - u* o R*|^2).
inline double ew_error(const CellState& c, const ExactProfile& p) {
  const auto t = detail::transport_terms(c, p);
  return std::sqrt(t.w2 + 0.5 * t.v2);
}

inline double ew_error(const CellState& c, const CellState& r) {
  const auto t = detail::transport_terms(c, r);
  return std::sqrt(t.w2 + 0.5 * t.v2);
}

/// Pairwise observed orders log(e_{k-1}/e_k) / |log(h_{k-1}/h_k)|; NaN where
/// an error is not positive.
inline std::vector<double> convergence_rates(std::span<const double> errors,
                                             std::span<const double> resolutions) {
  if (errors.size() != resolutions.size()) throw DomainError("convergence_rates: size mismatch");
  std::vector<double> r;
  for (std::size_t k = 1; k < errors.size(); ++k) {
    const double e0 = errors[k - 1];
    const double e1 = errors[k];
    const double h = std::abs(std::log(resolutions[k - 1] / resolutions[k]));
    if (!(e0 > 0.0 && e1 > 0.0) || !(h > 0.0))
      r.push_back(std::numeric_limits<double>::quiet_NaN());
    else
      r.push_back(std::log(e0 / e1) / h);
  }
  return r;
}

/// Errors of one run; fields that do not apply stay NaN.
struct ErrorReport {
  static constexpr double na = std::numeric_limits<double>::quiet_NaN();
  double linf = na;
  double l1 = na;
  double wasserstein = na;
  double e_w = na;
  double energy_error = na;
  double center_error = na;
};

}  // namespace vps

#endif  // VPS_METRICS_HPP
