#ifndef VPS_TRANSPORT1D_HPP
#define VPS_TRANSPORT1D_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "vps/error.hpp"
#include "vps/tridiag.hpp"

namespace vps {

/// Probability measure on the line given by K intervals with nondecreasing
/// breakpoints. An interval of zero width carries an atom.
struct PiecewiseMeasure {
  std::vector<double> breakpoints;  // K+1
  std::vector<double> masses;       // K

  std::size_t intervals() const noexcept { return masses.size(); }
};

/// Compensated running sum.
class KahanSum {
 public:
  void add(double v) {
    const double y = v - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const noexcept { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

/// Cumulative mass nodes s_0 = 0, s_k = m_1 + ... + m_k, with s_K pinned to 1.
inline std::vector<double> mass_nodes(std::span<const double> masses) {
  std::vector<double> s(masses.size() + 1, 0.0);
  KahanSum acc;
  for (std::size_t k = 0; k < masses.size(); ++k) {
    acc.add(masses[k]);
    s[k + 1] = acc.value();
  }
  // Rounding may leave s_K a few ulps away from one; the last increasing node
  // is clamped so that both partitions of a merge end at the same point.
  s.back() = 1.0;
  for (std::size_t k = s.size() - 1; k-- > 0;) s[k] = std::min(s[k], s[k + 1]);
  return s;
}

inline void validate(const PiecewiseMeasure& mu) {
  if (mu.masses.empty() || mu.breakpoints.size() != mu.masses.size() + 1)
    throw DomainError("measure needs K masses and K+1 breakpoints");
  KahanSum total;
  for (std::size_t i = 0; i < mu.masses.size(); ++i) {
    if (!(mu.masses[i] >= 0.0)) throw DomainError("measure masses must be nonnegative");
    if (!(mu.breakpoints[i] <= mu.breakpoints[i + 1]))
      throw DomainError("measure breakpoints must be nondecreasing");
    total.add(mu.masses[i]);
  }
  if (std::abs(total.value() - 1.0) > 1e-12) throw DomainError("measure must have unit mass");
}

/// Generalized inverse of the distribution function. On [s_{k-1}, s_k] it
/// interpolates x_{k-1} and x_k linearly, so atoms give constant pieces and
/// zero-mass intervals give jumps.
class InverseCdf {
 public:
  InverseCdf() = default;
  InverseCdf(std::vector<double> nodes, std::vector<double> values)
      : nodes_(std::move(nodes)), values_(std::move(values)) {}

  explicit InverseCdf(const PiecewiseMeasure& mu)
      : nodes_(vps::mass_nodes(mu.masses)), values_(mu.breakpoints) {}

  const std::vector<double>& mass_nodes() const noexcept { return nodes_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t pieces() const noexcept { return nodes_.size() - 1; }

  /// Value of the affine piece k (on [s_k, s_{k+1}]) at s.
  double piece_value(std::size_t k, double s) const {
    const double w = nodes_[k + 1] - nodes_[k];
    if (!(w > 0.0)) return values_[k + 1];
    return values_[k] + (values_[k + 1] - values_[k]) * ((s - nodes_[k]) / w);
  }

  /// Right-continuous evaluation, sup{t : F(t) <= s}.
  double operator()(double s) const {
    if (s <= 0.0) {
      // sup over the first positive-mass piece's left end
      auto it = std::upper_bound(nodes_.begin(), nodes_.end(), 0.0);
      const std::size_t k = static_cast<std::size_t>(it - nodes_.begin());
      return k == 0 ? values_.front() : values_[k - 1];
    }
    if (s >= 1.0) return values_.back();
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - nodes_.begin()) - 1;
    return piece_value(k, s);
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> values_;
};

inline InverseCdf inverse_cdf(const PiecewiseMeasure& mu) {
  validate(mu);
  return InverseCdf(mu);
}

/// Sweeps the common refinement of two mass partitions of [0,1] and calls
/// fn(a, b, i, j) for every nondegenerate segment [a,b], where i and j are the
/// pieces of the first and second partition that contain it.
template <typename Fn>
void for_each_merged_segment(std::span<const double> s1, std::span<const double> s2, Fn&& fn) {
  std::size_t i = 0;
  std::size_t j = 0;
  const std::size_t n1 = s1.size() - 1;
  const std::size_t n2 = s2.size() - 1;
  double a = 0.0;
  while (i < n1 && j < n2) {
    const double b = std::min(s1[i + 1], s2[j + 1]);
    if (b > a) {
      fn(a, b, i, j);
      a = b;
    }
    if (s1[i + 1] <= b) ++i;
    if (s2[j + 1] <= b) ++j;
  }
}

/// Exact integral of (p + (q-p) t)^2 over a unit parameter, times the length.
inline double integral_of_square_linear(double len, double fa, double fb) {
  return len * (fa * fa + fa * fb + fb * fb) / 3.0;
}

/// Squared quadratic Wasserstein distance between two measures on the line,
/// integrated in closed form over the merged mass partition.
inline double wasserstein_sq(const InverseCdf& f, const InverseCdf& g) {
  KahanSum acc;
  for_each_merged_segment(f.mass_nodes(), g.mass_nodes(),
                          [&](double a, double b, std::size_t i, std::size_t j) {
                            const double da = f.piece_value(i, a) - g.piece_value(j, a);
                            const double db = f.piece_value(i, b) - g.piece_value(j, b);
                            acc.add(integral_of_square_linear(b - a, da, db));
                          });
  return std::max(acc.value(), 0.0);
}

inline double wasserstein(const PiecewiseMeasure& mu, const PiecewiseMeasure& nu) {
  return std::sqrt(wasserstein_sq(inverse_cdf(mu), inverse_cdf(nu)));
}

struct SortResult {
  std::vector<double> sorted;
  std::vector<std::size_t> sigma;  // sorted[i] = y[sigma[i]], 0-based
};

/// Stable sort: equal values keep their original relative order.
inline SortResult sort_with_permutation(std::span<const double> y) {
  SortResult r;
  r.sigma.resize(y.size());
  std::iota(r.sigma.begin(), r.sigma.end(), std::size_t{0});
  for (double v : y)
    if (std::isnan(v)) throw DomainError("cannot sort NaN positions");
  std::stable_sort(r.sigma.begin(), r.sigma.end(),
                   [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  r.sorted.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r.sorted[i] = y[r.sigma[i]];
  return r;
}

/// Masses of the sorted intervals [xhat_{j-1}, xhat_j] after the knots
/// 0..N were moved and sorted. Each original cell spreads its mass over the
/// sorted intervals between its two transported endpoints, in proportion to
/// their lengths, or equally when all of them collapsed to one point.
inline std::vector<double> redistribute_masses(std::span<const double> masses,
                                               std::span<const std::size_t> sigma,
                                               std::span<const double> xhat) {
  const std::size_t n = masses.size();
  if (sigma.size() != n + 1 || xhat.size() != n + 1)
    throw DomainError("redistribute_masses: size mismatch");
  std::vector<std::size_t> inv(n + 1);
  for (std::size_t k = 0; k <= n; ++k) inv[sigma[k]] = k;

  std::vector<KahanSum> acc(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t k = std::min(inv[i - 1], inv[i]);
    const std::size_t l = std::max(inv[i - 1], inv[i]);
    const double m = masses[i - 1];
    if (m == 0.0) continue;
    const double span_len = xhat[l] - xhat[k];
    if (xhat[k] == xhat[l]) {
      const double share = m / static_cast<double>(l - k);
      for (std::size_t j = k + 1; j <= l; ++j) acc[j - 1].add(share);
    } else {
      for (std::size_t j = k + 1; j <= l; ++j)
        acc[j - 1].add(m * ((xhat[j] - xhat[j - 1]) / span_len));
    }
  }
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = acc[j].value();
  return out;
}

/// Push-forward of the cell measure under the map that sends knot k to
/// shifted[k] and is linear on each cell.
inline PiecewiseMeasure push_forward(std::span<const double> masses,
                                     std::span<const double> shifted) {
  auto sorted = sort_with_permutation(shifted);
  PiecewiseMeasure nu;
  nu.masses = redistribute_masses(masses, sorted.sigma, sorted.sorted);
  nu.breakpoints = std::move(sorted.sorted);
  return nu;
}

/// Gram matrix of the hat functions on the mass nodes.
inline SymTridiag mass_matrix(std::span<const double> masses) {
  const std::size_t n = masses.size();
  SymTridiag a(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    a.diag[i] += masses[i] / 3.0;
    a.diag[i + 1] += masses[i] / 3.0;
    a.off[i] = masses[i] / 6.0;
  }
  return a;
}

inline double m_norm_sq(std::span<const double> z, const SymTridiag& a) {
  if (z.size() != a.size()) throw DomainError("m_norm_sq: dimension mismatch");
  return std::max(a.quadratic_form(z), 0.0);
}

/// Knots X minimizing W(mu_X, nu) over densities with the given cell masses:
/// X = A^{-1} b with b_k the integral of phi_k against the inverse CDF of nu.
/// The result need not be monotone.
inline std::vector<double> project_fixed_masses(const PiecewiseMeasure& nu,
                                                std::span<const double> masses) {
  for (double m : masses)
    if (!(m > 0.0)) throw DomainError("projection requires strictly positive cell masses");
  const InverseCdf f(nu);
  const std::vector<double> s = mass_nodes(masses);
  const std::size_t n = masses.size();
  std::vector<KahanSum> b(n + 1);
  for_each_merged_segment(
      f.mass_nodes(), s, [&](double a0, double a1, std::size_t i, std::size_t j) {
        const double w = s[j + 1] - s[j];
        const double mid = 0.5 * (a0 + a1);
        const double fa = f.piece_value(i, a0);
        const double fm = f.piece_value(i, mid);
        const double fb = f.piece_value(i, a1);
        // Right hat phi_{j+1} = (s - s_j)/w, left hat phi_j = 1 - phi_{j+1}.
        const double ra = (a0 - s[j]) / w;
        const double rm = (mid - s[j]) / w;
        const double rb = (a1 - s[j]) / w;
        const double h = (a1 - a0) / 6.0;
        const double right = h * (ra * fa + 4.0 * rm * fm + rb * fb);
        const double both = h * (fa + 4.0 * fm + fb);
        b[j + 1].add(right);
        b[j].add(both - right);
      });
  std::vector<double> rhs(n + 1);
  for (std::size_t k = 0; k <= n; ++k) rhs[k] = b[k].value();
  return solve_tridiag_spd(mass_matrix(masses), rhs);
}

}  // namespace vps

#endif  // VPS_TRANSPORT1D_HPP
