#ifndef VPS_TRIDIAG_HPP
#define VPS_TRIDIAG_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "vps/error.hpp"

namespace vps {

/// Symmetric tridiagonal matrix: diag has n entries, off has n-1 entries
/// (off[i] couples rows i and i+1).
struct SymTridiag {
  std::vector<double> diag;
  std::vector<double> off;

  SymTridiag() = default;
  explicit SymTridiag(std::size_t n) : diag(n, 0.0), off(n > 0 ? n - 1 : 0, 0.0) {}
  SymTridiag(std::vector<double> d, std::vector<double> o) : diag(std::move(d)), off(std::move(o)) {}

  std::size_t size() const noexcept { return diag.size(); }

  static SymTridiag identity(std::size_t n) {
    SymTridiag a(n);
    for (auto& d : a.diag) d = 1.0;
    return a;
  }

  std::vector<double> multiply(std::span<const double> x) const {
    const std::size_t n = diag.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * x[i];
      if (i > 0) s += off[i - 1] * x[i - 1];
      if (i + 1 < n) s += off[i] * x[i + 1];
      y[i] = s;
    }
    return y;
  }

  /// x^T A x.
  double quadratic_form(std::span<const double> x) const {
    const std::size_t n = diag.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += diag[i] * x[i] * x[i];
      if (i + 1 < n) s += 2.0 * off[i] * x[i] * x[i + 1];
    }
    return s;
  }

  /// x^T A y.
  double bilinear_form(std::span<const double> x, std::span<const double> y) const {
    const std::size_t n = diag.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += diag[i] * x[i] * y[i];
      if (i + 1 < n) s += off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
    }
    return s;
  }
};

/// Lower bidiagonal Cholesky factor: L(i,i) = diag[i], L(i+1,i) = sub[i].
struct BidiagFactor {
  std::vector<double> diag;
  std::vector<double> sub;

  /// Solves L y = b.
  std::vector<double> forward(std::span<const double> b) const {
    const std::size_t n = diag.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double r = b[i];
      if (i > 0) r -= sub[i - 1] * y[i - 1];
      y[i] = r / diag[i];
    }
    return y;
  }

  /// Solves L^T x = y.
  std::vector<double> backward(std::span<const double> y) const {
    const std::size_t n = diag.size();
    std::vector<double> x(n);
    for (std::size_t k = n; k-- > 0;) {
      double r = y[k];
      if (k + 1 < n) r -= sub[k] * x[k + 1];
      x[k] = r / diag[k];
    }
    return x;
  }

  /// Solves L L^T x = b.
  std::vector<double> solve(std::span<const double> b) const { return backward(forward(b)); }
};

/// Factorizes A + lambda I = L L^T in O(n).
inline BidiagFactor cholesky_tridiag(const SymTridiag& a, double lambda = 0.0) {
  const std::size_t n = a.size();
  BidiagFactor f;
  f.diag.resize(n);
  f.sub.resize(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    double pivot = a.diag[i] + lambda;
    if (i > 0) {
      f.sub[i - 1] = a.off[i - 1] / f.diag[i - 1];
      pivot -= f.sub[i - 1] * f.sub[i - 1];
    }
    if (!(pivot > 0.0)) throw NotPositiveDefiniteError("tridiagonal Cholesky: nonpositive pivot");
    f.diag[i] = std::sqrt(pivot);
  }
  return f;
}

inline std::vector<double> solve_tridiag_spd(const SymTridiag& a, std::span<const double> b) {
  return cholesky_tridiag(a).solve(b);
}

}  // namespace vps

#endif  // VPS_TRIDIAG_HPP
