#ifndef VPS_OPTIMIZER_HPP
#define VPS_OPTIMIZER_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "vps/error.hpp"
#include "vps/tridiag.hpp"

namespace vps {

struct Evaluation {
  double value = 0.0;
  std::vector<double> gradient;
  SymTridiag hessian;
};

/// A strictly convex function of increasing vectors z. value() returns +inf
/// when some z_{i+1} <= z_i.
template <typename F>
concept Objective = requires(const F& f, std::span<const double> z) {
  { f.evaluate(z) } -> std::convertible_to<Evaluation>;
  { f.value(z) } -> std::convertible_to<double>;
};

/// Objectives that can report F(z + p) - F(z) without forming both values.
template <typename F>
concept DifferencedObjective = Objective<F> && requires(const F& f, std::span<const double> z) {
  { f.change(z, z) } -> std::convertible_to<double>;
};

/// ScaledBall: each outer step solves the scaled 2-norm subproblem exactly.
/// GapNewton: the Newton step is shortened until no gap shrinks by more than
/// 2*delta/3 of its length, the bound the ball enforces per coordinate, but
/// without limiting rigid motion or the outward motion of the end points.
enum class StepRule { GapNewton, ScaledBall };

struct TrustRegionConfig {
  StepRule rule = StepRule::GapNewton;
  double delta0 = 0.5;
  double delta_max = 1.0;
  double grad_tol = 1e-14;
  int max_iters = 500;
  double eta = 1e-4;
  int max_lambda_iters = 50;
};

inline void validate(const TrustRegionConfig& c) {
  if (!(c.delta_max > 0.0 && c.delta_max <= 1.0)) throw DomainError("delta_max must lie in (0,1]");
  if (!(c.delta0 > 0.0 && c.delta0 <= c.delta_max)) throw DomainError("delta0 must lie in (0,delta_max]");
  if (!(c.grad_tol > 0.0)) throw DomainError("grad_tol must be positive");
  if (c.max_iters < 1 || c.max_lambda_iters < 1) throw DomainError("iteration limits must be positive");
  if (!(c.eta >= 0.0 && c.eta < 0.25)) throw DomainError("eta must lie in [0,0.25)");
}

/// Pushes coincident or nearly coincident points apart so that consecutive
/// gaps are at least dmin. Points whose gaps already exceed dmin stay put.
inline std::vector<double> spread_initial_guess(std::span<const double> xhat, double dmin) {
  if (!(dmin > 0.0)) throw DomainError("spread_initial_guess: dmin must be positive");
  const std::size_t n = xhat.size();
  std::vector<double> l(n, 0.0);
  std::vector<double> r(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = i; j-- > 0;) {
      const double d = (xhat[j + 1] + l[j + 1]) - (xhat[j] + l[j]) - dmin;
      if (d < 0.0)
        l[j] += d;
      else
        break;
    }
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (xhat[j] + r[j]) - (xhat[j - 1] + r[j - 1]) - dmin;
      if (d < 0.0)
        r[j] -= d;
      else
        break;
    }
  }
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = xhat[i] + 0.5 * (l[i] + r[i]);
  return z;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double norm_inf(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

struct SubproblemResult {
  std::vector<double> p;
  double lambda = 0.0;
  int iters = 0;
  bool on_boundary = false;
};

/// Minimizes g^T p + p^T H p / 2 subject to |p| <= delta for positive
/// definite H by Newton's method on 1/delta - 1/|p(lambda)|.
inline SubproblemResult solve_subproblem(std::span<const double> g, const SymTridiag& h,
                                         double delta, double lambda0, int max_iters = 50) {
  if (!(delta > 0.0)) throw DomainError("solve_subproblem: radius must be positive");
  if (g.size() != h.size()) throw DomainError("solve_subproblem: dimension mismatch");
  SubproblemResult res;
  if (norm_inf(g) == 0.0) {
    res.p.assign(g.size(), 0.0);
    return res;
  }
  std::vector<double> minus_g(g.begin(), g.end());
  for (double& v : minus_g) v = -v;

  double lambda = std::max(lambda0, 0.0);
  for (int k = 0; k < max_iters; ++k) {
    const BidiagFactor chol = cholesky_tridiag(h, lambda);
    std::vector<double> p = chol.solve(minus_g);
    const std::vector<double> q = chol.forward(p);
    const double np = norm2(p);
    const double nq = norm2(q);
    res.iters = k + 1;
    const double rel = (np - delta) / delta;
    const double ratio = np / nq;
    const double next = lambda + ratio * ratio * rel;
    if (lambda == 0.0 && next <= 0.0) {
      res.p = std::move(p);
      res.lambda = 0.0;
      return res;
    }
    if (std::abs(rel) < 1e-12 ||
        std::abs(next - lambda) <= 4.0 * std::numeric_limits<double>::epsilon() * lambda) {
      res.p = std::move(p);
      res.lambda = lambda;
      res.on_boundary = true;
      return res;
    }
    lambda = std::max(next, 0.0);
  }
  throw ConvergenceError("trust-region multiplier iteration did not converge");
}

struct MinimizeStats {
  int iterations = 0;
  int accepted = 0;
  int lambda_iterations = 0;
  std::vector<double> lambda_history;
  double final_value = 0.0;
  double final_scaled_gradient = 0.0;
};

struct MinimizeResult {
  std::vector<double> z;
  MinimizeStats stats;
};

/// Scaling D_ii = min of the adjacent gaps / 3 (one gap at the ends).
inline std::vector<double> trust_region_scaling(std::span<const double> z) {
  const std::size_t n = z.size();
  std::vector<double> d(n, 1.0);
  if (n < 2) return d;
  for (std::size_t i = 0; i < n; ++i) {
    double gap = std::numeric_limits<double>::infinity();
    if (i > 0) gap = std::min(gap, z[i] - z[i - 1]);
    if (i + 1 < n) gap = std::min(gap, z[i + 1] - z[i]);
    d[i] = gap / 3.0;
  }
  return d;
}

template <Objective F>
double objective_change(const F& f, std::span<const double> z, std::span<const double> p,
                        double fz) {
  if constexpr (DifferencedObjective<F>) {
    return f.change(z, p);
  } else {
    std::vector<double> trial(z.begin(), z.end());
    for (std::size_t i = 0; i < trial.size(); ++i) trial[i] += p[i];
    return f.value(trial) - fz;
  }
}

/// Scaled trust-region Newton minimization. Stops when the scaled gradient
/// meets grad_tol or a full Newton step no longer moves z at working
/// precision. Throws ConvergenceError carrying the best iterate when max_iters is
/// exhausted.
template <Objective F>
MinimizeResult minimize(const F& f, std::span<const double> z0,
                        const TrustRegionConfig& cfg = TrustRegionConfig{}) {
  validate(cfg);
  MinimizeResult out;
  out.z.assign(z0.begin(), z0.end());
  std::vector<double>& z = out.z;
  const std::size_t n = z.size();
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!(z[i] < z[i + 1])) throw InfeasibleError("minimize: initial guess must be strictly increasing");

  double delta = cfg.delta0;
  double lambda = 0.0;
  Evaluation ev = f.evaluate(z);
  if (!std::isfinite(ev.value)) throw InfeasibleError("minimize: infeasible initial guess");
  bool fresh = true;
  std::vector<double> d;
  std::vector<double> ghat(n);
  SymTridiag hhat(n);
  std::vector<double> p(n);

  for (int it = 0; it < cfg.max_iters; ++it) {
    if (!fresh) ev = f.evaluate(z);
    fresh = false;
    d = trust_region_scaling(z);
    for (std::size_t i = 0; i < n; ++i) ghat[i] = d[i] * ev.gradient[i];
    const double gnorm = norm_inf(ghat);
    out.stats.final_value = ev.value;
    out.stats.final_scaled_gradient = gnorm;
    if (gnorm <= cfg.grad_tol * (1.0 + std::abs(ev.value))) return out;
    out.stats.iterations = it + 1;

    double predicted = 0.0;
    bool on_boundary = false;
    if (cfg.rule == StepRule::ScaledBall) {
      for (std::size_t i = 0; i < n; ++i) {
        hhat.diag[i] = d[i] * d[i] * ev.hessian.diag[i];
        if (i + 1 < n) hhat.off[i] = d[i] * d[i + 1] * ev.hessian.off[i];
      }
      SubproblemResult sub = solve_subproblem(ghat, hhat, delta, lambda, cfg.max_lambda_iters);
      out.stats.lambda_iterations += sub.iters;
      out.stats.lambda_history.push_back(sub.lambda);
      lambda = sub.lambda;
      on_boundary = sub.on_boundary;
      for (std::size_t i = 0; i < n; ++i) p[i] = d[i] * sub.p[i];
      double gp = 0.0;
      for (std::size_t i = 0; i < n; ++i) gp += ghat[i] * sub.p[i];
      predicted = -(gp + 0.5 * hhat.quadratic_form(sub.p));
    } else {
      std::vector<double> minus_g(ev.gradient);
      for (double& v : minus_g) v = -v;
      p = solve_tridiag_spd(ev.hessian, minus_g);
      double shrink = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i)
        shrink = std::max(shrink, (p[i] - p[i + 1]) / (z[i + 1] - z[i]));
      const double cap = 2.0 * delta / 3.0;
      double t = 1.0;
      if (shrink > cap) {
        t = cap / shrink;
        on_boundary = true;
      }
      for (double& v : p) v *= t;
      double gp = 0.0;
      for (std::size_t i = 0; i < n; ++i) gp += ev.gradient[i] * p[i];
      predicted = -(gp + 0.5 * ev.hessian.quadratic_form(p));
      out.stats.lambda_history.push_back(0.0);
    }

    // A full Newton step below the resolution of z: the gradient has reached
    // its rounding floor.
    if (!on_boundary && norm_inf(p) <= 4.0 * std::numeric_limits<double>::epsilon() * norm_inf(z))
      return out;

    const double change = objective_change(f, z, p, ev.value);
    const double ratio =
        (std::isfinite(change) && predicted > 0.0) ? -change / predicted : -1.0;

    if (ratio < 0.25)
      delta *= 0.25;
    else if (ratio > 0.75 && on_boundary)
      delta = std::min(2.0 * delta, cfg.delta_max);

    if (ratio > cfg.eta) {
      for (std::size_t i = 0; i < n; ++i) z[i] += p[i];
      ++out.stats.accepted;
    } else {
      fresh = true;  // z unchanged; keep the evaluation
    }
  }
  ev = f.evaluate(z);
  d = trust_region_scaling(z);
  for (std::size_t i = 0; i < n; ++i) ghat[i] = d[i] * ev.gradient[i];
  out.stats.final_value = ev.value;
  out.stats.final_scaled_gradient = norm_inf(ghat);
  if (out.stats.final_scaled_gradient <= cfg.grad_tol * (1.0 + std::abs(ev.value))) return out;
  throw ConvergenceError("trust-region minimization exceeded max_iters", z);
}

}  // namespace vps

#endif  // VPS_OPTIMIZER_HPP
