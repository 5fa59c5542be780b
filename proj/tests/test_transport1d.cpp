#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "vps/transport1d.hpp"

using namespace vps;

namespace {

PiecewiseMeasure uniform(double a, double b) { return {{a, b}, {1.0}}; }

/// Equal-mass atoms at sorted positions as zero-width intervals.
PiecewiseMeasure atoms(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  PiecewiseMeasure mu;
  const double m = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i > 0) mu.masses.push_back(0.0);
    mu.breakpoints.push_back(x[i]);
    mu.breakpoints.push_back(x[i]);
    mu.masses.push_back(m);
  }
  return mu;
}

PiecewiseMeasure random_measure(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PiecewiseMeasure mu;
  mu.breakpoints = {u(rng) - 0.5};
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mu.breakpoints.push_back(mu.breakpoints.back() + (u(rng) < 0.2 ? 0.0 : u(rng)));
    mu.masses.push_back(0.05 + u(rng));
    total += mu.masses.back();
  }
  for (double& m : mu.masses) m /= total;
  return mu;
}

double max_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

TEST(InverseCdf, Examples) {
  const InverseCdf id = inverse_cdf(uniform(0.0, 1.0));
  for (double s : {0.0, 0.2, 0.5, 0.9, 1.0}) EXPECT_NEAR(id(s), s, 1e-15);
  const InverseCdf dirac = inverse_cdf({{5.0, 5.0}, {1.0}});
  for (double s : {0.0, 0.3, 1.0}) EXPECT_EQ(dirac(s), 5.0);
  const InverseCdf two = inverse_cdf({{0.0, 1.0, 3.0}, {0.5, 0.5}});
  EXPECT_NEAR(two(0.75), 2.0, 1e-15);
}

TEST(InverseCdf, RejectsInvalidMeasure) {
  EXPECT_THROW(inverse_cdf({{0.0, 1.0}, {0.5}}), DomainError);
  EXPECT_THROW(inverse_cdf({{1.0, 0.0}, {1.0}}), DomainError);
}

TEST(Wasserstein, Examples) {
  const auto mu = PiecewiseMeasure{{0.0, 1.0, 3.0}, {0.25, 0.75}};
  EXPECT_EQ(wasserstein(mu, mu), 0.0);
  EXPECT_NEAR(wasserstein({{0.0, 0.0}, {1.0}}, {{1.0, 1.0}, {1.0}}), 1.0, 1e-15);
  const double w = wasserstein(uniform(0.0, 1.0), uniform(0.0, 2.0));
  EXPECT_NEAR(w, 1.0 / std::sqrt(3.0), 1e-15);
  const double q = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      [](double s) { return s * s; }, 0.0, 1.0);
  EXPECT_NEAR(w, std::sqrt(q), 1e-14);
}

// Equal-mass atoms: W^2 is the minimum over all assignments.
TEST(Wasserstein, BruteForcePermutationOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 8);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i) c += (x[i] - y[perm[i]]) * (x[i] - y[perm[i]]);
      best = std::min(best, c / static_cast<double>(n));
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double w = wasserstein(atoms(x), atoms(y));
    EXPECT_NEAR(w * w, best, 1e-12) << "instance " << trial;
  }
}

TEST(Wasserstein, MetricAxioms) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_measure(rng, 1 + trial % 7);
    const auto b = random_measure(rng, 1 + trial % 5);
    const auto c = random_measure(rng, 1 + trial % 3);
    EXPECT_NEAR(wasserstein(a, b), wasserstein(b, a), 1e-14);
    EXPECT_LE(wasserstein(a, b), wasserstein(a, c) + wasserstein(c, b) + 1e-12);
  }
}

TEST(InverseCdf, PushForwardReproducesMasses) {
  std::mt19937_64 rng(99);
  PiecewiseMeasure mu{{0.0, 1.0, 1.5, 4.0, 4.5}, {0.1, 0.4, 0.3, 0.2}};
  const InverseCdf f = inverse_cdf(mu);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> counts(mu.masses.size(), 0.0);
  const int samples = 100000;
  for (int k = 0; k < samples; ++k) {
    const double x = f(u(rng));
    const auto it = std::upper_bound(mu.breakpoints.begin() + 1, mu.breakpoints.end() - 1, x);
    counts[static_cast<std::size_t>(it - mu.breakpoints.begin()) - 1] += 1.0;
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = samples * mu.masses[i];
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
  }
  EXPECT_LT(chi2, 16.27);  // 99.9% quantile, three degrees of freedom
}

TEST(SortWithPermutation, Examples) {
  const auto r = sort_with_permutation(std::vector<double>{0.3, 0.1, 0.2});
  EXPECT_EQ(r.sorted, (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(r.sigma, (std::vector<std::size_t>{1, 2, 0}));
  const auto id = sort_with_permutation(std::vector<double>{-1.0, 0.0, 2.0});
  EXPECT_EQ(id.sigma, (std::vector<std::size_t>{0, 1, 2}));
  const auto tie = sort_with_permutation(std::vector<double>{1.0, 1.0});
  EXPECT_EQ(tie.sigma, (std::vector<std::size_t>{0, 1}));
  EXPECT_THROW(sort_with_permutation(std::vector<double>{0.0, std::nan("")}), DomainError);
}

TEST(RedistributeMasses, Examples) {
  const std::vector<double> m{0.2, 0.3, 0.5};
  const std::vector<std::size_t> id{0, 1, 2, 3};
  EXPECT_EQ(redistribute_masses(m, id, std::vector<double>{0.0, 1.0, 2.0, 4.0}), m);

  const auto one = redistribute_masses(std::vector<double>{1.0}, std::vector<std::size_t>{0, 1},
                                       std::vector<double>{2.0, 2.0});
  EXPECT_EQ(one[0], 1.0);

  // Knots 0,1,2 move to 0,4,1: cell 1 spans both sorted intervals (lengths 1 and 3).
  const auto pf = push_forward(std::vector<double>{0.5, 0.5}, std::vector<double>{0.0, 4.0, 1.0});
  EXPECT_EQ(pf.breakpoints, (std::vector<double>{0.0, 1.0, 4.0}));
  EXPECT_NEAR(pf.masses[0], 0.125, 1e-16);
  EXPECT_NEAR(pf.masses[1], 0.375 + 0.5, 1e-16);
}

TEST(RedistributeMasses, ConservesMassOnRandomTransports) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 30;
    std::vector<double> m(n);
    double total = 0.0;
    for (double& v : m) v = u(rng), total += v;
    for (double& v : m) v /= total;
    std::vector<double> y(n + 1);
    for (std::size_t i = 0; i <= n; ++i) y[i] = static_cast<double>(i) / n + 0.3 * g(rng);
    if (trial % 4 == 0) y[n / 2] = y[n / 2 + 1];  // collapsed cell
    const auto pf = push_forward(m, y);
    KahanSum s;
    for (double v : pf.masses) {
      EXPECT_GE(v, 0.0);
      s.add(v);
    }
    EXPECT_NEAR(s.value(), 1.0, 1e-15);
  }
}

TEST(MassMatrix, Examples) {
  const auto a = mass_matrix(std::vector<double>{1.0});
  EXPECT_NEAR(a.diag[0], 1.0 / 3.0, 1e-16);
  EXPECT_NEAR(a.diag[1], 1.0 / 3.0, 1e-16);
  EXPECT_NEAR(a.off[0], 1.0 / 6.0, 1e-16);
  const std::size_t n = 5;
  const auto u = mass_matrix(std::vector<double>(n, 1.0 / n));
  for (std::size_t i = 1; i < n; ++i) EXPECT_NEAR(u.diag[i], 2.0 / (3.0 * n), 1e-16);
  for (double o : u.off) EXPECT_NEAR(o, 1.0 / (6.0 * n), 1e-16);
  const std::vector<double> m{0.1, 0.6, 0.3};
  const auto b = mass_matrix(m);
  const auto rows = b.multiply(std::vector<double>(4, 1.0));
  EXPECT_NEAR(rows[0], m[0] / 2, 1e-16);
  EXPECT_NEAR(rows[1], (m[0] + m[1]) / 2, 1e-16);
  EXPECT_NEAR(rows[3], m[2] / 2, 1e-16);
}

TEST(MNorm, ExamplesAndQuadrature) {
  const std::vector<double> m{0.1, 0.6, 0.3};
  const auto a = mass_matrix(m);
  EXPECT_NEAR(m_norm_sq(std::vector<double>(4, 2.5), a), 6.25, 1e-14);
  EXPECT_EQ(m_norm_sq(std::vector<double>(4, 0.0), a), 0.0);
  EXPECT_NEAR(m_norm_sq(std::vector<double>{0.0, 1.0}, mass_matrix(std::vector<double>{1.0})), 1.0 / 3.0, 1e-16);
  const std::vector<double> z{1.0, -2.0, 0.5, 3.0};
  const auto s = mass_nodes(m);
  double q = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    auto f = [&](double v) {
      const double w = (v - s[k]) / (s[k + 1] - s[k]);
      const double zz = z[k] * (1 - w) + z[k + 1] * w;
      return zz * zz;
    };
    q += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, s[k], s[k + 1]);
  }
  EXPECT_NEAR(m_norm_sq(z, a), q, 1e-10 * q);
}

TEST(Projection, Examples) {
  const std::vector<double> m{0.2, 0.5, 0.3};
  const std::vector<double> x{-1.0, 0.0, 0.4, 2.0};
  const auto same = project_fixed_masses({x, m}, m);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(same[i], x[i], 1e-14);

  const auto atom = project_fixed_masses({{0.7, 0.7}, {1.0}}, std::vector<double>{1.0});
  EXPECT_NEAR(atom[0], 0.7, 1e-15);
  EXPECT_NEAR(atom[1], 0.7, 1e-15);

  const auto u = project_fixed_masses(uniform(0.0, 2.0), std::vector<double>{0.5, 0.5});
  EXPECT_NEAR(u[0], 0.0, 1e-15);
  EXPECT_NEAR(u[1], 1.0, 1e-15);
  EXPECT_NEAR(u[2], 2.0, 1e-15);

  EXPECT_THROW(project_fixed_masses(uniform(0.0, 1.0), std::vector<double>{1.0, 0.0}), DomainError);
}

TEST(Projection, OptimalityOnRandomMeasures) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto nu = random_measure(rng, 2 + trial % 6);
    const std::size_t n = 1 + trial % 5;
    std::vector<double> m(n);
    double total = 0.0;
    for (double& v : m) v = u(rng), total += v;
    for (double& v : m) v /= total;
    const auto x = project_fixed_masses(nu, m);
    const InverseCdf fnu = inverse_cdf(nu);
    const InverseCdf fx(mass_nodes(m), x);
    const double w0 = wasserstein_sq(fx, fnu);
    // Residual A X - b: b recomputed independently of the projection.
    const auto s = mass_nodes(m);
    std::vector<double> b(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      // Gauss-Kronrod is exact on each polynomial piece between the kinks of fnu.
      auto gk = [&](auto&& phi) {
        std::vector<double> cuts{s[k], s[k + 1]};
        for (double v : fnu.mass_nodes())
          if (v > s[k] && v < s[k + 1]) cuts.push_back(v);
        std::sort(cuts.begin(), cuts.end());
        double acc = 0.0;
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c)
          acc += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
              [&](double v) { return phi(v) * fnu(v); }, cuts[c], cuts[c + 1], 0);
        return acc;
      };
      b[k] += gk([&](double v) { return (s[k + 1] - v) / (s[k + 1] - s[k]); });
      b[k + 1] += gk([&](double v) { return (v - s[k]) / (s[k + 1] - s[k]); });
    }
    const auto ax = mass_matrix(m).multiply(x);
    std::vector<double> r(n + 1);
    for (std::size_t i = 0; i <= n; ++i) r[i] = ax[i] - b[i];
    EXPECT_LE(max_abs(r), 1e-12 * max_abs(b));
    for (std::size_t i = 0; i <= n; ++i) {
      for (double d : {-1e-4, 1e-4}) {
        std::vector<double> y = x;
        y[i] += d;
        EXPECT_GE(wasserstein_sq(InverseCdf(mass_nodes(m), y), fnu), w0);
      }
    }
  }
}
