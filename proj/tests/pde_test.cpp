#include "entropic/pde.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "entropic/error.hpp"

using namespace entropic;

namespace {

ScalarPayoff call(double k) {
  return [k](double q) { return std::max(q - k, 0.0); };
}

// Heston call by Fourier inversion of the characteristic function, in the stable
// "little trap" form. Variance follows kappa (theta - nu) dt + eps sqrt(nu) dz.
double heston_call(double q, double k, double nu0, double kappa, double theta, double eps, double rho, double r,
                   double T) {
  using C = std::complex<double>;
  const C i(0.0, 1.0);
  auto P = [&](int j) {
    const double u = j == 1 ? 0.5 : -0.5;
    const double b = j == 1 ? kappa - rho * eps : kappa;
    auto integrand = [&](double w) {
      const C d = std::sqrt(std::pow(rho * eps * i * w - b, 2) - eps * eps * (2.0 * u * i * w - w * w));
      const C g = (b - rho * eps * i * w - d) / (b - rho * eps * i * w + d);
      const C e = std::exp(-d * T);
      const C D = (b - rho * eps * i * w - d) / (eps * eps) * ((1.0 - e) / (1.0 - g * e));
      const C Cc = r * i * w * T + kappa * theta / (eps * eps) *
                                       ((b - rho * eps * i * w - d) * T - 2.0 * std::log((1.0 - g * e) / (1.0 - g)));
      const C f = std::exp(Cc + D * nu0 + i * w * std::log(q));
      return std::real(std::exp(-i * w * std::log(k)) * f / (i * w));
    };
    // Composite Simpson on (0, 200].
    const int n = 20000;
    const double h = 200.0 / n;
    double s = 0.0;
    for (int m = 0; m <= n; ++m) {
      const double w = std::max(m * h, 1e-10);
      const double c = (m == 0 || m == n) ? 1.0 : (m % 2 ? 4.0 : 2.0);
      s += c * integrand(w);
    }
    return 0.5 + s * h / 3.0 / M_PI;
  };
  return q * P(1) - k * std::exp(-r * T) * P(2);
}

Grid2D sv_grid(int nq, int nv, int steps, double q_max, double nu_max) {
  return {Vector::LinSpaced(nq, 0.0, q_max), Vector::LinSpaced(nv, 0.0, nu_max), steps, 2};
}

double max_interior_gap(const SvSurface& a, const SvSurface& b) {
  const Eigen::Index nq = a.q.size(), nv = a.nu.size();
  return (a.p.front() - b.p.front()).block(1, 1, nq - 2, nv - 2).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(BlackScholes, AtTheMoneyCallMatchesClosedForm) {
  const BsSurface s = solve_bs_complete({0.0, 0.0, 0.04}, call(100.0), 1.0, default_grid(100.0));
  const double oracle = black_scholes_call(100.0, 100.0, 0.2, 0.0, 1.0);
  EXPECT_NEAR(oracle, 7.9656, 5e-5);
  EXPECT_LT(std::abs(s.value_at(100.0) / oracle - 1.0), 1e-3);
  // N(d1) with d1 = sigma sqrt(T) / 2.
  EXPECT_NEAR(s.delta_at(100.0), 0.5 * std::erfc(-0.1 / std::sqrt(2.0)), 2e-3);
}

TEST(BlackScholes, FundedCallMatchesClosedForm) {
  const BsSurface s = solve_bs_complete({0.05, 0.1, 0.09}, call(110.0), 2.0, default_grid(100.0));
  for (double q0 : {80.0, 100.0, 120.0}) {
    const double oracle = black_scholes_call(q0, 110.0, 0.3, 0.05, 2.0);
    EXPECT_NEAR(s.value_at(q0), oracle, 2e-3 * oracle) << q0;
  }
}

TEST(BlackScholes, ForwardIsDiscountedStrike) {
  const double r = 0.05, k = 100.0;
  const BsSurface s = solve_bs_complete({r, 0.0, 0.04}, [k](double q) { return q - k; }, 1.0, default_grid(100.0));
  for (Eigen::Index j = 0; j < s.q.size(); ++j) {
    EXPECT_NEAR(s.p(0, j), s.q[j] - k * std::exp(-r), 1e-4);
    EXPECT_NEAR(s.delta(0, j), 1.0, 1e-9);
  }
}

TEST(BlackScholes, ConstantIsDiscounted) {
  const BsSurface s = solve_bs_complete({0.03, 0.0, 0.04}, [](double) { return 2.0; }, 1.5, default_grid(50.0));
  EXPECT_NEAR((s.p.row(0).array() - 2.0 * std::exp(-0.045)).abs().maxCoeff(), 0.0, 1e-7);
}

TEST(BlackScholes, SecondOrderGridConvergence) {
  const double oracle = black_scholes_call(100.0, 100.0, 0.2, 0.0, 1.0);
  double prev = 0.0;
  for (int level = 0; level < 3; ++level) {
    const int cells = 200 << level;
    const Grid1D g{Vector::LinSpaced(cells + 1, 0.0, 400.0), cells, 2};
    const double err = std::abs(solve_bs_complete({0.0, 0.0, 0.04}, call(100.0), 1.0, g).value_at(100.0) - oracle);
    if (level > 0) EXPECT_NEAR(prev / err, 4.0, 0.6) << cells;
    prev = err;
  }
}

TEST(BlackScholes, RejectsBadInput) {
  EXPECT_THROW(solve_bs_complete({0.0, 0.0, 0.0}, call(1.0), 1.0, default_grid(1.0)), InvalidInput);
  EXPECT_THROW(solve_bs_complete({0.0, 0.0, 0.04}, call(1.0), 0.0, default_grid(1.0)), InvalidInput);
  Grid1D g = default_grid(1.0);
  g.q[5] = g.q[4];
  EXPECT_THROW(solve_bs_complete({0.0, 0.0, 0.04}, call(1.0), 1.0, g), InvalidInput);
  EXPECT_THROW(solve_bs_complete({0.0, 0.0, 0.04}, call(1.0), 1.0, Grid1D{Vector::LinSpaced(2, 0.0, 1.0), 10, 2}),
               InvalidInput);
}

TEST(HestonPriceMeasure, AdjustsMeanReversionLevel) {
  const SvParams p{0.01, 0.03, 2.0, 0.04, 1.0, -0.5};
  const SvParams a = heston_price_measure(p);
  EXPECT_DOUBLE_EQ(a.nu_bar, 0.045);
  EXPECT_EQ(a.mu, 0.01);
  EXPECT_EQ(a.kappa, p.kappa);
  EXPECT_EQ(a.rho, p.rho);
  EXPECT_EQ(a.eps_vol, p.eps_vol);
}

TEST(HestonPriceMeasure, TrivialCases) {
  const SvParams same{0.02, 0.02, 2.0, 0.04, 1.0, -0.5};
  EXPECT_EQ(heston_price_measure(same).nu_bar, 0.04);
  const SvParams uncorrelated{0.01, 0.05, 2.0, 0.04, 1.0, 0.0};
  const SvParams a = heston_price_measure(uncorrelated);
  EXPECT_EQ(a.mu, 0.01);
  EXPECT_EQ(a.nu_bar, 0.04);
  EXPECT_THROW(heston_price_measure({0.01, 0.05, 0.0, 0.04, 1.0, -0.5}), InvalidInput);
}

TEST(StochasticVolatility, VanishingVolOfVolIsBlackScholes) {
  // kappa = 0 and eps = 0 freeze the variance at every node.
  const Grid2D g = sv_grid(201, 21, 200, 400.0, 0.08);
  const Grid1D g1{g.q, g.steps, g.rannacher};
  for (double alpha : {0.0, 3.0}) {
    const SvSurface s = solve_sv_incomplete({0.02, 0.07, 0.0, 0.04, 0.0, -0.4}, alpha, call(100.0), 1.0, g);
    for (Eigen::Index k : {5, 10, 20}) {
      const BsSurface b = solve_bs_complete({0.02, 0.07, g.nu[k]}, call(100.0), 1.0, g1);
      EXPECT_LT((s.p.front().col(k) - b.p.row(0).transpose()).cwiseAbs().maxCoeff(), 1e-9) << k;
      EXPECT_LT((s.delta.front().col(k) - b.delta.row(0).transpose()).cwiseAbs().maxCoeff(), 1e-9) << k;
    }
  }
}

TEST(StochasticVolatility, MidPriceMatchesHestonFormula) {
  const SvParams p{0.0, 0.0, 2.0, 0.04, 0.3, -0.7};
  const SvSurface s = solve_sv_incomplete(p, 0.0, call(100.0), 1.0, default_grid(100.0, 0.04));
  for (double q0 : {90.0, 100.0, 110.0}) {
    const double oracle = heston_call(q0, 100.0, 0.04, p.kappa, p.nu_bar, p.eps_vol, p.rho, p.r, 1.0);
    EXPECT_NEAR(s.value_at(q0, 0.04), oracle, 5e-3 * oracle) << q0;
  }
}

TEST(StochasticVolatility, DriftUsesPriceMeasure) {
  // The expectation-measure parameters and their price-measure adjustment give the same equation.
  const SvParams p{0.01, 0.06, 2.0, 0.04, 0.4, -0.6};
  const Grid2D g = sv_grid(81, 41, 50, 400.0, 0.32);
  const SvSurface a = solve_sv_incomplete(p, 0.01, call(100.0), 1.0, g);
  const SvSurface b = solve_sv_incomplete(heston_price_measure(p), 0.01, call(100.0), 1.0, g);
  EXPECT_LT((a.p.front() - b.p.front()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(StochasticVolatility, PerfectCorrelationIgnoresRiskAversion) {
  const Grid2D g = sv_grid(101, 41, 100, 400.0, 0.32);
  for (double rho : {-1.0, 1.0}) {
    const SvParams p{0.0, 0.02, 2.0, 0.04, 0.3, rho};
    const SvSurface a = solve_sv_incomplete(p, 0.0, call(100.0), 1.0, g);
    const SvSurface b = solve_sv_incomplete(p, 2.0, call(100.0), 1.0, g);
    EXPECT_EQ(max_interior_gap(a, b), 0.0);
  }
}

TEST(StochasticVolatility, PriceDecreasesWithRiskAversion) {
  const Grid2D g = sv_grid(101, 41, 100, 400.0, 0.32);
  const SvParams p{0.0, 0.0, 2.0, 0.04, 0.5, -0.5};
  Matrix prev = solve_sv_incomplete(p, 0.0, call(100.0), 1.0, g).p.front();
  for (double alpha : {0.005, 0.02, 0.05}) {
    const Matrix cur = solve_sv_incomplete(p, alpha, call(100.0), 1.0, g).p.front();
    // Crank-Nicolson leaves oscillations near 1e-7 where the price is zero.
    EXPECT_LE((cur - prev).maxCoeff(), 1e-6) << alpha;
    prev = cur;
  }
  EXPECT_LT(prev(50, 5), solve_sv_incomplete(p, 0.0, call(100.0), 1.0, g).p.front()(50, 5) - 1e-3);
}

TEST(StochasticVolatility, ReserveDischargesAsCorrelationApproachesOne) {
  const Grid2D g = sv_grid(101, 41, 100, 400.0, 0.32);
  double prev = kInfinity;
  for (double rho : {0.0, 0.5, 0.9, 0.99, 1.0}) {
    const SvParams p{0.0, 0.0, 2.0, 0.04, 0.5, rho};
    const double gap = max_interior_gap(solve_sv_incomplete(p, 0.0, call(100.0), 1.0, g),
                                        solve_sv_incomplete(p, 0.02, call(100.0), 1.0, g));
    EXPECT_LT(gap, prev) << rho;
    prev = gap;
  }
  EXPECT_EQ(prev, 0.0);
}

TEST(StochasticVolatility, HedgeAddsVarianceTerm) {
  const SvParams p{0.0, 0.0, 2.0, 0.04, 0.5, -0.5};
  const Grid2D g = sv_grid(101, 41, 100, 400.0, 0.32);
  const SvSurface s = solve_sv_incomplete(p, 0.0, call(100.0), 1.0, g);
  const Matrix& v = s.p.front();
  const Eigen::Index j = 25, k = 5;
  const double pq = (v(j + 1, k) - v(j - 1, k)) / (s.q[j + 1] - s.q[j - 1]);
  const double pnu = (v(j, k + 1) - v(j, k - 1)) / (s.nu[k + 1] - s.nu[k - 1]);
  EXPECT_NEAR(s.delta.front()(j, k), pq + pnu * p.rho * p.eps_vol / s.q[j], 1e-12);
}

TEST(StochasticVolatility, RejectsBadInput) {
  const Grid2D g = sv_grid(11, 11, 10, 4.0, 0.32);
  EXPECT_THROW(solve_sv_incomplete({0.0, 0.0, 1.0, 0.04, 0.3, 1.5}, 0.0, call(1.0), 1.0, g), InvalidInput);
  EXPECT_THROW(solve_sv_incomplete({0.0, 0.0, -1.0, 0.04, 0.3, 0.0}, 0.0, call(1.0), 1.0, g), InvalidInput);
  EXPECT_THROW(solve_sv_incomplete({0.0, 0.0, 1.0, 0.04, 0.3, 0.0}, -1.0, call(1.0), 1.0, g), InvalidInput);
}
