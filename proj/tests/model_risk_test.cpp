#include "entropic/model_risk.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "entropic/error.hpp"

using namespace entropic;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

struct Analytic {
  double dr;
  Vector dphi;
  double dp;
};

struct FiniteDifference {
  double dr;
  Vector dphi;
  double dp;
};

FiniteDifference central(const SampleMarket& mk, const Measure& m, const Vector& W, const Vector& P, double alpha,
                         double eps) {
  const Reprice up = reweighted_reprice(mk, m, W, eps, P, alpha);
  const Reprice down = reweighted_reprice(mk, m, W, -eps, P, alpha);
  return {(up.calib.r - down.calib.r) / (2.0 * eps), (up.calib.phi - down.calib.phi) / (2.0 * eps),
          (up.hedge.p - down.hedge.p) / (2.0 * eps)};
}

Analytic analytic(const SampleMarket& mk, const Measure& m, const Vector& W, const Vector& P, double alpha) {
  const CalibrationResult c = calibrate(mk, m);
  const HedgeResult h = solve_hedge(mk, c, P, alpha);
  const CalibrationSensitivity cs = perturb_calibration(mk, c, W);
  return {cs.dr, cs.dphi, price_sensitivity(mk, c, h, P, W, alpha)};
}

// Central differences converge at second order: the error shrinks about 4x when eps
// halves, unless it is already at rounding level.
void expect_second_order(double err_coarse, double err_fine, double floor) {
  if (err_coarse < floor && err_fine < floor) return;
  EXPECT_NEAR(err_coarse / err_fine, 4.0, 0.6) << err_coarse << " " << err_fine;
}

void check_market(const SampleMarket& mk, const Measure& m, const Vector& W, const Vector& P, double alpha,
                  double eps, double floor) {
  const Analytic a = analytic(mk, m, W, P, alpha);
  const FiniteDifference coarse = central(mk, m, W, P, alpha, eps);
  const FiniteDifference fine = central(mk, m, W, P, alpha, eps / 2.0);
  expect_second_order(std::abs(coarse.dr - a.dr), std::abs(fine.dr - a.dr), floor);
  expect_second_order((coarse.dphi - a.dphi).norm(), (fine.dphi - a.dphi).norm(), floor);
  expect_second_order(std::abs(coarse.dp - a.dp), std::abs(fine.dp - a.dp), floor);
  EXPECT_NEAR(fine.dp, a.dp, 1e-3 * (1.0 + std::abs(a.dp)));
}

SampleMarket three_state() {
  SampleMarket mk;
  mk.q = vec({1.0, 1.0});
  mk.Q.resize(3, 2);
  mk.Q << 1.0, 0.0, 1.0, 1.0, 1.0, 2.0;
  return mk;
}

SampleMarket gaussian_market(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  SampleMarket mk;
  mk.q = vec({1.0, 1.0});
  mk.Q.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = z(rng), b = z(rng);
    mk.Q(i, 0) = 1.02 + 0.1 * a;
    mk.Q(i, 1) = 1.05 + 0.2 * (0.5 * a + std::sqrt(0.75) * b);
  }
  return mk;
}

}  // namespace

TEST(ModelRisk, ThreeStateMatchesFiniteDifferences) {
  const SampleMarket mk = three_state();
  const Vector P = make_payoff(mk, PayoffKind::Call, 1, 1.0);
  const Vector W = vec({0.0, 0.0, 1.0});
  const Analytic a = analytic(mk, Measure::uniform(3), W, P, 1.0);
  // The funding asset pins the rate.
  EXPECT_EQ(a.dr, 0.0);
  EXPECT_NEAR(a.dphi.dot(mk.q), 0.0, 1e-15);
  check_market(mk, Measure::uniform(3), W, P, 1.0, 1e-2, 1e-10);
}

TEST(ModelRisk, ThreeStateMidPrice) {
  const SampleMarket mk = three_state();
  const Vector P = make_payoff(mk, PayoffKind::Call, 1, 1.0);
  check_market(mk, Measure::uniform(3), vec({0.3, -1.0, 0.5}), P, 0.0, 1e-2, 1e-10);
}

TEST(ModelRisk, GaussianSampleMatchesFiniteDifferences) {
  const SampleMarket mk = gaussian_market(10000, 41);
  const Measure m = Measure::uniform(10000);
  const Vector P = make_payoff(mk, PayoffKind::Call, 1, 1.05);
  // Tail reweighting of the first asset.
  const Vector W = (mk.Q.col(0).array() - 1.02).square().matrix() * 50.0;
  const Analytic a = analytic(mk, m, W, P, 1.0);
  EXPECT_NE(a.dr, 0.0);
  check_market(mk, m, W, P, 1.0, 2e-2, 1e-9);
}

TEST(ModelRisk, ZeroPerturbationLeavesPriceUnchanged) {
  const SampleMarket mk = three_state();
  const Vector P = make_payoff(mk, PayoffKind::Call, 1, 1.0);
  const Reprice r = reweighted_reprice(mk, Measure::uniform(3), Vector::Zero(3), 0.7, P, 1.0);
  EXPECT_NEAR(r.hedge.p, -std::log((1.0 + 2.0 * std::exp(-0.5)) / 3.0), 1e-12);
  // A constant W reweights nothing.
  const CalibrationResult c = calibrate(mk, Measure::uniform(3));
  const HedgeResult h = solve_hedge(mk, c, P, 1.0);
  EXPECT_NEAR(price_sensitivity(mk, c, h, P, Vector::Constant(3, 2.0), 1.0), 0.0, 1e-15);
}

TEST(ModelRisk, ExtremeReweightingUnderflows) {
  const SampleMarket mk = three_state();
  const Vector P = make_payoff(mk, PayoffKind::Call, 1, 1.0);
  EXPECT_THROW(reweighted_reprice(mk, Measure::uniform(3), vec({-1.0, 0.0, 1.0}), 1e4, P, 1.0), InvalidInput);
}
