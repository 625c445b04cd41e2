#include "entropic/quantum.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "entropic/calibrate.hpp"
#include "entropic/error.hpp"

using namespace entropic;

namespace {

constexpr double kPi = std::numbers::pi;

HermitianOperator real_op(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return HermitianOperator::real(m);
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

double positive_part(double x) { return std::max(x, 0.0); }

// Root of p = 0.5 - log cosh p by bisection.
double scalar_fixed_point() {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid - 0.5 + std::log(std::cosh(mid)) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

HermitianOperator random_hermitian(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> z;
  ComplexMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = {z(rng), z(rng)};
  }
  return HermitianOperator(0.5 * (m + m.adjoint()));
}

ComplexMatrix expm_hermitian(const HermitianOperator& H) {
  return matrix_function(H, [](double x) { return std::exp(x); }).matrix();
}

}  // namespace

TEST(HermitianOperator, RejectsNonHermitian) {
  Matrix m(2, 2);
  m << 0.0, 1.0, 0.0, 0.0;
  EXPECT_THROW(HermitianOperator::real(m), InvalidInput);
  EXPECT_THROW(HermitianOperator::real(Matrix(2, 3)), InvalidInput);
}

TEST(MatrixFunction, IdentityReturnsOperator) {
  std::mt19937_64 rng(3);
  const HermitianOperator H = random_hermitian(rng, 5);
  const HermitianOperator F = matrix_function(H, [](double x) { return x; });
  EXPECT_LE((F.matrix() - H.matrix()).norm(), 1e-12 * H.matrix().norm());
}

TEST(MatrixFunction, PositivePartOfPauliX) {
  const HermitianOperator F = matrix_function(real_op({{0, 1}, {1, 0}}), positive_part);
  EXPECT_LE((F.matrix() - ComplexMatrix::Constant(2, 2, 0.5)).norm(), 1e-14);
  const HermitianOperator D = matrix_function(HermitianOperator::diagonal(vec({1, -1})), positive_part);
  EXPECT_LE((D.matrix() - real_op({{1, 0}, {0, 0}}).matrix()).norm(), 1e-14);
}

TEST(TraceEam, TwoEigenvalueSum) {
  const HermitianOperator X = HermitianOperator::diagonal(vec({1, -1}));
  EXPECT_NEAR(trace_eam(X, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(trace_eam(X, 1.0), -std::log(std::cosh(1.0)), 1e-14);
  EXPECT_NEAR(trace_eam(X, 1.0), -0.433781, 1e-6);
}

TEST(TraceEam, InfiniteAlphaGivesExtremeEigenvalue) {
  const HermitianOperator X = real_op({{0, 1}, {1, 0.5}});
  const Spectrum s = spectrum(X);
  EXPECT_DOUBLE_EQ(trace_eam(X, kInfinity), s.values.minCoeff());
  EXPECT_DOUBLE_EQ(trace_eam(X, -kInfinity), s.values.maxCoeff());
}

TEST(TraceEam, RotationInvariant) {
  std::mt19937_64 rng(11);
  const HermitianOperator X = random_hermitian(rng, 4);
  const ComplexMatrix U = spectrum(random_hermitian(rng, 4)).vectors;
  const HermitianOperator Y(U * X.matrix() * U.adjoint());
  EXPECT_NEAR(trace_eam(X, 0.7), trace_eam(Y, 0.7), 1e-12);
  EXPECT_NEAR(trace_eam(X, 0.0), trace_mean(X), 1e-12);
}

TEST(SpreadPayoff, Examples) {
  const HermitianOperator B = HermitianOperator::diagonal(vec({2, 1}));
  const HermitianOperator Qd = HermitianOperator::diagonal(vec({3, 0.5}));
  const HermitianOperator P = spread_payoff(Qd, B, 1.0, positive_part);
  EXPECT_LE((P.matrix() - HermitianOperator::diagonal(vec({1, 0})).matrix()).norm(), 1e-14);

  const QuantumMarket m = two_state_market({kPi / 4, 1.0, 0.0});
  const HermitianOperator R = spread_payoff(m.ops[1], m.ops[0], 0.0, positive_part);
  EXPECT_NEAR(trace_mean(R), 0.5, 1e-14);
  const Spectrum s = spectrum(R);
  EXPECT_NEAR(s.values[0], 0.0, 1e-14);
  EXPECT_NEAR(s.values[1], 1.0, 1e-14);

  const HermitianOperator one = spread_payoff(m.ops[1], m.ops[0], 0.3, [](double) { return 1.0; });
  EXPECT_LE((one.matrix() - ComplexMatrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(AdjointTransform, CommutingIsIdentity) {
  const HermitianOperator X = HermitianOperator::diagonal(vec({1, 2, 3}));
  const ComplexMatrix Y = HermitianOperator::diagonal(vec({4, -1, 0.5})).matrix();
  EXPECT_LE((adjoint_transform(X, Y) - Y).norm(), 1e-14);
}

TEST(AdjointTransform, KernelOnOffDiagonal) {
  const HermitianOperator X = HermitianOperator::diagonal(vec({1, 0}));
  const ComplexMatrix A = adjoint_transform(X, real_op({{0, 1}, {1, 0}}).matrix());
  EXPECT_NEAR(A(0, 1).real(), std::exp(1.0) - 1.0, 1e-14);
  EXPECT_NEAR(A(1, 0).real(), 1.0 - std::exp(-1.0), 1e-14);
  EXPECT_NEAR(std::abs(A(0, 0)) + std::abs(A(1, 1)), 0.0, 1e-15);
}

TEST(AdjointTransform, DerivativeOfExponential) {
  // (1 - e^{-(X + aY)} e^X) / a -> adjoint_transform(-X, Y) as a -> 0.
  std::mt19937_64 rng(5);
  const HermitianOperator X = random_hermitian(rng, 4);
  const HermitianOperator Y = random_hermitian(rng, 4);
  const double a = 1e-6;
  const ComplexMatrix lhs =
      (ComplexMatrix::Identity(4, 4) - expm_hermitian((X + Y * a) * -1.0) * expm_hermitian(X)) / a;
  const ComplexMatrix rhs = adjoint_transform(X * -1.0, Y.matrix());
  EXPECT_LE((lhs - rhs).norm(), 1e-5 * rhs.norm());
}

TEST(AdjointTransform, TraceFirstOrderIdentity) {
  // tr[Z e^{-(X + aY)}] = tr[Z e^{-X}] - a tr[adjoint_transform(X, Z) Y e^{-X}] + O(a^2).
  std::mt19937_64 rng(9);
  const HermitianOperator X = random_hermitian(rng, 3);
  const HermitianOperator Y = random_hermitian(rng, 3);
  const HermitianOperator Z = random_hermitian(rng, 3);
  const ComplexMatrix e = expm_hermitian(X * -1.0);
  const double a = 1e-5;
  const double fd = ((Z.matrix() * expm_hermitian((X + Y * a) * -1.0)).trace() - (Z.matrix() * e).trace()).real() / a;
  const double exact = -(adjoint_transform(X, Z.matrix()) * Y.matrix() * e).trace().real();
  EXPECT_NEAR(fd, exact, 1e-4 * std::max(1.0, std::abs(exact)));
}

TEST(QuantumFamily, KuboMoriCovarianceIsHessian) {
  std::mt19937_64 rng(21);
  std::vector<HermitianOperator> stats{random_hermitian(rng, 4), random_hermitian(rng, 4)};
  const QuantumFamily f(random_hermitian(rng, 4), stats);
  const Vector theta = vec({0.3, -0.2});
  const TiltState st = f.evaluate(theta);
  const double h = 1e-6;
  for (Eigen::Index b = 0; b < 2; ++b) {
    Vector tp = theta, tm = theta;
    tp[b] += h;
    tm[b] -= h;
    EXPECT_NEAR((f.evaluate(tp).log_partition - f.evaluate(tm).log_partition) / (2 * h), -st.mean[b], 1e-8);
    const Vector dmean = (f.evaluate(tp).mean - f.evaluate(tm).mean) / (2 * h);
    for (Eigen::Index a = 0; a < 2; ++a) EXPECT_NEAR(-dmean[a], st.covariance(a, b), 1e-7);
  }
  EXPECT_NEAR(f.km_variance(theta, stats[0]), st.covariance(0, 0), 1e-12);
  EXPECT_NEAR(f.km_cross(theta, stats[1])[0], st.covariance(0, 1), 1e-12);
}

TEST(TwoStateModel, ClassicalBinomialHasNoCorrection) {
  for (double alpha : {0.0, 0.5, 1.0, 3.0}) {
    const TwoStateResult r = two_state_model({0.0, 0.0, 0.0}, alpha);
    EXPECT_NEAR(r.psi, 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(r.p_plus, 1.0);
    EXPECT_DOUBLE_EQ(r.p_minus, 0.0);
    EXPECT_NEAR(r.p, 0.5, 1e-15);
  }
}

TEST(TwoStateModel, MaximalRotationFixedPoint) {
  const TwoStateResult r = two_state_model({kPi / 4, 1.0, 0.0}, 1.0);
  EXPECT_NEAR(r.psi, kPi / 4, 1e-15);
  EXPECT_NEAR(r.p, scalar_fixed_point(), 1e-12);
  EXPECT_NEAR(r.p, 0.4159, 1e-4);
  EXPECT_NEAR(two_state_model({kPi / 4, 1.0, 0.0}, 1e-8).p, 0.5, 1e-7);
}

TEST(SolveQuantum, MatchesTwoStateModel) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    for (double k = -2.0; k <= 2.0 + 1e-12; k += 0.25) {
      for (double theta : {kPi / 4, 0.3}) {
        const TwoStateSpec spec{theta, theta == 0.3 ? 0.5 : 1.0, k, PayoffKind::Call};
        const QuantumMarket m = two_state_market(spec);
        const HermitianOperator P = spread_payoff(m.ops[1], m.ops[0], k, positive_part);
        const QuantumHedge h = solve_quantum(m, P, alpha);
        const TwoStateResult ref = two_state_model(spec, alpha);
        EXPECT_NEAR(h.p, ref.p, 1e-9) << "k=" << k << " alpha=" << alpha;
        EXPECT_NEAR(h.delta[0], ref.p, 1e-9);
        EXPECT_NEAR(h.delta[1], ref.delta, 1e-9);
        EXPECT_NEAR(h.phi.norm(), 0.0, 1e-12);
        EXPECT_NEAR(h.r, 0.0, 1e-12);
      }
    }
  }
}

TEST(SolveQuantum, SurePayoffIsFunded) {
  std::mt19937_64 rng(2);
  QuantumMarket m;
  m.q = vec({1.0, 0.2});
  m.ops = {HermitianOperator::identity(3) * 1.05, random_hermitian(rng, 3) * 0.3 + HermitianOperator::identity(3) * 0.2};
  m.dt = 0.5;
  const QuantumCalibration c = calibrate_quantum(m);
  EXPECT_LE(c.residual_norm, 1e-10);
  const double cash = 2.5;
  const QuantumHedge h = solve_quantum(m, c, HermitianOperator::identity(3) * cash, 1.0);
  EXPECT_NEAR(h.p, cash / (1 + c.r * m.dt), 1e-10);
  EXPECT_NEAR(h.delta.dot(m.q), h.p, 1e-10);
}

TEST(SolveQuantum, CommutingMarketReducesToClassical) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z;
  const Eigen::Index n = 6;
  Matrix Qs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) Qs.row(i) << 1.0 + 0.05 * z(rng), 1.0 + 0.3 * z(rng);
  SampleMarket cm;
  cm.q = vec({1.0, 1.02});
  cm.Q = Qs;
  cm.dt = 1.0;
  const Vector payoff = Qs.col(1).unaryExpr([](double x) { return std::max(x - 1.0, 0.0); });

  // A common random basis keeps the operators commuting without being diagonal.
  const ComplexMatrix U = spectrum(random_hermitian(rng, n)).vectors;
  auto rotate = [&U](const Vector& d) { return HermitianOperator(U * d.cast<std::complex<double>>().asDiagonal() * U.adjoint()); };
  QuantumMarket qm;
  qm.q = cm.q;
  qm.ops = {rotate(Qs.col(0)), rotate(Qs.col(1))};
  const HermitianOperator P = rotate(payoff);

  const CalibrationResult cc = calibrate(cm, Measure::uniform(n));
  const QuantumCalibration qc = calibrate_quantum(qm);
  EXPECT_NEAR((cc.phi - qc.phi).norm(), 0.0, 1e-10);
  EXPECT_NEAR(cc.r, qc.r, 1e-10);

  for (double alpha : {-1.0, 0.5, 2.0}) {
    const HedgeResult ch = solve_hedge(cm, cc, payoff, alpha);
    const QuantumHedge qh = solve_quantum(qm, qc, P, alpha);
    EXPECT_NEAR(ch.p, qh.p, 1e-10);
    EXPECT_NEAR((ch.delta - qh.delta).norm(), 0.0, 1e-10);
    EXPECT_NEAR(ch.s, qh.s, 1e-10);
  }
  const OrderBook ob = order_book(cm, cc, payoff, 1.0);
  const QuantumMid mid = quantum_mid(qm, qc, P);
  EXPECT_NEAR(ob.p0, mid.p0, 1e-10);
  EXPECT_NEAR((ob.delta - mid.delta).norm(), 0.0, 1e-10);
  EXPECT_NEAR(ob.s, mid.s, 1e-10);
  EXPECT_NEAR(ob.p_pm, mid.spread_per_alpha, 1e-10);
}

TEST(QuantumMid, MaximalRotationAtTheMoney) {
  const TwoStateSpec spec{kPi / 4, 1.0, 0.0};
  const QuantumMarket m = two_state_market(spec);
  const HermitianOperator P = spread_payoff(m.ops[1], m.ops[0], 0.0, positive_part);
  const QuantumMid mid = quantum_mid(m, P);
  EXPECT_NEAR(mid.p0, 0.5, 1e-14);
  EXPECT_NEAR(mid.delta[0], 0.5, 1e-12);
  EXPECT_GT(mid.spread_per_alpha, 0.0);
}

TEST(QuantumMid, MatchesSmallAlphaExpansion) {
  const TwoStateSpec spec{0.4, 0.6, 0.2};
  const QuantumMarket m = two_state_market(spec);
  const HermitianOperator P = spread_payoff(m.ops[1], m.ops[0], spec.strike, positive_part);
  const QuantumMid mid = quantum_mid(m, P);
  const double a = 1e-4;
  const QuantumHedge bid = solve_quantum(m, P, a);
  const QuantumHedge offer = solve_quantum(m, P, -a);
  EXPECT_NEAR(0.5 * (bid.p + offer.p), mid.p0, 1e-7);
  EXPECT_NEAR((offer.p - bid.p) / a, mid.spread_per_alpha, 1e-6);
  EXPECT_NEAR((0.5 * (bid.delta + offer.delta) - mid.delta).norm(), 0.0, 1e-7);
}

TEST(QuantumSpread, VanishesOnlyWithoutRotation) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    for (double k : {-0.5, 0.0, 0.5}) {
      const TwoStateSpec flat{0.0, 0.5, k};
      const QuantumMarket m0 = two_state_market(flat);
      const HermitianOperator P0 = spread_payoff(m0.ops[1], m0.ops[0], k, positive_part);
      EXPECT_NEAR(solve_quantum(m0, P0, -alpha).p - solve_quantum(m0, P0, alpha).p, 0.0, 1e-12);

      const TwoStateSpec rotated{0.3, 0.5, k};
      const QuantumMarket m1 = two_state_market(rotated);
      const HermitianOperator P1 = spread_payoff(m1.ops[1], m1.ops[0], k, positive_part);
      EXPECT_GT(solve_quantum(m1, P1, -alpha).p - solve_quantum(m1, P1, alpha).p, 1e-6);
    }
  }
}

TEST(ImpliedDistribution, CommutingGivesAtomsOnly) {
  const HermitianOperator Q = HermitianOperator::diagonal(vec({-0.7, 0.4, 1.3}));
  const HermitianOperator B = HermitianOperator::identity(3);
  const Vector strikes = Vector::LinSpaced(401, -2.0, 2.0);
  const ImpliedDistribution d = implied_distribution(Q, B, strikes);
  ASSERT_EQ(d.atoms.size(), 3u);
  for (const ImpliedAtom& a : d.atoms) {
    EXPECT_NEAR(a.x, Q.matrix()(a.branch, a.branch).real(), 1e-12);
    EXPECT_NEAR(a.w, 1.0 / 3.0, 1e-12);
  }
  EXPECT_LE(d.density.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(d.violations.empty());
  EXPECT_NEAR(d.call_value(0.0), (0.4 + 1.3) / 3.0, 1e-12);
}

TEST(ImpliedDistribution, MaximalRotationDensity) {
  const QuantumMarket m = two_state_market({kPi / 4, 1.0, 0.0});
  const Vector strikes = Vector::LinSpaced(12001, -6.0, 6.0);
  const ImpliedDistribution d = implied_distribution(m.ops[1], m.ops[0], strikes);
  EXPECT_TRUE(d.atoms.empty());
  EXPECT_TRUE(d.violations.empty());
  for (Eigen::Index i = 0; i < strikes.size(); ++i) {
    const double x = strikes[i];
    if (std::abs(x) > 3.0) continue;
    EXPECT_NEAR(d.density[i], 0.5 * std::pow(1 + x * x, -1.5), 1e-6) << "x=" << x;
  }
  for (double k = -3.0; k <= 3.0; k += 0.125) {
    const double exact = 0.5 * (std::sqrt(1 + k * k) - k);
    const double trace = trace_mean(spread_payoff(m.ops[1], m.ops[0], k, positive_part));
    EXPECT_NEAR(trace, exact, 1e-12);
    EXPECT_NEAR(d.call_value(k), exact, 1e-6) << "k=" << k;
  }
}

TEST(ImpliedDistribution, BranchesDecreaseForPositiveFunding) {
  std::mt19937_64 rng(31);
  const HermitianOperator Q = random_hermitian(rng, 4);
  const HermitianOperator B = HermitianOperator::diagonal(vec({0.8, 1.0, 1.1, 1.4}));
  const Vector strikes = Vector::LinSpaced(801, -8.0, 8.0);
  const ImpliedDistribution d = implied_distribution(Q, B, strikes);
  EXPECT_LT(d.slopes.maxCoeff(), 0.0);
  for (Eigen::Index b = 0; b < 4; ++b) {
    for (Eigen::Index m = 1; m + 1 < strikes.size(); m += 50) {
      const double h = strikes[1] - strikes[0];
      const double fd = (d.branches(b, m + 1) - d.branches(b, m - 1)) / (2 * h);
      EXPECT_NEAR(d.slopes(b, m), fd, 1e-4);
    }
  }
  // Mid-price decomposition on the grid.
  for (double k : {-1.0, 0.0, 0.7}) {
    const double trace = trace_mean(spread_payoff(Q, B, k, positive_part));
    EXPECT_NEAR(d.call_value(k), trace, 1e-4) << "k=" << k;
  }
}

TEST(ImpliedDistribution, RejectsIndefiniteFunding) {
  const HermitianOperator Q = real_op({{0, 1}, {1, 0}});
  EXPECT_THROW(implied_distribution(Q, HermitianOperator::diagonal(vec({1, -0.5})), Vector::LinSpaced(11, -1, 1)),
               InvalidInput);
}
