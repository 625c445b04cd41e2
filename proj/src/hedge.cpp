#include "entropic/hedge.hpp"

#include <algorithm>
#include <cmath>

#include "entropic/error.hpp"

namespace entropic {

namespace {

const Measure& price_measure(const CalibrationResult& calib) {
  if (!calib.gamma) throw InvalidInput("calibration carries no price measure");
  return *calib.gamma;
}

void check_payoff(const SampleMarket& market, const VectorRef& P) {
  if (P.size() != market.outcomes()) throw InvalidInput("payoff has the wrong outcome count");
  if (!P.allFinite()) throw InvalidInput("payoff is not finite");
}

HedgeResult mid_hedge(const SampleMarket& market, const CalibrationResult& calib, const VectorRef& P) {
  const Measure& gamma = price_measure(calib);
  const Matrix dq = market.dq();
  const double growth = 1.0 + calib.r * market.dt;
  HedgeResult out;
  out.p = expectation(gamma, P) / growth;
  const BorderedSolution sol = bordered_solve(calib.directions, covariance_matrix(gamma, dq), market.q,
                                              cross_covariance(gamma, dq, P), out.p);
  out.delta = sol.x;
  out.s = -sol.y / market.dt;
  out.residual_variance = variance(gamma, P - dq * out.delta);
  return out;
}

}  // namespace

HedgeResult solve_hedge(const SampleMarket& market, const CalibrationResult& calib, const VectorRef& P, double alpha,
                        const SolverConfig& cfg) {
  check_payoff(market, P);
  if (!std::isfinite(alpha)) throw InvalidInput("hedging needs finite risk aversion");
  if (alpha == 0.0) return mid_hedge(market, calib, P);

  const Measure& gamma = price_measure(calib);
  const Matrix dq = market.dq();
  const SampleFamily family(gamma.weights().array().log().matrix() - alpha * P, dq);
  const double p_mid = expectation(gamma, P) / (1.0 + calib.r * market.dt);
  const PricedTilt priced = price_by_tilt(family, calib.directions, market.q, alpha, 0.0, p_mid, cfg);

  HedgeResult out;
  out.delta = -priced.solution.theta / alpha;
  out.p = priced.p;
  out.s = (priced.solution.multiplier - calib.r * market.dt) / (alpha * market.dt);
  out.residual_variance = variance(gamma, P - dq * out.delta);
  out.residual = std::max(priced.value_residual, priced.solution.residual);
  out.iterations = priced.iterations;
  return out;
}

HedgeResult hedge_normal(const Vector& mean, const Matrix& cov, const Vector& q, double dt, double alpha,
                         const CalibrationResult& calib) {
  const Eigen::Index n = q.size();
  if (mean.size() != n + 1 || cov.rows() != n + 1 || cov.cols() != n + 1) {
    throw InvalidInput("normal hedge expects mean and covariance over (dq, P)");
  }
  if (!std::isfinite(alpha)) throw InvalidInput("hedging needs finite risk aversion");
  const Matrix V = cov.topLeftCorner(n, n);
  const Vector c = cov.topRightCorner(n, 1);
  const double var_p = cov(n, n);
  Eigen::LLT<Matrix> llt(V);
  if (llt.info() != Eigen::Success) throw InvalidInput("covariance of dq is not positive definite");

  const double growth = 1.0 + calib.r * dt;
  const Vector beta = llt.solve(c);
  const Vector g = llt.solve(q);
  const double G = g.dot(q);
  // Certainty equivalent of the residual of the regression of P on Q.
  const double A = mean[n] - beta.dot(q + mean.head(n)) - 0.5 * alpha * (var_p - beta.dot(c));
  const double disc = 1.0 + 2.0 * alpha * A / (G * growth * growth);
  if (!(disc >= 0.0)) throw SolverFailure("normal hedge has no real solution", disc, 0);
  // (growth / alpha) (sqrt(disc) - 1), written without cancellation.
  const double sdt = 2.0 * A / (growth * G * (std::sqrt(disc) + 1.0));

  HedgeResult out;
  out.delta = beta + sdt * g;
  out.p = out.delta.dot(q);
  out.s = sdt / dt;
  out.residual_variance = var_p - 2.0 * out.delta.dot(c) + out.delta.dot(V * out.delta);
  return out;
}

OrderBook order_book(const SampleMarket& market, const CalibrationResult& calib, const VectorRef& P, double alpha) {
  check_payoff(market, P);
  const HedgeResult mid = mid_hedge(market, calib, P);
  OrderBook book;
  book.p0 = mid.p;
  book.delta = mid.delta;
  book.s = mid.s;
  book.p_pm = alpha * mid.residual_variance / (1.0 + calib.r * market.dt);
  return book;
}

std::vector<HedgeResult> price_curve(const SampleMarket& market, const CalibrationResult& calib, const VectorRef& P,
                                     double alpha, const std::vector<double>& lambdas, const SolverConfig& cfg) {
  check_payoff(market, P);
  std::vector<HedgeResult> out;
  out.reserve(lambdas.size());
  for (double lambda : lambdas) {
    if (!std::isfinite(lambda)) throw InvalidInput("notional must be finite");
    if (lambda == 0.0) {
      out.push_back(mid_hedge(market, calib, P));
      continue;
    }
    HedgeResult h = solve_hedge(market, calib, lambda * P, alpha, cfg);
    h.delta /= lambda;
    h.p /= lambda;
    h.s /= lambda;
    h.residual_variance /= lambda * lambda;
    out.push_back(std::move(h));
  }
  return out;
}

double payoff_value(PayoffKind kind, double x) {
  switch (kind) {
    case PayoffKind::Call:
      return std::max(x, 0.0);
    case PayoffKind::Put:
      return std::max(-x, 0.0);
    case PayoffKind::Digital:
      return x > 0.0 ? 1.0 : 0.0;
    case PayoffKind::Linear:
      return x;
  }
  throw InvalidInput("unknown payoff kind");
}

Vector make_payoff(const SampleMarket& market, PayoffKind kind, Eigen::Index asset, double strike) {
  if (asset < 0 || asset >= market.assets()) throw InvalidInput("payoff asset index out of range");
  if (!std::isfinite(strike)) throw InvalidInput("strike must be finite");
  return market.Q.col(asset).unaryExpr([kind, strike](double v) { return payoff_value(kind, v - strike); });
}

}  // namespace entropic
