#include "entropic/model_risk.hpp"

#include <cmath>

#include "entropic/error.hpp"

namespace entropic {

namespace {

const Measure& price_measure(const SampleMarket& market, const CalibrationResult& calib, const VectorRef& W) {
  if (!calib.gamma) throw InvalidInput("calibration carries no price measure");
  if (W.size() != market.outcomes() || !W.allFinite()) throw InvalidInput("perturbation has the wrong outcome count");
  return *calib.gamma;
}

}  // namespace

CalibrationSensitivity perturb_calibration(const SampleMarket& market, const CalibrationResult& calib,
                                           const VectorRef& W) {
  const Measure& gamma = price_measure(market, calib, W);
  const Matrix dq = market.dq();
  // V dphi + q dr dt = V[dq, W] with dphi . q = 0.
  const BorderedSolution sol =
      bordered_solve(calib.directions, covariance_matrix(gamma, dq), market.q, cross_covariance(gamma, dq, W), 0.0);
  return {sol.y / market.dt, sol.x};
}

double price_sensitivity(const SampleMarket& market, const CalibrationResult& calib, const HedgeResult& hedge,
                         const VectorRef& P, const VectorRef& W, double alpha) {
  const Measure& gamma = price_measure(market, calib, W);
  if (P.size() != market.outcomes()) throw InvalidInput("payoff has the wrong outcome count");
  const Matrix dq = market.dq();
  const CalibrationSensitivity cs = perturb_calibration(market, calib, W);
  const Vector Y = W - dq * cs.dphi;
  const Vector X = P - dq * hedge.delta;
  const double growth = 1.0 + (calib.r + alpha * hedge.s) * market.dt;
  if (alpha == 0.0) return covariance(gamma, Y, X) / growth;
  const Eigen::ArrayXd a = -alpha * X.array();
  const Vector K = (a - a.maxCoeff()).exp().matrix();
  return covariance(gamma, Y, -K / (alpha * expectation(gamma, K))) / growth;
}

Reprice reweighted_reprice(const SampleMarket& market, const Measure& m, const VectorRef& W, double eps,
                           const VectorRef& P, double alpha, const SolverConfig& cfg) {
  if (W.size() != m.size() || !W.allFinite()) throw InvalidInput("perturbation has the wrong outcome count");
  const Measure perturbed = Measure::from_log_weights(m.weights().array().log().matrix() + eps * W);
  Reprice out{calibrate(market, perturbed, cfg), {}};
  out.hedge = solve_hedge(market, out.calib, P, alpha, cfg);
  return out;
}

}  // namespace entropic
