#include "entropic/calibrate.hpp"

#include <cmath>
#include <string>

#include "detail/roots.hpp"
#include "entropic/error.hpp"

namespace entropic {

void validate(const SampleMarket& market, const Measure& m) {
  if (market.q.size() == 0) throw InvalidInput("market has no assets");
  if (market.Q.cols() != market.q.size()) throw InvalidInput("Q has a different asset count than q");
  if (market.Q.rows() != m.size()) {
    throw InvalidInput("Q has " + std::to_string(market.Q.rows()) + " outcomes, measure has " +
                       std::to_string(m.size()));
  }
  if (!market.q.allFinite() || !market.Q.allFinite()) throw InvalidInput("market prices are not finite");
  if (!(market.dt > 0.0) || !std::isfinite(market.dt)) throw InvalidInput("dt must be positive");
  if (market.q.cwiseAbs().maxCoeff() == 0.0) throw InvalidInput("q has no nonzero entry");
}

CalibrationResult calibrate(const SampleMarket& market, const Measure& m, const SolverConfig& cfg) {
  validate(market, m);
  const SampleFamily family(m.weights().array().log().matrix(), market.dq());
  const Eigen::Index n = market.assets();
  const Subspace sub = split_directions(family.evaluate(Vector::Zero(n)), cfg.variance_floor);
  const TiltSolution sol = minimize_tilt(family, sub, market.q, 0.0, cfg);

  CalibrationResult out;
  out.phi = sol.theta;
  out.r = sol.multiplier / market.dt;
  out.gamma = family.measure(sol.theta);
  out.residual_norm = sol.residual;
  out.iterations = sol.iterations;
  out.directions = sub;
  return out;
}

CalibrationResult calibrate_normal(const Vector& mean_dq, const Matrix& cov, const Vector& q, double dt) {
  const Eigen::Index n = q.size();
  if (mean_dq.size() != n || cov.rows() != n || cov.cols() != n) {
    throw InvalidInput("normal market dimensions disagree");
  }
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw InvalidInput("covariance is not positive definite");
  const Vector g = llt.solve(q);
  const double rdt = g.dot(mean_dq) / g.dot(q);

  CalibrationResult out;
  out.phi = llt.solve(mean_dq - q * rdt);
  out.r = rdt / dt;
  out.directions.stochastic = Matrix::Identity(n, n);
  out.directions.deterministic = Matrix(n, 0);
  out.directions.det_values = Vector(0);
  return out;
}

FundingRate funding_rate_independent(const std::vector<IndependentAsset>& assets, const Vector& q, double dt) {
  const auto n = static_cast<Eigen::Index>(assets.size());
  if (n == 0 || q.size() != n) throw InvalidInput("asset list and q disagree");
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");

  double lower = -1.0 / dt;  // 1 + r dt > 0
  double upper = kInfinity;
  bool any_binomial = false;
  double precision_sum = 0.0;
  double weighted_mu = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (const auto* a = std::get_if<NormalAsset>(&assets[i])) {
      if (!(a->sigma > 0.0) || q[i] == 0.0) throw InvalidInput("normal asset needs sigma > 0 and q != 0");
      precision_sum += 1.0 / (a->sigma * a->sigma);
      weighted_mu += a->mu / (a->sigma * a->sigma);
    } else {
      const auto& b = std::get<BinomialAsset>(assets[i]);
      if (!(b.w > 0.0 && b.w < 1.0)) throw InvalidInput("binomial default probability must be in (0, 1)");
      if (!(q[i] > 0.0) || !(1.0 + b.c * dt > 0.0)) throw InvalidInput("binomial asset needs q > 0 and 1 + c dt > 0");
      upper = std::min(upper, ((1.0 + b.c * dt) / q[i] - 1.0) / dt);
      any_binomial = true;
    }
  }

  auto phi_at = [&](double r) {
    Vector phi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (const auto* a = std::get_if<NormalAsset>(&assets[i])) {
        phi[i] = (a->mu - r) / (q[i] * a->sigma * a->sigma);
      } else {
        const auto& b = std::get<BinomialAsset>(assets[i]);
        const double up = 1.0 + b.c * dt;
        phi[i] = std::log((1.0 - b.w) / b.w * (up / (q[i] * (1.0 + r * dt)) - 1.0)) / up;
      }
    }
    return phi;
  };

  if (!any_binomial) {
    const double r = weighted_mu / precision_sum;
    return {r, phi_at(r)};
  }
  if (!(upper > lower)) throw InvalidInput("binomial assets admit no funding rate with 1 + r dt > 0");

  auto budget = [&](double r) { return phi_at(r).dot(q); };
  // The binomial terms diverge at both ends of (lower, upper); step inwards until the
  // divergence dominates the normal terms.
  const double width = upper - lower;
  double lo = lower + 0.5 * width;
  double hi = lo;
  for (double h = 0.1; h > 1e-300 && !(budget(lo) > 0.0); h *= 0.1) lo = lower + h * width;
  for (double h = 0.1; h > 1e-300 && !(budget(hi) < 0.0); h *= 0.1) hi = upper - h * width;
  const double r = detail::brent(budget, lo, hi, 1e-16);
  return {r, phi_at(r)};
}

double min_entropy_check(const SampleMarket& market, const Measure& m, const CalibrationResult& calib,
                         const Measure& ebar, double tol) {
  validate(market, m);
  if (!calib.gamma) throw InvalidInput("calibration carries no price measure");
  if (ebar.size() != m.size()) throw InvalidInput("candidate measure has the wrong outcome count");
  const Vector gap = column_means(ebar, market.dq()) - market.q * (calib.r * market.dt);
  if (gap.norm() > tol) throw InvalidInput("candidate measure does not price the market");
  return relative_entropy(ebar, m) - relative_entropy(*calib.gamma, m);
}

}  // namespace entropic
