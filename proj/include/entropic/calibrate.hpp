#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "entropic/measure.hpp"
#include "entropic/tilt.hpp"

namespace entropic {

// Initial prices q and final prices Q (one row per outcome) of the traded assets.
struct SampleMarket {
  Vector q;
  Matrix Q;
  double dt = 1.0;

  Eigen::Index assets() const { return q.size(); }
  Eigen::Index outcomes() const { return Q.rows(); }
  Matrix dq() const { return Q.rowwise() - q.transpose(); }
};

// Throws InvalidInput on dimension mismatch, non-finite entries, dt <= 0 or q = 0.
void validate(const SampleMarket& market, const Measure& m);

// Price measure gamma proportional to m exp(-phi . dq) with E^gamma[dq] = q r dt and
// phi . q = 0.
struct CalibrationResult {
  Vector phi;
  double r = 0.0;
  std::optional<Measure> gamma;  // absent for closed-form normal calibration
  double residual_norm = 0.0;    // |E^gamma[dq] - q r dt|
  int iterations = 0;
  Subspace directions;
};

CalibrationResult calibrate(const SampleMarket& market, const Measure& m, const SolverConfig& cfg = {});

// dq jointly normal with the given mean and positive definite covariance.
CalibrationResult calibrate_normal(const Vector& mean_dq, const Matrix& cov, const Vector& q, double dt);

// Independent assets: Q normal with mean q (1 + mu dt) and variance q^2 sigma^2 dt, or
// Q = 0 with probability w and 1 + c dt otherwise.
struct NormalAsset {
  double mu;
  double sigma;
};

struct BinomialAsset {
  double c;
  double w;
};

using IndependentAsset = std::variant<NormalAsset, BinomialAsset>;

struct FundingRate {
  double r;
  Vector phi;
};

FundingRate funding_rate_independent(const std::vector<IndependentAsset>& assets, const Vector& q, double dt);

// S[Ebar|E] - S[gamma|E] for a measure Ebar that also prices the market. Throws
// InvalidInput if Ebar violates E^bar[dq] = q r dt by more than tol.
double min_entropy_check(const SampleMarket& market, const Measure& m, const CalibrationResult& calib,
                         const Measure& ebar, double tol = 1e-9);

}  // namespace entropic
