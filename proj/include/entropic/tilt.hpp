#pragma once

// Exponential families exp(base - theta . Z) over a finite outcome space or a
// finite-dimensional Hilbert space, and the budget-constrained minimisation of their
// log-partition function. Calibration, hedging and threshold pricing all reduce to it.

#include "entropic/measure.hpp"

namespace entropic {

struct SolverConfig {
  double tol = 1e-12;
  int max_iter = 100;
  // Newton step halvings allowed per iteration.
  int damping = 30;
  // Covariance eigenvalues below variance_floor * (largest eigenvalue) mark
  // deterministic directions.
  double variance_floor = 1e-12;
};

struct TiltState {
  double log_partition = 0.0;
  Vector mean;        // E^theta[Z]
  Matrix covariance;  // -d mean / d theta
};

class TiltFamily {
 public:
  virtual ~TiltFamily() = default;
  virtual Eigen::Index dim() const = 0;
  // Returns a state with a non-finite log_partition if theta is out of range.
  virtual TiltState evaluate(const Vector& theta) const = 0;
};

// Weights proportional to exp(log_base_i - theta . Z_i), Z with one row per outcome.
class SampleFamily final : public TiltFamily {
 public:
  SampleFamily(Vector log_base, Matrix stats);

  Eigen::Index dim() const override { return stats_.cols(); }
  TiltState evaluate(const Vector& theta) const override;
  Measure measure(const Vector& theta) const;

 private:
  Vector log_base_;
  Matrix stats_;
};

// Orthonormal split of parameter space into directions where theta . Z has positive
// variance and directions where it is constant.
struct Subspace {
  Matrix stochastic;     // n x k
  Matrix deterministic;  // n x d
  Vector det_values;     // deterministic' * Z, constant across outcomes
};

Subspace split_directions(const TiltState& state, double variance_floor);

// When the deterministic directions carry a nonzero cost they fix the multiplier of
// the budget constraint; this returns it, or NaN when they do not. Throws
// InvalidInput when the deterministic directions are mutually inconsistent.
double pinned_multiplier(const Subspace& sub, const Vector& q);

// Solves C x + q y = rhs, q . x = budget for C positive semidefinite with null space
// spanned by sub.deterministic.
struct BorderedSolution {
  Vector x;
  double y;
};

BorderedSolution bordered_solve(const Subspace& sub, const Matrix& C, const Vector& q, const Vector& rhs,
                                double budget);

struct TiltSolution {
  Vector theta;
  double multiplier = 0.0;  // E^theta[Z] = multiplier * q
  TiltState state;
  double residual = 0.0;  // |E^theta[Z] - multiplier q|
  int iterations = 0;
};

// Minimises log Z(theta) subject to theta . q = budget by damped Newton, starting from
// the projection of *start onto the budget hyperplane when given.
TiltSolution minimize_tilt(const TiltFamily& family, const Subspace& sub, const Vector& q, double budget,
                           const SolverConfig& cfg, const Vector* start = nullptr);

// Price of a hedged position. The family's base must already carry -alpha P on top of
// the price measure, whose log normaliser is log_norm. With theta = -alpha delta and
// budget theta . q = -alpha p, the price solves
//   -(1/alpha) (min log Z - log_norm) - p = 0,
// which is decreasing in p with slope -(1 + multiplier).
struct PricedTilt {
  TiltSolution solution;
  double p = 0.0;
  double value_residual = 0.0;
  int iterations = 0;  // inner Newton iterations summed over the outer search
};

PricedTilt price_by_tilt(const TiltFamily& family, const Subspace& sub, const Vector& q, double alpha,
                         double log_norm, double p_start, const SolverConfig& cfg);

}  // namespace entropic
