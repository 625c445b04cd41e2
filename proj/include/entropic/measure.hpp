#pragma once

#include <Eigen/Dense>
#include <limits>

namespace entropic {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Vector>;
using MatrixRef = Eigen::Ref<const Matrix>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// A discrete probability measure with strictly positive weights summing to one.
// Random variables on it are Eigen vectors (one entry per outcome) or matrices
// (one row per outcome, one column per component).
class Measure {
 public:
  // Throws InvalidInput unless every weight is finite and positive and the sum is
  // within 1e-12 of one.
  explicit Measure(Vector weights);

  static Measure uniform(Eigen::Index n);
  // Divides by the sum; the result must still be strictly positive.
  static Measure normalised(const VectorRef& weights);
  // Weights proportional to exp(log_weights), computed with the maximum subtracted.
  static Measure from_log_weights(const VectorRef& log_weights);

  const Vector& weights() const { return w_; }
  Eigen::Index size() const { return w_.size(); }

 private:
  struct Trusted {};
  Measure(Vector weights, Trusted) : w_(std::move(weights)) {}

  Vector w_;
};

double expectation(const Measure& m, const VectorRef& x);
Vector column_means(const Measure& m, const MatrixRef& X);
double variance(const Measure& m, const VectorRef& x);
double covariance(const Measure& m, const VectorRef& x, const VectorRef& y);
Matrix covariance_matrix(const Measure& m, const MatrixRef& X);
Matrix cross_covariance(const Measure& m, const MatrixRef& X, const MatrixRef& Y);

struct Moments {
  Vector mean_x;
  Vector mean_y;
  Matrix cov_xx;
  Matrix cov_xy;
};

Moments moments(const Measure& m, const MatrixRef& X, const MatrixRef& Y);

// -(1/alpha) log E[exp(-alpha dc)]. alpha = 0 is the mean, +inf the essential
// infimum and -inf the essential supremum.
double entropy_adjusted_mean(const Measure& m, const VectorRef& dc, double alpha);

// Weights proportional to m exp(-alpha x - zeta x^2 / 2). Throws InvalidInput if a
// weight underflows, since the result would no longer be equivalent to m.
Measure exponential_tilt(const Measure& m, const VectorRef& x, double alpha, double zeta = 0.0);

// S[mbar|m] = sum mbar log(mbar/m).
double relative_entropy(const Measure& mbar, const Measure& m);

struct EssBounds {
  double inf;
  double sup;
};

EssBounds ess_bounds(const Measure& m, const VectorRef& x);

}  // namespace entropic
