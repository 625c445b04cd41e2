#include "entropic/measure.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "entropic/error.hpp"

namespace entropic {

namespace {

void require_positive(const Vector& w) {
  if (w.size() == 0) throw InvalidInput("measure has no outcomes");
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]) || !(w[i] > 0.0)) {
      throw InvalidInput("measure weight " + std::to_string(i) + " is not strictly positive");
    }
  }
}

void require_size(const Measure& m, Eigen::Index rows) {
  if (rows != m.size()) {
    throw InvalidInput("random variable has " + std::to_string(rows) + " outcomes, measure has " +
                       std::to_string(m.size()));
  }
}

void require_finite(const VectorRef& x) {
  if (!x.allFinite()) throw InvalidInput("random variable has non-finite values");
}

// Below this value of |alpha| * range the cumulant expansion mean - alpha var / 2 is
// exact to rounding.
constexpr double kCumulantSwitch = 1e-8;

}  // namespace

Measure::Measure(Vector weights) : w_(std::move(weights)) {
  require_positive(w_);
  if (std::abs(w_.sum() - 1.0) > 1e-12) throw InvalidInput("measure weights do not sum to one");
}

Measure Measure::uniform(Eigen::Index n) {
  if (n <= 0) throw InvalidInput("measure has no outcomes");
  return Measure(Vector::Constant(n, 1.0 / static_cast<double>(n)), Trusted{});
}

Measure Measure::normalised(const VectorRef& weights) {
  Vector w = weights;
  require_positive(w);
  w /= w.sum();
  require_positive(w);
  return Measure(std::move(w), Trusted{});
}

Measure Measure::from_log_weights(const VectorRef& log_weights) {
  if (log_weights.size() == 0) throw InvalidInput("measure has no outcomes");
  if (log_weights.hasNaN()) throw InvalidInput("non-normalisable tilt: NaN log weight");
  const double top = log_weights.maxCoeff();
  if (!std::isfinite(top)) throw InvalidInput("non-normalisable tilt: infinite log weight");
  // Vectorised exp clamps its argument, so underflow is detected on the log scale.
  if (log_weights.minCoeff() - top < std::log(std::numeric_limits<double>::min())) {
    throw InvalidInput("non-normalisable tilt: a weight underflows to zero");
  }
  Vector w = (log_weights.array() - top).exp().matrix();
  w /= w.sum();
  return Measure(std::move(w), Trusted{});
}

double expectation(const Measure& m, const VectorRef& x) {
  require_size(m, x.size());
  return m.weights().dot(x);
}

Vector column_means(const Measure& m, const MatrixRef& X) {
  require_size(m, X.rows());
  return X.transpose() * m.weights();
}

double variance(const Measure& m, const VectorRef& x) { return covariance(m, x, x); }

double covariance(const Measure& m, const VectorRef& x, const VectorRef& y) {
  require_size(m, x.size());
  require_size(m, y.size());
  const double mx = m.weights().dot(x);
  const double my = m.weights().dot(y);
  return (m.weights().array() * (x.array() - mx) * (y.array() - my)).sum();
}

Matrix covariance_matrix(const Measure& m, const MatrixRef& X) { return cross_covariance(m, X, X); }

Matrix cross_covariance(const Measure& m, const MatrixRef& X, const MatrixRef& Y) {
  require_size(m, X.rows());
  require_size(m, Y.rows());
  const Matrix Xc = X.rowwise() - (X.transpose() * m.weights()).transpose();
  const Matrix Yc = Y.rowwise() - (Y.transpose() * m.weights()).transpose();
  return Xc.transpose() * m.weights().asDiagonal() * Yc;
}

Moments moments(const Measure& m, const MatrixRef& X, const MatrixRef& Y) {
  return {column_means(m, X), column_means(m, Y), covariance_matrix(m, X), cross_covariance(m, X, Y)};
}

double entropy_adjusted_mean(const Measure& m, const VectorRef& dc, double alpha) {
  require_size(m, dc.size());
  require_finite(dc);
  if (std::isnan(alpha)) throw InvalidInput("risk aversion is NaN");
  if (alpha == kInfinity) return dc.minCoeff();
  if (alpha == -kInfinity) return dc.maxCoeff();

  const Vector& w = m.weights();
  const double mean = w.dot(dc);
  const double range = dc.maxCoeff() - dc.minCoeff();
  if (range == 0.0) return mean;
  if (std::abs(alpha) * range < kCumulantSwitch) {
    return mean - 0.5 * alpha * variance(m, dc);
  }

  // K = log E exp(a) with a = -alpha (dc - mean); the result is mean - K / alpha.
  const Eigen::ArrayXd a = -alpha * (dc.array() - mean);
  const double top = a.maxCoeff();
  double log_mgf;
  if (top <= 0.5 && a.minCoeff() >= -0.5) {
    log_mgf = std::log1p((w.array() * a.unaryExpr([](double v) { return std::expm1(v); })).sum());
  } else {
    log_mgf = top + std::log((w.array() * (a - top).exp()).sum());
  }
  return mean - log_mgf / alpha;
}

Measure exponential_tilt(const Measure& m, const VectorRef& x, double alpha, double zeta) {
  require_size(m, x.size());
  require_finite(x);
  if (!std::isfinite(alpha) || !std::isfinite(zeta)) {
    throw InvalidInput("non-normalisable tilt: tilt coefficients must be finite");
  }
  const Vector log_w =
      m.weights().array().log() - alpha * x.array() - 0.5 * zeta * x.array().square();
  return Measure::from_log_weights(log_w);
}

double relative_entropy(const Measure& mbar, const Measure& m) {
  require_size(m, mbar.size());
  const auto& a = mbar.weights().array();
  return (a * (a.log() - m.weights().array().log())).sum();
}

EssBounds ess_bounds(const Measure& m, const VectorRef& x) {
  require_size(m, x.size());
  return {x.minCoeff(), x.maxCoeff()};
}

}  // namespace entropic
