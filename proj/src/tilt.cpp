#include "entropic/tilt.hpp"

#include <cmath>
#include <limits>

#include "entropic/error.hpp"

namespace entropic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Relative size below which a projection of q is treated as zero.
constexpr double kNegligible = 1e-12;

Matrix null_space_of_row(const Vector& row) {
  const Eigen::Index k = row.size();
  if (k <= 1) return Matrix(k, 0);
  Eigen::HouseholderQR<Matrix> qr{Matrix(row)};
  const Matrix Q = qr.householderQ() * Matrix::Identity(k, k);
  return Q.rightCols(k - 1);
}

Vector solve_spd(const Matrix& H, const Vector& rhs) {
  Eigen::LDLT<Matrix> ldlt(H);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    Vector x = ldlt.solve(rhs);
    if (x.allFinite()) return x;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
  const Vector& lam = eig.eigenvalues();
  const double cut = kNegligible * std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  Vector inv = lam.unaryExpr([cut](double v) { return v > cut ? 1.0 / v : 0.0; });
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * rhs;
}

}  // namespace

SampleFamily::SampleFamily(Vector log_base, Matrix stats) : log_base_(std::move(log_base)), stats_(std::move(stats)) {
  if (log_base_.size() != stats_.rows()) throw InvalidInput("family base and statistics disagree on outcome count");
  if (!stats_.allFinite()) throw InvalidInput("family statistics are not finite");
}

TiltState SampleFamily::evaluate(const Vector& theta) const {
  TiltState st;
  const Vector e = log_base_ - stats_ * theta;
  const double top = e.maxCoeff();
  if (!std::isfinite(top)) {
    st.log_partition = kNaN;
    return st;
  }
  const Vector w = (e.array() - top).exp().matrix();
  const double z = w.sum();
  st.log_partition = top + std::log(z);
  const Vector p = w / z;
  st.mean = stats_.transpose() * p;
  const Matrix centred = stats_.rowwise() - st.mean.transpose();
  st.covariance = centred.transpose() * p.asDiagonal() * centred;
  return st;
}

Measure SampleFamily::measure(const Vector& theta) const {
  return Measure::from_log_weights(log_base_ - stats_ * theta);
}

Subspace split_directions(const TiltState& state, double variance_floor) {
  const Eigen::Index n = state.covariance.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(state.covariance);
  const Vector& lam = eig.eigenvalues();
  const double top = n > 0 ? std::max(lam.maxCoeff(), 0.0) : 0.0;
  const double cut = variance_floor * top;
  Eigen::Index d = 0;
  while (d < n && lam[d] <= cut) ++d;
  Subspace sub;
  sub.deterministic = eig.eigenvectors().leftCols(d);
  sub.stochastic = eig.eigenvectors().rightCols(n - d);
  sub.det_values = sub.deterministic.transpose() * state.mean;
  return sub;
}

double pinned_multiplier(const Subspace& sub, const Vector& q) {
  if (sub.deterministic.cols() == 0) return kNaN;
  const Vector dq = sub.deterministic.transpose() * q;
  const Vector& c = sub.det_values;
  const double consistency = 1e-9 * (1.0 + c.norm());
  if (dq.norm() <= kNegligible * q.norm()) {
    if (c.norm() > consistency) {
      throw InvalidInput("arbitrage: a zero-cost deterministic portfolio has a nonzero payoff");
    }
    return kNaN;
  }
  const double rho = dq.dot(c) / dq.squaredNorm();
  if ((c - rho * dq).norm() > consistency) {
    throw InvalidInput("infeasible: deterministic assets imply inconsistent funding returns");
  }
  return rho;
}

BorderedSolution bordered_solve(const Subspace& sub, const Matrix& C, const Vector& q, const Vector& rhs,
                                double budget) {
  const Matrix& S = sub.stochastic;
  const Matrix& D = sub.deterministic;
  const Vector sq = S.transpose() * q;
  const Vector dq = D.transpose() * q;
  const Matrix H = S.transpose() * C * S;
  BorderedSolution out;
  if (D.cols() > 0 && dq.norm() > kNegligible * q.norm()) {
    out.y = dq.dot(D.transpose() * rhs) / dq.squaredNorm();
    const Vector a = solve_spd(H, S.transpose() * (rhs - q * out.y));
    const Vector b = (budget - a.dot(sq)) / dq.squaredNorm() * dq;
    out.x = S * a + D * b;
    return out;
  }
  const Eigen::Index k = S.cols();
  if (k == 0 || sq.norm() <= kNegligible * q.norm()) throw InvalidInput("cost vector q is zero");
  Matrix K = Matrix::Zero(k + 1, k + 1);
  K.topLeftCorner(k, k) = H;
  K.topRightCorner(k, 1) = sq;
  K.bottomLeftCorner(1, k) = sq.transpose();
  Vector r(k + 1);
  r.head(k) = S.transpose() * rhs;
  r[k] = budget;
  const Vector sol = K.fullPivLu().solve(r);
  out.x = S * sol.head(k);
  out.y = sol[k];
  return out;
}

TiltSolution minimize_tilt(const TiltFamily& family, const Subspace& sub, const Vector& q, double budget,
                           const SolverConfig& cfg, const Vector* start) {
  const Matrix& S = sub.stochastic;
  const Matrix& D = sub.deterministic;
  const Eigen::Index n = family.dim();
  if (q.size() != n) throw InvalidInput("cost vector has the wrong dimension");
  const double rho = pinned_multiplier(sub, q);
  const bool pinned = !std::isnan(rho);
  const Vector sq = S.transpose() * q;

  // theta = theta0 + M x parametrises the budget hyperplane.
  Vector theta0;
  Matrix M;
  if (pinned) {
    const Vector dq = D.transpose() * q;
    theta0 = D * dq * (budget / dq.squaredNorm());
    M = S - D * dq * sq.transpose() / dq.squaredNorm();
  } else {
    if (sq.norm() <= kNegligible * q.norm()) throw InvalidInput("cost vector q is zero");
    theta0 = S * sq * (budget / sq.squaredNorm());
    M = S * null_space_of_row(sq);
  }

  auto multiplier_of = [&](const TiltState& st) {
    if (pinned) return rho;
    return sq.dot(S.transpose() * st.mean) / sq.squaredNorm();
  };

  Vector x = Vector::Zero(M.cols());
  TiltState st = family.evaluate(theta0);
  if (start != nullptr && M.cols() > 0) {
    const Vector x0 = M.colPivHouseholderQr().solve(*start - theta0);
    TiltState warm = family.evaluate(theta0 + M * x0);
    if (std::isfinite(warm.log_partition) && warm.mean.allFinite()) {
      x = x0;
      st = std::move(warm);
    }
  }
  if (!std::isfinite(st.log_partition)) throw SolverFailure("tilt is not normalisable at the start", kNaN, 0);
  const double scale = 1.0 + std::sqrt(std::max(st.covariance.trace(), 0.0));

  TiltSolution out;
  for (int it = 0;; ++it) {
    const double lambda = multiplier_of(st);
    const double residual = (st.mean - lambda * q).norm();
    if (residual <= cfg.tol * scale || M.cols() == 0) {
      out.theta = theta0 + M * x;
      out.multiplier = lambda;
      out.state = std::move(st);
      out.residual = residual;
      out.iterations = it;
      return out;
    }
    if (it >= cfg.max_iter) throw SolverFailure("exponential tilt did not converge", residual, it);

    const Vector g = -M.transpose() * st.mean;
    const Matrix H = M.transpose() * st.covariance * M;
    const Vector step = -solve_spd(H, g);
    const double slope = g.dot(step);

    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= cfg.damping; ++h, t *= 0.5) {
      const Vector xt = x + t * step;
      TiltState trial = family.evaluate(theta0 + M * xt);
      if (std::isfinite(trial.log_partition) && trial.mean.allFinite()) {
        const bool armijo = trial.log_partition <= st.log_partition + 1e-4 * t * slope;
        const bool smaller = (M.transpose() * trial.mean).norm() < g.norm();
        if (armijo || smaller) {
          x = xt;
          st = std::move(trial);
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) throw SolverFailure("exponential tilt line search stalled", residual, it);
  }
}

}  // namespace entropic

namespace entropic {

PricedTilt price_by_tilt(const TiltFamily& family, const Subspace& sub, const Vector& q, double alpha,
                         double log_norm, double p_start, const SolverConfig& cfg) {
  if (!(alpha != 0.0) || !std::isfinite(alpha)) throw InvalidInput("hedged price needs finite nonzero alpha");
  PricedTilt out;
  auto value = [&](const TiltSolution& sol, double p) {
    return -(sol.state.log_partition - log_norm) / alpha - p;
  };

  double p = p_start;
  TiltSolution sol = minimize_tilt(family, sub, q, -alpha * p, cfg);
  out.iterations += sol.iterations;
  double v = value(sol, p);
  for (int it = 0;; ++it) {
    if (std::abs(v) <= cfg.tol * (1.0 + std::abs(p))) break;
    if (it >= cfg.max_iter) throw SolverFailure("hedged price search did not converge", std::abs(v), it);
    const double step = v / (1.0 + sol.multiplier);
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= cfg.damping; ++h, t *= 0.5) {
      const double pt = p + t * step;
      try {
        TiltSolution trial = minimize_tilt(family, sub, q, -alpha * pt, cfg, &sol.theta);
        out.iterations += trial.iterations;
        const double vt = value(trial, pt);
        if (std::abs(vt) < std::abs(v)) {
          p = pt;
          v = vt;
          sol = std::move(trial);
          accepted = true;
          break;
        }
      } catch (const SolverFailure&) {
      }
    }
    if (!accepted) throw SolverFailure("hedged price search stalled", std::abs(v), it);
  }
  out.solution = std::move(sol);
  out.p = p;
  out.value_residual = std::abs(v);
  return out;
}

}  // namespace entropic
