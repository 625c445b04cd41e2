#include "entropic/pde.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <string>

#include "entropic/error.hpp"

namespace entropic {

namespace {

using Sparse = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Weights on nodes (i - 1, i, i + 1).
struct Stencil {
  double lo = 0.0;
  double mid = 0.0;
  double hi = 0.0;
};

Stencil central_first(const Vector& x, Eigen::Index i) {
  const double hm = x[i] - x[i - 1], hp = x[i + 1] - x[i];
  return {-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))};
}

Stencil central_second(const Vector& x, Eigen::Index i) {
  const double hm = x[i] - x[i - 1], hp = x[i + 1] - x[i];
  return {2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))};
}

Stencil forward_first(const Vector& x, Eigen::Index i) {
  const double h = x[i + 1] - x[i];
  return {0.0, -1.0 / h, 1.0 / h};
}

Stencil backward_first(const Vector& x, Eigen::Index i) {
  const double h = x[i] - x[i - 1];
  return {-1.0 / h, 1.0 / h, 0.0};
}

// Drift b and diffusion a at an interior node. Central differences unless the cell
// Peclet number |b| h / (2 a) exceeds 1, then one-sided in the upwind direction.
Stencil advection_diffusion(const Vector& x, Eigen::Index i, double b, double a) {
  const double h = std::max(x[i] - x[i - 1], x[i + 1] - x[i]);
  Stencil d1 = central_first(x, i);
  if (std::abs(b) * h > 2.0 * a) d1 = b > 0.0 ? forward_first(x, i) : backward_first(x, i);
  const Stencil d2 = central_second(x, i);
  return {b * d1.lo + a * d2.lo, b * d1.mid + a * d2.mid, b * d1.hi + a * d2.hi};
}

// First derivative on a full axis: central inside, one-sided at the ends.
Stencil derivative(const Vector& x, Eigen::Index i) {
  if (i == 0) return forward_first(x, i);
  if (i == x.size() - 1) return backward_first(x, i);
  return central_first(x, i);
}

void check_axis(const Vector& x, const char* name) {
  if (x.size() < 3) throw InvalidInput(std::string(name) + " axis needs at least 3 nodes");
  if (!x.allFinite() || x[0] < 0.0) throw InvalidInput(std::string(name) + " axis must be finite and non-negative");
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) throw InvalidInput(std::string(name) + " axis must be strictly increasing");
  }
}

void check_time(double T, int steps, int rannacher) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidInput("maturity must be positive");
  if (steps < 1) throw InvalidInput("at least one time step is required");
  if (rannacher < 0 || rannacher > steps) throw InvalidInput("Rannacher start steps must lie in [0, steps]");
}

Vector linspace(Eigen::Index n, double lo, double hi) { return Vector::LinSpaced(n, lo, hi); }

// Linear extrapolation p_N = p_{N-1} + (p_{N-1} - p_{N-2}) h_N / h_{N-1}, so p_qq = 0.
void linear_far_field(std::vector<Triplet>& rows, Eigen::Index row, Eigen::Index at, Eigen::Index prev,
                      Eigen::Index prev2, const Vector& x, Eigen::Index i) {
  const double ratio = (x[i] - x[i - 1]) / (x[i - 1] - x[i - 2]);
  rows.emplace_back(row, at, 1.0);
  rows.emplace_back(row, prev, -(1.0 + ratio));
  rows.emplace_back(row, prev2, ratio);
}

// Marches p_tau = L p + R(p) from the payoff over `steps` levels. Rows flagged
// algebraic hold the far-field constraint A p = 0. R is lagged one level.
class ThetaStepper {
 public:
  ThetaStepper(Eigen::Index n, const std::vector<Triplet>& op, const std::vector<Triplet>& constraints,
               const std::vector<bool>& algebraic, double dt)
      : algebraic_(algebraic), dt_(dt), L_(n, n), A_(n, n) {
    L_.setFromTriplets(op.begin(), op.end());
    std::vector<Triplet> a = constraints;
    for (const Triplet& t : op) a.emplace_back(t.row(), t.col(), -0.5 * dt * t.value());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!algebraic_[static_cast<std::size_t>(i)]) a.emplace_back(i, i, 1.0);
    }
    A_.setFromTriplets(a.begin(), a.end());
    A_.makeCompressed();
    lu_.compute(A_);
    if (lu_.info() != Eigen::Success) throw SolverFailure("finite-difference system is singular", 0.0, 0);
  }

  // Crank-Nicolson step of size dt.
  Vector crank_nicolson(const Vector& p, const Vector& source) const {
    Vector rhs = p + 0.5 * dt_ * (L_ * p) + dt_ * source;
    return solve(rhs);
  }

  // Implicit Euler step of size dt / 2.
  Vector half_euler(const Vector& p, const Vector& source) const {
    Vector rhs = p + 0.5 * dt_ * source;
    return solve(rhs);
  }

 private:
  Vector solve(Vector& rhs) const {
    for (Eigen::Index i = 0; i < rhs.size(); ++i) {
      if (algebraic_[static_cast<std::size_t>(i)]) rhs[i] = 0.0;
    }
    return lu_.solve(rhs);
  }

  std::vector<bool> algebraic_;
  double dt_;
  Sparse L_;
  Sparse A_;
  Eigen::SparseLU<Sparse> lu_;
};

// Runs the backward march; `store` receives each level from t = T down to t = 0.
template <class Source, class Store>
void march(const ThetaStepper& stepper, Vector p, int steps, int rannacher, Source&& source, Store&& store) {
  store(steps, p);
  for (int n = steps - 1; n >= 0; --n) {
    const int taken = steps - 1 - n;
    if (taken < rannacher) {
      p = stepper.half_euler(p, source(p));
      p = stepper.half_euler(p, source(p));
    } else {
      p = stepper.crank_nicolson(p, source(p));
    }
    if (!p.allFinite()) {
      throw SolverFailure("finite-difference march diverged at step " + std::to_string(taken + 1), kInfinity, taken + 1);
    }
    store(n, p);
  }
}

// Average of the payoff over the dual cell of each interior node, by a 64-point
// midpoint rule. A kink on a node then costs O(h^2) instead of a first-order
// constant. End nodes keep point values.
Vector cell_averaged(const ScalarPayoff& payoff, const Vector& x) {
  constexpr int kPoints = 64;
  const Eigen::Index n = x.size();
  Vector out(n);
  out[0] = payoff(x[0]);
  out[n - 1] = payoff(x[n - 1]);
  for (Eigen::Index j = 1; j < n - 1; ++j) {
    const double lo = 0.5 * (x[j - 1] + x[j]);
    const double hi = 0.5 * (x[j] + x[j + 1]);
    double s = 0.0;
    for (int m = 0; m < kPoints; ++m) s += payoff(lo + (hi - lo) * (m + 0.5) / kPoints);
    out[j] = s / kPoints;
  }
  if (!out.allFinite()) throw InvalidInput("payoff is not finite on the grid");
  return out;
}

double interpolate(const Vector& x, double at, Eigen::Index& i) {
  if (!(at >= x[0] && at <= x[x.size() - 1])) throw InvalidInput("interpolation point outside the grid");
  const auto it = std::upper_bound(x.data(), x.data() + x.size(), at);
  i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(it - x.data()) - 1, 0, x.size() - 2);
  return (at - x[i]) / (x[i + 1] - x[i]);
}

}  // namespace

Grid1D default_grid(double q0) {
  if (!(q0 > 0.0) || !std::isfinite(q0)) throw InvalidInput("reference price must be positive");
  return {linspace(201, 0.0, 4.0 * q0), 200, 2};
}

Grid2D default_grid(double q0, double nu_bar) {
  if (!(nu_bar > 0.0) || !std::isfinite(nu_bar)) throw InvalidInput("variance level must be positive");
  const Grid1D g = default_grid(q0);
  return {g.q, linspace(101, 0.0, 8.0 * nu_bar), g.steps, g.rannacher};
}

double BsSurface::value_at(double q0) const {
  Eigen::Index i = 0;
  const double w = interpolate(q, q0, i);
  return (1.0 - w) * p(0, i) + w * p(0, i + 1);
}

double BsSurface::delta_at(double q0) const {
  Eigen::Index i = 0;
  const double w = interpolate(q, q0, i);
  return (1.0 - w) * delta(0, i) + w * delta(0, i + 1);
}

double SvSurface::value_at(double q0, double nu0) const {
  Eigen::Index i = 0, k = 0;
  const double a = interpolate(q, q0, i);
  const double b = interpolate(nu, nu0, k);
  const Matrix& s = p.front();
  return (1.0 - a) * (1.0 - b) * s(i, k) + a * (1.0 - b) * s(i + 1, k) + (1.0 - a) * b * s(i, k + 1) +
         a * b * s(i + 1, k + 1);
}

double SvSurface::delta_at(double q0, double nu0) const {
  Eigen::Index i = 0, k = 0;
  const double a = interpolate(q, q0, i);
  const double b = interpolate(nu, nu0, k);
  const Matrix& s = delta.front();
  return (1.0 - a) * (1.0 - b) * s(i, k) + a * (1.0 - b) * s(i + 1, k) + (1.0 - a) * b * s(i, k + 1) +
         a * b * s(i + 1, k + 1);
}

BsSurface solve_bs_complete(const BsParams& params, const ScalarPayoff& payoff, double T, const Grid1D& grid) {
  if (!(params.nu > 0.0) || !std::isfinite(params.nu) || !std::isfinite(params.r)) {
    throw InvalidInput("Black-Scholes needs finite r and nu > 0");
  }
  check_axis(grid.q, "q");
  check_time(T, grid.steps, grid.rannacher);
  const Vector& q = grid.q;
  const Eigen::Index n = q.size();

  std::vector<Triplet> op, constraints;
  std::vector<bool> algebraic(static_cast<std::size_t>(n), false);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == n - 1 || (j == 0 && q[0] > 0.0)) {
      algebraic[static_cast<std::size_t>(j)] = true;
      if (j == 0) {
        // p_qq = 0 at the lower bound as well when it is not the absorbing q = 0.
        const double ratio = (q[1] - q[0]) / (q[2] - q[1]);
        constraints.emplace_back(0, 0, 1.0);
        constraints.emplace_back(0, 1, -(1.0 + ratio));
        constraints.emplace_back(0, 2, ratio);
      } else {
        linear_far_field(constraints, j, j, j - 1, j - 2, q, j);
      }
      continue;
    }
    op.emplace_back(j, j, -params.r);
    if (j == 0) continue;  // q = 0: pure discounting
    const Stencil s = advection_diffusion(q, j, params.r * q[j], 0.5 * params.nu * q[j] * q[j]);
    op.emplace_back(j, j - 1, s.lo);
    op.emplace_back(j, j, s.mid);
    op.emplace_back(j, j + 1, s.hi);
  }

  const double dt = T / grid.steps;
  const ThetaStepper stepper(n, op, constraints, algebraic, dt);
  const Vector terminal = cell_averaged(payoff, q);

  BsSurface out;
  out.t = linspace(grid.steps + 1, 0.0, T);
  out.q = q;
  out.p.resize(grid.steps + 1, n);
  out.delta.resize(grid.steps + 1, n);
  const Vector zero = Vector::Zero(n);
  march(
      stepper, terminal, grid.steps, grid.rannacher, [&](const Vector&) { return zero; },
      [&](int level, const Vector& p) {
        out.p.row(level) = p.transpose();
        for (Eigen::Index j = 0; j < n; ++j) {
          const Stencil d = derivative(q, j);
          double v = d.mid * p[j];
          if (j > 0) v += d.lo * p[j - 1];
          if (j < n - 1) v += d.hi * p[j + 1];
          out.delta(level, j) = v;
        }
      });
  return out;
}

SvSurface solve_sv_incomplete(const SvParams& params, double alpha, const ScalarPayoff& payoff, double T,
                              const Grid2D& grid) {
  const SvParams& P = params;
  if (!(P.kappa >= 0.0) || !(P.nu_bar >= 0.0) || !(P.eps_vol >= 0.0) || !(std::abs(P.rho) <= 1.0) ||
      !std::isfinite(P.kappa) || !std::isfinite(P.nu_bar) || !std::isfinite(P.eps_vol) || !std::isfinite(P.r) ||
      !std::isfinite(P.mu)) {
    throw InvalidInput("stochastic-volatility parameters out of range");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidInput("risk aversion must be finite and non-negative");
  check_axis(grid.q, "q");
  check_axis(grid.nu, "nu");
  check_time(T, grid.steps, grid.rannacher);

  const Vector& q = grid.q;
  const Vector& nu = grid.nu;
  const Eigen::Index nq = q.size(), nv = nu.size(), n = nq * nv;
  auto idx = [nq](Eigen::Index j, Eigen::Index k) { return j + nq * k; };
  const double eps2 = P.eps_vol * P.eps_vol;
  const double drift_shift = (P.mu - P.r) * P.rho * P.eps_vol;

  std::vector<Triplet> op, constraints;
  std::vector<bool> algebraic(static_cast<std::size_t>(n), false);
  for (Eigen::Index k = 0; k < nv; ++k) {
    const double v = nu[k];
    const double b_nu = P.kappa * (P.nu_bar - v) - drift_shift;
    const double a_nu = 0.5 * eps2 * v;
    const bool nu_edge = k == 0 || k == nv - 1;
    for (Eigen::Index j = 0; j < nq; ++j) {
      const Eigen::Index row = idx(j, k);
      if (j == nq - 1 || (j == 0 && q[0] > 0.0)) {
        algebraic[static_cast<std::size_t>(row)] = true;
        if (j == 0) {
          const double ratio = (q[1] - q[0]) / (q[2] - q[1]);
          constraints.emplace_back(row, row, 1.0);
          constraints.emplace_back(row, idx(1, k), -(1.0 + ratio));
          constraints.emplace_back(row, idx(2, k), ratio);
        } else {
          linear_far_field(constraints, row, row, idx(j - 1, k), idx(j - 2, k), q, j);
        }
        continue;
      }
      op.emplace_back(row, row, -P.r);

      // Variance direction; one-sided first order at the variance bounds.
      if (nu_edge) {
        const Stencil d = k == 0 ? forward_first(nu, k) : backward_first(nu, k);
        if (k > 0) op.emplace_back(row, idx(j, k - 1), b_nu * d.lo);
        op.emplace_back(row, row, b_nu * d.mid);
        if (k < nv - 1) op.emplace_back(row, idx(j, k + 1), b_nu * d.hi);
      } else {
        const Stencil s = advection_diffusion(nu, k, b_nu, a_nu);
        op.emplace_back(row, idx(j, k - 1), s.lo);
        op.emplace_back(row, row, s.mid);
        op.emplace_back(row, idx(j, k + 1), s.hi);
      }
      if (j == 0) continue;  // q = 0: no price-direction terms

      const Stencil s = advection_diffusion(q, j, P.r * q[j], 0.5 * v * q[j] * q[j]);
      op.emplace_back(row, idx(j - 1, k), s.lo);
      op.emplace_back(row, row, s.mid);
      op.emplace_back(row, idx(j + 1, k), s.hi);

      const double cross = P.rho * P.eps_vol * q[j] * v;
      if (!nu_edge && cross != 0.0) {
        const Stencil dq = central_first(q, j), dv = central_first(nu, k);
        const double wq[3] = {dq.lo, dq.mid, dq.hi};
        const double wv[3] = {dv.lo, dv.mid, dv.hi};
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) {
            const double w = cross * wq[a] * wv[b];
            if (w != 0.0) op.emplace_back(row, idx(j + a - 1, k + b - 1), w);
          }
        }
      }
    }
  }

  // Variance derivative on every node, used by the reserve and the hedge.
  auto p_nu = [&](const Vector& p, Eigen::Index j, Eigen::Index k) {
    const Stencil d = derivative(nu, k);
    double s = d.mid * p[idx(j, k)];
    if (k > 0) s += d.lo * p[idx(j, k - 1)];
    if (k < nv - 1) s += d.hi * p[idx(j, k + 1)];
    return s;
  };
  auto p_q = [&](const Vector& p, Eigen::Index j, Eigen::Index k) {
    const Stencil d = derivative(q, j);
    double s = d.mid * p[idx(j, k)];
    if (j > 0) s += d.lo * p[idx(j - 1, k)];
    if (j < nq - 1) s += d.hi * p[idx(j + 1, k)];
    return s;
  };

  const double reserve_scale = 0.5 * alpha * eps2 * (1.0 - P.rho * P.rho);
  Vector source = Vector::Zero(n);
  auto reserve = [&](const Vector& p) -> const Vector& {
    if (reserve_scale == 0.0) return source;
    for (Eigen::Index k = 0; k < nv; ++k) {
      for (Eigen::Index j = 0; j < nq; ++j) {
        const double g = p_nu(p, j, k);
        source[idx(j, k)] = -reserve_scale * nu[k] * g * g;
      }
    }
    return source;
  };

  const double dt = T / grid.steps;
  const ThetaStepper stepper(n, op, constraints, algebraic, dt);
  const Vector line = cell_averaged(payoff, q);
  Vector terminal(n);
  for (Eigen::Index k = 0; k < nv; ++k) terminal.segment(idx(0, k), nq) = line;

  SvSurface out;
  out.t = linspace(grid.steps + 1, 0.0, T);
  out.q = q;
  out.nu = nu;
  out.p.resize(static_cast<std::size_t>(grid.steps) + 1);
  out.delta.resize(static_cast<std::size_t>(grid.steps) + 1);
  const double hedge_ratio = P.rho * P.eps_vol;
  march(stepper, terminal, grid.steps, grid.rannacher, reserve, [&](int level, const Vector& p) {
    const auto l = static_cast<std::size_t>(level);
    out.p[l] = Eigen::Map<const Matrix>(p.data(), nq, nv);
    Matrix& d = out.delta[l];
    d.resize(nq, nv);
    for (Eigen::Index k = 0; k < nv; ++k) {
      for (Eigen::Index j = 0; j < nq; ++j) {
        // The variance hedge term is undefined at q = 0 and dropped there.
        d(j, k) = p_q(p, j, k) + (q[j] > 0.0 ? p_nu(p, j, k) * hedge_ratio / q[j] : 0.0);
      }
    }
  });
  return out;
}

SvParams heston_price_measure(const SvParams& params) {
  SvParams out = params;
  const double shift = (params.mu - params.r) * params.rho * params.eps_vol;
  out.mu = params.r;
  if (shift == 0.0) return out;
  if (!(params.kappa > 0.0)) throw InvalidInput("variance level adjustment needs kappa > 0");
  out.nu_bar = params.nu_bar - shift / params.kappa;
  return out;
}

double black_scholes_call(double q, double k, double sigma, double r, double T) {
  if (!(q > 0.0) || !(k > 0.0) || !(sigma > 0.0) || !(T > 0.0)) {
    throw InvalidInput("Black-Scholes call needs positive q, k, sigma and T");
  }
  const double sd = sigma * std::sqrt(T);
  const double d1 = (std::log(q / k) + (r + 0.5 * sigma * sigma) * T) / sd;
  const double d2 = d1 - sd;
  auto N = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  return q * N(d1) - k * std::exp(-r * T) * N(d2);
}

}  // namespace entropic
