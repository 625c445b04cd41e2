#include "entropic/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "detail/roots.hpp"
#include "entropic/error.hpp"

namespace entropic {

namespace {

constexpr double kHermitianTol = 1e-12;
// Relative eigenvalue gap below which eigenvalues form one degenerate cluster.
constexpr double kClusterTol = 1e-8;
constexpr int kMaxRefine = 30;

using Complex = std::complex<double>;

// (e^a - e^b) / (a - b) for a, b <= 0, without overflow or cancellation.
double exp_divided_difference(double a, double b) {
  const double d = a - b;
  if (d == 0.0) return std::exp(a);
  if (std::abs(d) < 1.0) return std::exp(b) * std::expm1(d) / d;
  return (std::exp(a) - std::exp(b)) / d;
}

// (e^z - 1) / z with g(0) = 1.
double poincare_kernel(double z) { return z == 0.0 ? 1.0 : std::expm1(z) / z; }

double log_cosh(double y) {
  const double a = std::abs(y);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

void require_same_size(const HermitianOperator& a, const HermitianOperator& b) {
  if (a.size() != b.size()) throw InvalidInput("operators have different dimensions");
}

// Sum over i, j of Re(conj(A_ij) B_ij) K_ij.
double kernel_inner(const ComplexMatrix& A, const ComplexMatrix& B, const Matrix& K) {
  return (A.conjugate().cwiseProduct(B).real().array() * K.array()).sum();
}

}  // namespace

HermitianOperator::HermitianOperator(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) throw InvalidInput("operator must be square");
  if (m.size() == 0) throw InvalidInput("operator is empty");
  if (!m.allFinite()) throw InvalidInput("operator is not finite");
  const double scale = m.norm();
  if ((m - m.adjoint()).norm() > kHermitianTol * scale) throw InvalidInput("operator is not Hermitian");
  m_ = 0.5 * (m + m.adjoint());
}

HermitianOperator HermitianOperator::real(const Matrix& m) { return HermitianOperator(m.cast<Complex>()); }

HermitianOperator HermitianOperator::diagonal(const Vector& d) {
  return HermitianOperator(d.cast<Complex>().asDiagonal().toDenseMatrix());
}

HermitianOperator HermitianOperator::identity(Eigen::Index n) {
  return HermitianOperator(ComplexMatrix::Identity(n, n));
}

HermitianOperator HermitianOperator::operator+(const HermitianOperator& o) const {
  require_same_size(*this, o);
  HermitianOperator out;
  out.m_ = m_ + o.m_;
  return out;
}

HermitianOperator HermitianOperator::operator-(const HermitianOperator& o) const {
  require_same_size(*this, o);
  HermitianOperator out;
  out.m_ = m_ - o.m_;
  return out;
}

HermitianOperator HermitianOperator::operator*(double s) const {
  if (!std::isfinite(s)) throw InvalidInput("operator scale is not finite");
  HermitianOperator out;
  out.m_ = m_ * s;
  return out;
}

Spectrum spectrum(const HermitianOperator& H) {
  if (H.size() == 0) throw InvalidInput("operator is empty");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(H.matrix());
  if (eig.info() != Eigen::Success) throw SolverFailure("Hermitian eigensolver failed", kInfinity, 0);
  return {eig.eigenvalues(), eig.eigenvectors()};
}

HermitianOperator matrix_function(const HermitianOperator& H, const RealFunction& f) {
  const Spectrum s = spectrum(H);
  const Vector fv = s.values.unaryExpr([&f](double x) { return f(x); });
  if (!fv.allFinite()) throw InvalidInput("function is not finite on the spectrum");
  return HermitianOperator(s.vectors * fv.cast<Complex>().asDiagonal() * s.vectors.adjoint());
}

double trace_eam(const HermitianOperator& X, double alpha) {
  const Spectrum s = spectrum(X);
  return entropy_adjusted_mean(Measure::uniform(X.size()), s.values, alpha);
}

double trace_mean(const HermitianOperator& X) { return X.matrix().trace().real() / static_cast<double>(X.size()); }

HermitianOperator spread_payoff(const HermitianOperator& Q, const HermitianOperator& B, double k,
                                const RealFunction& f) {
  require_same_size(Q, B);
  if (!std::isfinite(k)) throw InvalidInput("strike must be finite");
  return matrix_function(Q - B * k, f);
}

ComplexMatrix adjoint_transform(const HermitianOperator& X, const ComplexMatrix& Y) {
  if (Y.rows() != X.size() || Y.cols() != X.size()) throw InvalidInput("operators have different dimensions");
  const Spectrum s = spectrum(X);
  ComplexMatrix Yh = s.vectors.adjoint() * Y * s.vectors;
  for (Eigen::Index j = 0; j < Yh.cols(); ++j) {
    for (Eigen::Index i = 0; i < Yh.rows(); ++i) Yh(i, j) *= poincare_kernel(s.values[i] - s.values[j]);
  }
  return s.vectors * Yh * s.vectors.adjoint();
}

QuantumFamily::QuantumFamily(HermitianOperator base, std::vector<HermitianOperator> stats)
    : base_(std::move(base)), stats_(std::move(stats)) {
  for (const HermitianOperator& z : stats_) require_same_size(base_, z);
}

HermitianOperator QuantumFamily::generator(const Vector& theta) const {
  ComplexMatrix g = base_.matrix();
  for (std::size_t a = 0; a < stats_.size(); ++a) g -= theta[static_cast<Eigen::Index>(a)] * stats_[a].matrix();
  return HermitianOperator(0.5 * (g + g.adjoint()));
}

namespace {

// Eigenbasis of a generator with the normalised weights e^{h - top} / Z and the
// Kubo-Mori kernel divided by Z.
struct GibbsState {
  Spectrum spec;
  double log_partition = 0.0;
  Vector weights;
  Matrix kernel;
};

GibbsState gibbs(const HermitianOperator& G) {
  GibbsState st;
  st.spec = spectrum(G);
  const Vector& h = st.spec.values;
  const double top = h.maxCoeff();
  const Vector e = (h.array() - top).exp().matrix();
  const double z = e.sum();
  st.log_partition = top + std::log(z);
  st.weights = e / z;
  const Eigen::Index n = h.size();
  st.kernel.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) st.kernel(i, j) = exp_divided_difference(h[i] - top, h[j] - top) / z;
  }
  return st;
}

ComplexMatrix in_basis(const GibbsState& st, const HermitianOperator& X) {
  return st.spec.vectors.adjoint() * X.matrix() * st.spec.vectors;
}

double diagonal_mean(const GibbsState& st, const ComplexMatrix& Xh) { return Xh.diagonal().real().dot(st.weights); }

}  // namespace

TiltState QuantumFamily::evaluate(const Vector& theta) const {
  TiltState out;
  if (theta.size() != dim()) throw InvalidInput("tilt parameter has the wrong dimension");
  if (!theta.allFinite()) {
    out.log_partition = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const GibbsState st = gibbs(generator(theta));
  const Eigen::Index m = dim();
  std::vector<ComplexMatrix> zh;
  zh.reserve(stats_.size());
  for (const HermitianOperator& z : stats_) zh.push_back(in_basis(st, z));
  out.log_partition = st.log_partition;
  out.mean.resize(m);
  for (Eigen::Index a = 0; a < m; ++a) out.mean[a] = diagonal_mean(st, zh[static_cast<std::size_t>(a)]);
  out.covariance.resize(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double c = kernel_inner(zh[static_cast<std::size_t>(a)], zh[static_cast<std::size_t>(b)], st.kernel) -
                       out.mean[a] * out.mean[b];
      out.covariance(a, b) = out.covariance(b, a) = c;
    }
  }
  return out;
}

double QuantumFamily::expectation(const Vector& theta, const HermitianOperator& X) const {
  require_same_size(base_, X);
  const GibbsState st = gibbs(generator(theta));
  return diagonal_mean(st, in_basis(st, X));
}

Vector QuantumFamily::km_cross(const Vector& theta, const HermitianOperator& X) const {
  require_same_size(base_, X);
  const GibbsState st = gibbs(generator(theta));
  const ComplexMatrix xh = in_basis(st, X);
  const double mx = diagonal_mean(st, xh);
  Vector out(dim());
  for (Eigen::Index a = 0; a < dim(); ++a) {
    const ComplexMatrix zh = in_basis(st, stats_[static_cast<std::size_t>(a)]);
    out[a] = kernel_inner(zh, xh, st.kernel) - diagonal_mean(st, zh) * mx;
  }
  return out;
}

double QuantumFamily::km_variance(const Vector& theta, const HermitianOperator& X) const {
  require_same_size(base_, X);
  const GibbsState st = gibbs(generator(theta));
  const ComplexMatrix xh = in_basis(st, X);
  const double mx = diagonal_mean(st, xh);
  return kernel_inner(xh, xh, st.kernel) - mx * mx;
}

std::vector<HermitianOperator> QuantumMarket::dq() const {
  std::vector<HermitianOperator> out;
  out.reserve(ops.size());
  for (std::size_t a = 0; a < ops.size(); ++a) {
    out.push_back(ops[a] - HermitianOperator::identity(ops[a].size()) * q[static_cast<Eigen::Index>(a)]);
  }
  return out;
}

void validate(const QuantumMarket& market) {
  if (market.q.size() == 0) throw InvalidInput("market has no assets");
  if (static_cast<Eigen::Index>(market.ops.size()) != market.q.size()) {
    throw InvalidInput("operator count differs from the asset count");
  }
  for (const HermitianOperator& op : market.ops) {
    if (op.size() == 0 || op.size() != market.ops.front().size()) throw InvalidInput("operators have different dimensions");
  }
  if (!market.q.allFinite()) throw InvalidInput("initial prices are not finite");
  if (market.q.cwiseAbs().maxCoeff() == 0.0) throw InvalidInput("q has no nonzero entry");
  if (!(market.dt > 0.0) || !std::isfinite(market.dt)) throw InvalidInput("dt must be positive");
}

QuantumCalibration calibrate_quantum(const QuantumMarket& market, const SolverConfig& cfg) {
  validate(market);
  const Eigen::Index n = market.dimension();
  const QuantumFamily family(HermitianOperator(ComplexMatrix::Zero(n, n)), market.dq());
  const Subspace sub = split_directions(family.evaluate(Vector::Zero(market.assets())), cfg.variance_floor);
  const TiltSolution sol = minimize_tilt(family, sub, market.q, 0.0, cfg);
  QuantumCalibration out;
  out.phi = sol.theta;
  out.r = sol.multiplier / market.dt;
  out.log_partition = sol.state.log_partition;
  out.residual_norm = sol.residual;
  out.iterations = sol.iterations;
  out.directions = sub;
  return out;
}

QuantumMid quantum_mid(const QuantumMarket& market, const QuantumCalibration& calib, const HermitianOperator& P) {
  validate(market);
  const Eigen::Index n = market.dimension();
  if (P.size() != n) throw InvalidInput("payoff operator has the wrong dimension");
  const std::vector<HermitianOperator> dq = market.dq();
  const QuantumFamily family(HermitianOperator(ComplexMatrix::Zero(n, n)), dq);
  const double growth = 1.0 + calib.r * market.dt;

  QuantumMid out;
  out.p0 = family.expectation(calib.phi, P) / growth;
  const Matrix C = family.evaluate(calib.phi).covariance;
  const BorderedSolution sol =
      bordered_solve(calib.directions, C, market.q, family.km_cross(calib.phi, P), out.p0);
  out.delta = sol.x;
  out.s = -sol.y / market.dt;
  HermitianOperator residual = P;
  for (std::size_t a = 0; a < dq.size(); ++a) residual = residual - dq[a] * out.delta[static_cast<Eigen::Index>(a)];
  out.spread_per_alpha = family.km_variance(calib.phi, residual) / growth;
  return out;
}

QuantumMid quantum_mid(const QuantumMarket& market, const HermitianOperator& P, const SolverConfig& cfg) {
  return quantum_mid(market, calibrate_quantum(market, cfg), P);
}

QuantumHedge solve_quantum(const QuantumMarket& market, const QuantumCalibration& calib, const HermitianOperator& P,
                           double alpha, const SolverConfig& cfg) {
  validate(market);
  const Eigen::Index n = market.dimension();
  if (P.size() != n) throw InvalidInput("payoff operator has the wrong dimension");
  if (!std::isfinite(alpha)) throw InvalidInput("hedging needs finite risk aversion");

  QuantumHedge out;
  out.phi = calib.phi;
  out.r = calib.r;
  if (alpha == 0.0) {
    const QuantumMid mid = quantum_mid(market, calib, P);
    out.delta = mid.delta;
    out.s = mid.s;
    out.p = mid.p0;
    return out;
  }

  const std::vector<HermitianOperator> dq = market.dq();
  ComplexMatrix base = -alpha * P.matrix();
  for (std::size_t a = 0; a < dq.size(); ++a) base -= calib.phi[static_cast<Eigen::Index>(a)] * dq[a].matrix();
  const QuantumFamily family(HermitianOperator(0.5 * (base + base.adjoint())), dq);
  const QuantumFamily price_family(HermitianOperator(ComplexMatrix::Zero(n, n)), dq);
  const double p_mid = price_family.expectation(calib.phi, P) / (1.0 + calib.r * market.dt);
  const PricedTilt priced =
      price_by_tilt(family, calib.directions, market.q, alpha, calib.log_partition, p_mid, cfg);

  out.delta = -priced.solution.theta / alpha;
  out.p = priced.p;
  out.s = (priced.solution.multiplier - calib.r * market.dt) / (alpha * market.dt);
  out.residual = std::max(priced.value_residual, priced.solution.residual);
  out.iterations = priced.iterations;
  return out;
}

QuantumHedge solve_quantum(const QuantumMarket& market, const HermitianOperator& P, double alpha,
                           const SolverConfig& cfg) {
  return solve_quantum(market, calibrate_quantum(market, cfg), P, alpha, cfg);
}

TwoStateResult two_state_model(const TwoStateSpec& spec, double alpha) {
  if (!(spec.eps_gap >= 0.0) || !std::isfinite(spec.eps_gap) || !std::isfinite(spec.theta) ||
      !std::isfinite(spec.strike)) {
    throw InvalidInput("two-state model needs finite theta, strike and eps >= 0");
  }
  if (!std::isfinite(alpha)) throw InvalidInput("risk aversion must be finite");
  const double c2t = std::cos(2.0 * spec.theta), s2t = std::sin(2.0 * spec.theta);
  const double a = c2t - spec.eps_gap * spec.strike;

  TwoStateResult out;
  // Continuous branch: Q - k B = -k + q_plus (cos 2psi sigma_z + sin 2psi sigma_x).
  out.psi = 0.5 * std::atan2(s2t, a);
  out.q_plus = std::hypot(a, s2t);
  out.p_plus = payoff_value(spec.payoff, out.q_plus - spec.strike);
  out.p_minus = payoff_value(spec.payoff, -out.q_plus - spec.strike);
  const double p_bar = 0.5 * (out.p_plus + out.p_minus);
  const double p_hat = 0.5 * (out.p_plus - out.p_minus);
  const double s1 = std::sin(2.0 * (out.psi - spec.theta));
  const double c1 = std::cos(2.0 * (out.psi - spec.theta));

  if (alpha == 0.0) {
    out.p = p_bar;
  } else {
    auto g = [&](double p) { return p - p_bar + log_cosh(alpha * (p_hat * s1 + spec.eps_gap * p * s2t)) / alpha; };
    const auto [lo, hi] = detail::expand_bracket(g, p_bar - 1.0, p_bar + 1.0, -kInfinity, kInfinity);
    out.p = detail::brent(g, lo, hi);
  }
  out.delta = p_hat * c1 - spec.eps_gap * out.p * c2t;
  return out;
}

QuantumMarket two_state_market(const TwoStateSpec& spec) {
  const double c = std::cos(2.0 * spec.theta), s = std::sin(2.0 * spec.theta);
  Matrix B(2, 2), Q(2, 2);
  B << 1.0 + spec.eps_gap, 0.0, 0.0, 1.0 - spec.eps_gap;
  Q << c, s, s, -c;
  QuantumMarket m;
  m.q = Vector(2);
  m.q << 1.0, 0.0;
  m.ops = {HermitianOperator::real(B), HermitianOperator::real(Q)};
  return m;
}

namespace {

// Eigen decomposition of Q - k B with each degenerate cluster rotated to diagonalise
// the compressed B, so basis vectors follow the analytic branches.
struct Resolved {
  Vector values;
  ComplexMatrix vectors;
  Vector slopes;
  Vector curvature;
  std::vector<int> cluster;  // cluster id per index
};

Resolved resolve(const HermitianOperator& Q, const HermitianOperator& B, double k) {
  const Spectrum s = spectrum(Q - B * k);
  const Eigen::Index n = s.values.size();
  Resolved r;
  r.values = s.values;
  r.vectors = s.vectors;
  r.cluster.assign(static_cast<std::size_t>(n), 0);
  const double tol = kClusterTol * std::max(1.0, s.values.cwiseAbs().maxCoeff());
  Eigen::Index start = 0;
  int id = 0;
  for (Eigen::Index i = 1; i <= n; ++i) {
    if (i < n && s.values[i] - s.values[i - 1] <= tol) continue;
    const Eigen::Index len = i - start;
    if (len > 1) {
      const ComplexMatrix Uc = r.vectors.middleCols(start, len);
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(Uc.adjoint() * B.matrix() * Uc);
      // Largest B component first: it has the most negative slope.
      r.vectors.middleCols(start, len) = (Uc * eig.eigenvectors()).rowwise().reverse();
    }
    for (Eigen::Index j = start; j < i; ++j) r.cluster[static_cast<std::size_t>(j)] = id;
    ++id;
    start = i;
  }
  const ComplexMatrix Bh = r.vectors.adjoint() * B.matrix() * r.vectors;
  r.slopes = -Bh.diagonal().real();
  r.curvature = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (r.cluster[static_cast<std::size_t>(i)] == r.cluster[static_cast<std::size_t>(j)]) continue;
      r.curvature[i] += 2.0 * std::norm(Bh(i, j)) / (r.values[i] - r.values[j]);
    }
  }
  return r;
}

// Index in `to` continuing each column of `from`, or empty when some match carries
// less than half the squared overlap.
std::vector<Eigen::Index> match(const ComplexMatrix& from, const ComplexMatrix& to) {
  const Matrix overlap = (from.adjoint() * to).cwiseAbs2();
  const Eigen::Index n = overlap.rows();
  std::vector<Eigen::Index> out(static_cast<std::size_t>(n));
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Eigen::Index b = 0; b < n; ++b) {
    Eigen::Index j = 0;
    const double best = overlap.row(b).maxCoeff(&j);
    if (best <= 0.5 || used[static_cast<std::size_t>(j)]) return {};
    used[static_cast<std::size_t>(j)] = true;
    out[static_cast<std::size_t>(b)] = j;
  }
  return out;
}

// Carries branch vectors from k_a to k_b, bisecting the interval while the match is
// ambiguous. Returns the permutation from branch to index at k_b.
std::vector<Eigen::Index> track(const HermitianOperator& Q, const HermitianOperator& B, const ComplexMatrix& from,
                                double ka, const Resolved& at_b, double kb, int depth) {
  std::vector<Eigen::Index> direct = match(from, at_b.vectors);
  if (!direct.empty()) return direct;
  if (depth >= kMaxRefine) {
    throw SolverFailure("eigenvalue branch tracking is ambiguous near k = " + std::to_string(0.5 * (ka + kb)), 0.0,
                        depth);
  }
  const double km = 0.5 * (ka + kb);
  const Resolved mid = resolve(Q, B, km);
  const std::vector<Eigen::Index> first = track(Q, B, from, ka, mid, km, depth + 1);
  ComplexMatrix carried(from.rows(), from.cols());
  for (std::size_t b = 0; b < first.size(); ++b) {
    carried.col(static_cast<Eigen::Index>(b)) = mid.vectors.col(first[b]);
  }
  return track(Q, B, carried, km, at_b, kb, depth + 1);
}

}  // namespace

ImpliedDistribution implied_distribution(const HermitianOperator& Q, const HermitianOperator& B,
                                         const Vector& strikes) {
  require_same_size(Q, B);
  if (strikes.size() < 3 || !strikes.allFinite()) throw InvalidInput("strike grid needs at least 3 finite points");
  for (Eigen::Index m = 1; m < strikes.size(); ++m) {
    if (!(strikes[m] > strikes[m - 1])) throw InvalidInput("strike grid must be strictly increasing");
  }
  const Spectrum bs = spectrum(B);
  if (bs.values.minCoeff() < -kHermitianTol * std::max(1.0, bs.values.cwiseAbs().maxCoeff())) {
    throw InvalidInput("funding operator B must be positive semidefinite");
  }

  const Eigen::Index n = Q.size(), K = strikes.size();
  ImpliedDistribution out;
  out.strikes = strikes;
  out.branches.resize(n, K);
  out.slopes.resize(n, K);
  out.curvature.resize(n, K);

  ComplexMatrix vectors;
  for (Eigen::Index m = 0; m < K; ++m) {
    const Resolved cur = resolve(Q, B, strikes[m]);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    if (m == 0) {
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      vectors.resize(n, n);
    } else {
      perm = track(Q, B, vectors, strikes[m - 1], cur, strikes[m], 0);
    }
    for (Eigen::Index b = 0; b < n; ++b) {
      const Eigen::Index j = perm[static_cast<std::size_t>(b)];
      out.branches(b, m) = cur.values[j];
      out.slopes(b, m) = cur.slopes[j];
      out.curvature(b, m) = cur.curvature[j];
      vectors.col(b) = cur.vectors.col(j);
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  out.root = Vector::Constant(n, -kInfinity);
  for (Eigen::Index b = 0; b < n; ++b) {
    for (Eigen::Index m = 0; m < K; ++m) {
      if (!(out.slopes(b, m) < 0.0)) {
        out.violations.push_back("branch " + std::to_string(b) + " is not decreasing at k = " +
                                 std::to_string(strikes[m]));
        break;
      }
    }
    int crossings = 0;
    Eigen::Index first = -1;
    for (Eigen::Index m = 0; m + 1 < K; ++m) {
      if ((out.branches(b, m) > 0.0) != (out.branches(b, m + 1) > 0.0)) {
        if (first < 0) first = m;
        ++crossings;
      }
    }
    if (crossings > 1) {
      out.violations.push_back("branch " + std::to_string(b) + " crosses zero " + std::to_string(crossings) +
                               " times");
    }
    if (first < 0) {
      out.root[b] = out.branches(b, 0) > 0.0 ? kInfinity : -kInfinity;
      continue;
    }
    // Bisection on the tracked branch between the bracketing strikes.
    double lo = strikes[first], hi = strikes[first + 1];
    Vector::Index j0 = 0;
    const Resolved r0 = resolve(Q, B, lo);
    // The branch value at the left strike identifies its vector.
    (r0.values.array() - out.branches(b, first)).abs().minCoeff(&j0);
    Eigen::VectorXcd v = r0.vectors.col(j0);
    double slope = out.slopes(b, first);
    for (int it = 0; it < 200 && hi - lo > 4e-16 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      const Resolved r = resolve(Q, B, mid);
      Eigen::Index j = 0;
      (r.vectors.adjoint() * v).cwiseAbs2().maxCoeff(&j);
      if (r.values[j] > 0.0) {
        lo = mid;
        v = r.vectors.col(j);
      } else {
        hi = mid;
      }
      slope = r.slopes[j];
    }
    out.root[b] = 0.5 * (lo + hi);
    out.atoms.push_back({out.root[b], -slope * inv_n, b});
  }

  out.density = Vector::Zero(K);
  for (Eigen::Index m = 0; m < K; ++m) {
    for (Eigen::Index b = 0; b < n; ++b) {
      if (strikes[m] < out.root[b]) out.density[m] += out.curvature(b, m) * inv_n;
    }
  }
  return out;
}

double ImpliedDistribution::call_value(double k) const {
  const Eigen::Index K = strikes.size(), n = branches.rows();
  const double top = strikes[K - 1];
  if (!(k >= strikes[0] && k <= top)) throw InvalidInput("strike outside the implied-distribution grid");
  double total = 0.0;
  for (const ImpliedAtom& a : atoms) total += std::max(a.x - k, 0.0) * a.w * static_cast<double>(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const double upper = std::min(root[b], top);
    if (upper <= k) continue;
    // Trapezoid of (x - k) zeta''(x) on [k, upper], interpolating zeta'' at the ends.
    auto f_at = [&](double x) {
      const auto it = std::upper_bound(strikes.data(), strikes.data() + K, x);
      const Eigen::Index m = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(it - strikes.data()) - 1, 0, K - 2);
      const double w = (x - strikes[m]) / (strikes[m + 1] - strikes[m]);
      return (x - k) * ((1.0 - w) * curvature(b, m) + w * curvature(b, m + 1));
    };
    double x0 = k, f0 = 0.0;
    for (Eigen::Index m = 0; m < K; ++m) {
      if (strikes[m] <= k) continue;
      const double x1 = std::min(strikes[m], upper);
      const double f1 = x1 == strikes[m] ? (x1 - k) * curvature(b, m) : f_at(x1);
      total += 0.5 * (f0 + f1) * (x1 - x0);
      x0 = x1;
      f0 = f1;
      if (x1 >= upper) break;
    }
    if (root[b] > top) total += branches(b, K - 1) - (top - k) * slopes(b, K - 1);
  }
  return total / static_cast<double>(n);
}

}  // namespace entropic
