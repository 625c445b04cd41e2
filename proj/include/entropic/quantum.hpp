#pragma once

// Discrete markets on n-dimensional Hilbert spaces. Observables are Hermitian
// matrices and the expectation measure is the normalised trace. Commuting
// observables reduce to the classical sample market with uniform weights.

#include <functional>
#include <string>
#include <vector>

#include "entropic/hedge.hpp"
#include "entropic/tilt.hpp"

namespace entropic {

using ComplexMatrix = Eigen::MatrixXcd;

class HermitianOperator {
 public:
  HermitianOperator() = default;
  // Throws InvalidInput unless m equals its conjugate transpose within 1e-12 relative.
  // The stored matrix is the exact Hermitian part.
  explicit HermitianOperator(const ComplexMatrix& m);

  static HermitianOperator real(const Matrix& m);
  static HermitianOperator diagonal(const Vector& d);
  static HermitianOperator identity(Eigen::Index n);

  const ComplexMatrix& matrix() const { return m_; }
  Eigen::Index size() const { return m_.rows(); }

  HermitianOperator operator+(const HermitianOperator& o) const;
  HermitianOperator operator-(const HermitianOperator& o) const;
  HermitianOperator operator*(double s) const;

 private:
  ComplexMatrix m_;
};

// H = U diag(values) U^dagger, values ascending.
struct Spectrum {
  Vector values;
  ComplexMatrix vectors;
};

Spectrum spectrum(const HermitianOperator& H);

using RealFunction = std::function<double(double)>;

// U f(diag) U^dagger.
HermitianOperator matrix_function(const HermitianOperator& H, const RealFunction& f);

// -(1/alpha) log(tr exp(-alpha X) / n), computed on the eigenvalues.
double trace_eam(const HermitianOperator& X, double alpha);

// tr[X] / n.
double trace_mean(const HermitianOperator& X);

// f(Q - k B).
HermitianOperator spread_payoff(const HermitianOperator& Q, const HermitianOperator& B, double k,
                                const RealFunction& f);

// In the eigenbasis of X, entry (i, j) of Y scaled by g(x_i - x_j), g(z) = (e^z - 1) / z.
// The result is not Hermitian unless X and Y commute.
ComplexMatrix adjoint_transform(const HermitianOperator& X, const ComplexMatrix& Y);

// States exp(base - theta . Z) / tr. The covariance is the Kubo-Mori (Bogoliubov)
// inner product, the Hessian of log tr exp(base - theta . Z).
class QuantumFamily final : public TiltFamily {
 public:
  QuantumFamily(HermitianOperator base, std::vector<HermitianOperator> stats);

  Eigen::Index dim() const override { return static_cast<Eigen::Index>(stats_.size()); }
  TiltState evaluate(const Vector& theta) const override;

  // tr[X rho(theta)].
  double expectation(const Vector& theta, const HermitianOperator& X) const;
  // Kubo-Mori covariances of each statistic with X, and the KM variance of X.
  Vector km_cross(const Vector& theta, const HermitianOperator& X) const;
  double km_variance(const Vector& theta, const HermitianOperator& X) const;

 private:
  HermitianOperator generator(const Vector& theta) const;

  HermitianOperator base_;
  std::vector<HermitianOperator> stats_;
};

// Initial prices q and final-price operators, one per asset.
struct QuantumMarket {
  Vector q;
  std::vector<HermitianOperator> ops;
  double dt = 1.0;

  Eigen::Index assets() const { return q.size(); }
  Eigen::Index dimension() const { return ops.empty() ? 0 : ops.front().size(); }
  std::vector<HermitianOperator> dq() const;
};

void validate(const QuantumMarket& market);

// tr[(dq - q r dt) exp(-phi . dq)] = 0 with phi . q = 0.
struct QuantumCalibration {
  Vector phi;
  double r = 0.0;
  double log_partition = 0.0;  // log tr exp(-phi . dq)
  double residual_norm = 0.0;
  int iterations = 0;
  Subspace directions;
};

QuantumCalibration calibrate_quantum(const QuantumMarket& market, const SolverConfig& cfg = {});

// tr[(dq - q (r + alpha s) dt) exp(-phi . dq - alpha (P - delta . dq))] = 0, delta . q = p,
// p = -(1/alpha) log(tr exp(-phi . dq - alpha (P - delta . dq)) / tr exp(-phi . dq)).
struct QuantumHedge {
  Vector phi;
  double r = 0.0;
  Vector delta;
  double s = 0.0;
  double p = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

// alpha = 0 returns the mid hedge.
QuantumHedge solve_quantum(const QuantumMarket& market, const HermitianOperator& P, double alpha,
                           const SolverConfig& cfg = {});
QuantumHedge solve_quantum(const QuantumMarket& market, const QuantumCalibration& calib, const HermitianOperator& P,
                           double alpha, const SolverConfig& cfg = {});

// Mid hedge with the non-commutativity corrected return dq^ = adjoint_transform(phi . dq, dq):
// p0 = E^phi[P] / (1 + r dt), delta = V^phi[dq^, dq]^-1 (V^phi[dq^, P] + q s dt).
// V^phi[dq^, Y] equals the Kubo-Mori covariance of dq and Y at phi.
struct QuantumMid {
  double p0 = 0.0;
  Vector delta;
  double s = 0.0;
  // alpha-free bid-offer coefficient V^phi_KM[P - delta . dq] / (1 + r dt).
  double spread_per_alpha = 0.0;
};

QuantumMid quantum_mid(const QuantumMarket& market, const HermitianOperator& P, const SolverConfig& cfg = {});
QuantumMid quantum_mid(const QuantumMarket& market, const QuantumCalibration& calib, const HermitianOperator& P);

// B = 1 + eps sigma_z and Q = R(theta) sigma_z R(theta)^T with q = (1, 0), payoff f(Q - k B).
struct TwoStateSpec {
  double theta = 0.0;
  double eps_gap = 0.0;
  double strike = 0.0;
  PayoffKind payoff = PayoffKind::Call;
};

struct TwoStateResult {
  double psi = 0.0;
  double q_plus = 0.0;  // eigenvalues of Q - k B are q_pm - k with q_minus = -q_plus
  double p_plus = 0.0;
  double p_minus = 0.0;
  double p = 0.0;
  double delta = 0.0;  // holding in Q; the holding in B is p
};

// p = P_bar - (1/alpha) log cosh(alpha (P_hat sin 2(psi - theta) + eps p sin 2 theta)),
// delta = P_hat cos 2(psi - theta) - eps p cos 2 theta.
TwoStateResult two_state_model(const TwoStateSpec& spec, double alpha);

// The operators B and Q of a two-state spec.
QuantumMarket two_state_market(const TwoStateSpec& spec);

// Atoms and density implied by the eigenvalue branches zeta_i(k) of Q - k B:
// w_i = -zeta_i'(x_i) / n at the zero x_i, w(x) = (1/n) sum_i zeta_i''(x) 1{x < x_i}.
struct ImpliedAtom {
  double x = 0.0;
  double w = 0.0;
  Eigen::Index branch = 0;
};

struct ImpliedDistribution {
  Vector strikes;
  Matrix branches;   // n x K eigenvalues, rows tracked continuously in k
  Matrix slopes;     // d zeta / dk = -u^dagger B u
  Matrix curvature;  // d^2 zeta / dk^2 by second-order perturbation theory
  std::vector<ImpliedAtom> atoms;
  Vector density;
  Vector root;  // zero of each branch; +inf if positive on the whole grid, -inf if negative
  std::vector<std::string> violations;

  // Sum of (x_i - k)+ w_i, the trapezoid integral of (x - k)+ w(x) on the grid, and the
  // exact first-order tail of branches still positive at the top strike.
  double call_value(double k) const;
};

// B must be positive semidefinite. Branches are matched across strikes by eigenvector
// overlap, refining between strikes when the match is ambiguous.
ImpliedDistribution implied_distribution(const HermitianOperator& Q, const HermitianOperator& B,
                                         const Vector& strikes);

}  // namespace entropic
