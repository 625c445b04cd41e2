#pragma once

#include <vector>

#include "entropic/calibrate.hpp"

namespace entropic {

// Hedge delta and price p = delta . q of a payoff P. The hedged measure
// E^{phi delta} proportional to gamma exp(-alpha (P - delta . dq)) satisfies
// E^{phi delta}[dq] = q (r + alpha s) dt, and p = E^gamma[alpha][P - delta . dq].
// Negative alpha gives the seller's quote; alpha = 0 gives the mid hedge.
struct HedgeResult {
  Vector delta;
  double s = 0.0;
  double p = 0.0;
  double residual_variance = 0.0;  // V^gamma[P - delta . dq]
  double residual = 0.0;
  int iterations = 0;
};

HedgeResult solve_hedge(const SampleMarket& market, const CalibrationResult& calib, const VectorRef& P,
                        double alpha, const SolverConfig& cfg = {});

// Closed form for (dq, P) jointly normal. mean and cov are over (dq, P), payoff last.
// calib must come from calibrate_normal on the dq block.
HedgeResult hedge_normal(const Vector& mean, const Matrix& cov, const Vector& q, double dt, double alpha,
                         const CalibrationResult& calib);

// Mid price p0, marginal hedge and bid-offer p_pm = alpha V^gamma[P - delta . dq] / (1 + r dt).
// To first order in alpha the hedged price is p0 - p_pm / 2.
struct OrderBook {
  double p0 = 0.0;
  double p_pm = 0.0;
  Vector delta;
  double s = 0.0;
};

OrderBook order_book(const SampleMarket& market, const CalibrationResult& calib, const VectorRef& P, double alpha);

// Per-unit hedge and price for notionals lambda: solve_hedge(lambda P, alpha) / lambda,
// which equals solve_hedge(P, lambda alpha). lambda = 0 gives the mid hedge.
std::vector<HedgeResult> price_curve(const SampleMarket& market, const CalibrationResult& calib, const VectorRef& P,
                                     double alpha, const std::vector<double>& lambdas, const SolverConfig& cfg = {});

enum class PayoffKind { Call, Put, Digital, Linear };

// x+, (-x)+, 1{x > 0} or x, for x = price - strike.
double payoff_value(PayoffKind kind, double x);

// Payoff of one asset's final price: (Q - k)+, (k - Q)+, 1{Q > k} or Q - k.
Vector make_payoff(const SampleMarket& market, PayoffKind kind, Eigen::Index asset, double strike);

}  // namespace entropic
