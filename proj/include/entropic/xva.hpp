#pragma once

// Bilateral margined settlement. The buyer deploys capital c1 and the seller c2; the
// pool is held in a margin account with return db/b. The buyer's capital returns
//   c1 (1 + db/b) + F,  F = (P - p (1 + db/b)) floored at -c1 (1 + db/b), capped at c2 (1 + db/b),
// and the seller's c2 (1 + db/b) - F. Infinite capital removes the floor or cap.

#include <vector>

#include "entropic/calibrate.hpp"

namespace entropic {

struct MarginSetup {
  double c1 = kInfinity;
  double c2 = kInfinity;
  Vector b_return;  // db/b per outcome, > -1
  Vector P;         // final derivative price per outcome
};

// Throws InvalidInput on negative or NaN capital, size mismatch or db/b <= -1.
void validate(const MarginSetup& setup);

// F per outcome. Requires -c2 <= p <= c1.
Vector funded_transfer(const MarginSetup& setup, double p);

// Trigger levels x1 = (c1 - p)(1 + db/b) + P and x2 = (c2 + p)(1 + db/b) - P. A party
// defaults when its level is negative; x = 0 performs. Capital must be finite.
struct Settlement {
  Vector x1;
  Vector x2;
  Vector dc1;
  Vector dc2;
  std::vector<bool> buyer_defaults;
  std::vector<bool> seller_defaults;
};

Settlement settle(const MarginSetup& setup, double p);

struct DefaultStats {
  double buyer = 0.0;
  double seller = 0.0;
};

// Probabilities under m of x1 < 0 and x2 < 0. Infinite capital never defaults.
DefaultStats default_stats(const MarginSetup& setup, double p, const Measure& m);

// One counterparty's probabilities, underlying market and risk aversion. The market
// shares its outcomes with the MarginSetup the view is paired with.
struct CounterpartyView {
  Measure measure;
  SampleMarket market;
  double alpha = 1.0;
};

enum class Side { Buyer, Seller };

// Hedged entropic value of the party's final capital less the capital deployed:
//   buyer  price_alpha1(c1 (1 + db/b) + F) - c1,
//   seller price_alpha2(c2 (1 + db/b) - F) - c2,
// with price_alpha the hedged price of the hedge module in the view's market. With
// infinite capital the margin account must be replicable at par in the view's market
// and the value reduces to price_alpha(+-F). The buyer's value is non-increasing in p
// and the seller's non-decreasing.
double capital_surplus(const MarginSetup& setup, const CounterpartyView& view, Side side, double p,
                       const SolverConfig& cfg = {});

struct ThresholdPrices {
  double p1 = 0.0;  // buyer pays at most p1
  double p2 = 0.0;  // seller sells at least at p2
  bool viable = false;
};

// Zero of capital_surplus in [-c2, c1]. Throws InvalidInput when the surplus keeps
// one sign on the whole admissible window.
double threshold_price(const MarginSetup& setup, const CounterpartyView& view, Side side,
                       const SolverConfig& cfg = {});

// The two setups carry each view's outcomes and must agree on c1 and c2.
ThresholdPrices threshold_prices(const MarginSetup& buyer_setup, const CounterpartyView& buyer,
                                 const MarginSetup& seller_setup, const CounterpartyView& seller,
                                 const SolverConfig& cfg = {});
ThresholdPrices threshold_prices(const MarginSetup& setup, const CounterpartyView& buyer,
                                 const CounterpartyView& seller, const SolverConfig& cfg = {});

struct ViabilityPoint {
  double p = 0.0;
  double buyer = 0.0;   // capital_surplus of the buyer
  double seller = 0.0;  // capital_surplus of the seller
};

// Prices outside [-c2, c1] are skipped.
std::vector<ViabilityPoint> viability_window(const MarginSetup& buyer_setup, const CounterpartyView& buyer,
                                             const MarginSetup& seller_setup, const CounterpartyView& seller,
                                             const std::vector<double>& prices, const SolverConfig& cfg = {});

// Predictable funding dq_i / q_i = r_i dt, db/b = r dt and no hedge assets.
struct SimplifiedXva {
  double r1 = 0.0;
  double r2 = 0.0;
  double r = 0.0;
  double c1 = kInfinity;
  double c2 = kInfinity;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double dt = 1.0;
};

// price = unmargined + cva + dva + fva exactly, with, for the buyer,
//   unmargined = E1[alpha1][P] / (1 + r1 dt),
//   cva = (E1[alpha1][P capped] - E1[alpha1][P]) / (1 + r1 dt),
//   dva = (E1[alpha1][P_hat] - E1[alpha1][P capped]) / (1 + r1 dt),
//   fva = -m1 (r1 - r) dt / (1 + r1 dt),
// where the cap is the seller's default and the floor the buyer's. The seller mirrors
// this with -alpha2, the floor as its CVA and the cap as its DVA.
struct XvaBreakdown {
  double price = 0.0;
  double unmargined = 0.0;
  double cva = 0.0;
  double dva = 0.0;
  double fva = 0.0;
};

struct SimplifiedThresholds {
  ThresholdPrices prices;
  XvaBreakdown buyer;
  XvaBreakdown seller;
};

// Solves p (1 + r1 dt) = E1[alpha1][P_hat(p)] - m1 (r1 - r) dt and
// p (1 + r2 dt) = E2[-alpha2][P_hat(p)] + m2 (r2 - r) dt with m1 = c1 - p, m2 = c2 + p and
// P_hat(p) = P floored at -m1 (1 + r dt), capped at m2 (1 + r dt).
SimplifiedThresholds simplified_thresholds(const SimplifiedXva& params, const Measure& m1, const VectorRef& P1,
                                           const Measure& m2, const VectorRef& P2);

struct Margins {
  double m1 = 0.0;
  double m2 = 0.0;
};

// m1 = (-E1[beta1][P / (1 + db/b)])+ and m2 = (E2[-beta2][P / (1 + db/b)])+. Infinite beta
// gives the essential bounds, which guarantee settlement.
double buyer_margin(const Measure& m, const VectorRef& P, const VectorRef& b_return, double beta);
double seller_margin(const Measure& m, const VectorRef& P, const VectorRef& b_return, double beta);
Margins entropic_margin(const Measure& m, const VectorRef& P, const VectorRef& b_return, double beta1,
                        double beta2);

}  // namespace entropic
