#include "entropic/xva.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "detail/roots.hpp"
#include "entropic/error.hpp"
#include "entropic/hedge.hpp"

namespace entropic {

namespace {

constexpr double kReplicationTol = 1e-10;
constexpr int kMaxExpand = 200;

void require_admissible(const MarginSetup& setup, double p) {
  if (!std::isfinite(p) || p < -setup.c2 || p > setup.c1) {
    throw InvalidInput("price outside the admissible capital window [-c2, c1]");
  }
}

void require_view(const MarginSetup& setup, const CounterpartyView& view) {
  validate(view.market, view.measure);
  if (view.market.outcomes() != setup.P.size()) throw InvalidInput("view and setup have different outcome counts");
  if (!std::isfinite(view.alpha)) throw InvalidInput("risk aversion must be finite");
}

// Capital returns floored and capped at the default levels with the derivative priced at p.
Vector capped(const VectorRef& P, double floor, double cap) {
  return P.unaryExpr([floor, cap](double x) { return std::min(std::max(x, floor), cap); });
}

// Zero of a non-increasing f on [lo, hi], where either end may be infinite.
double decreasing_root(const std::function<double(double)>& f, double lo, double hi, double scale) {
  double a = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi - scale : -scale);
  double b = std::isfinite(hi) ? hi : a + scale;
  double fa = f(a), fb = f(b);
  for (int it = 0; fa < 0.0 && it < kMaxExpand; ++it) {
    if (a == lo) throw InvalidInput("no threshold price in the admissible capital window");
    b = a;
    fb = fa;
    a = std::max(lo, a - scale * std::ldexp(1.0, it));
    fa = f(a);
  }
  for (int it = 0; fb > 0.0 && it < kMaxExpand; ++it) {
    if (b == hi) throw InvalidInput("no threshold price in the admissible capital window");
    a = b;
    fa = fb;
    b = std::min(hi, b + scale * std::ldexp(1.0, it));
    fb = f(b);
  }
  if (fa < 0.0 || fb > 0.0) throw InvalidInput("no threshold price in the admissible capital window");
  return detail::brent(f, a, b);
}

double price_scale(const VectorRef& P) { return std::max(1.0, P.cwiseAbs().maxCoeff()); }

// Throws unless some portfolio w with w . q = 1 pays 1 + db/b on every outcome.
void require_par_replication(const MarginSetup& setup, const SampleMarket& market) {
  const Vector growth = (1.0 + setup.b_return.array()).matrix();
  const Eigen::ColPivHouseholderQR<Matrix> qr(market.Q);
  const Vector w = qr.solve(growth);
  const bool replicable = (market.Q * w - growth).norm() <= kReplicationTol * growth.norm();
  if (!replicable || std::abs(w.dot(market.q) - 1.0) > kReplicationTol) {
    throw InvalidInput("infinite capital needs the margin account replicable at par in the view's market");
  }
}

double surplus(const MarginSetup& setup, const CounterpartyView& view, const CalibrationResult& calib, Side side,
               double p, const SolverConfig& cfg) {
  const Vector F = funded_transfer(setup, p);
  const double sign = side == Side::Buyer ? 1.0 : -1.0;
  const double c = side == Side::Buyer ? setup.c1 : setup.c2;
  if (!std::isfinite(c)) return solve_hedge(view.market, calib, sign * F, view.alpha, cfg).p;
  const Vector payoff = c * (1.0 + setup.b_return.array()).matrix() + sign * F;
  return solve_hedge(view.market, calib, payoff, view.alpha, cfg).p - c;
}

double solve_threshold(const MarginSetup& setup, const CounterpartyView& view, Side side, const SolverConfig& cfg) {
  validate(setup);
  require_view(setup, view);
  if (!std::isfinite(side == Side::Buyer ? setup.c1 : setup.c2)) require_par_replication(setup, view.market);
  const CalibrationResult calib = calibrate(view.market, view.measure, cfg);
  const double orient = side == Side::Buyer ? 1.0 : -1.0;
  const auto f = [&](double p) { return orient * surplus(setup, view, calib, side, p, cfg); };
  return decreasing_root(f, -setup.c2, setup.c1, price_scale(setup.P));
}

void require_same_capital(const MarginSetup& a, const MarginSetup& b) {
  if (a.c1 != b.c1 || a.c2 != b.c2) throw InvalidInput("counterparty setups disagree on the deployed capital");
}

}  // namespace

void validate(const MarginSetup& setup) {
  if (std::isnan(setup.c1) || std::isnan(setup.c2) || setup.c1 < 0.0 || setup.c2 < 0.0) {
    throw InvalidInput("capital must be non-negative");
  }
  if (setup.P.size() == 0 || setup.P.size() != setup.b_return.size()) {
    throw InvalidInput("payoff and margin returns need the same non-zero outcome count");
  }
  if (!setup.P.allFinite() || !setup.b_return.allFinite()) throw InvalidInput("outcomes are not finite");
  if (setup.b_return.minCoeff() <= -1.0) throw InvalidInput("margin account return must exceed -1");
}

Vector funded_transfer(const MarginSetup& setup, double p) {
  validate(setup);
  require_admissible(setup, p);
  Vector F(setup.P.size());
  for (Eigen::Index i = 0; i < F.size(); ++i) {
    const double g = 1.0 + setup.b_return[i];
    F[i] = std::min(std::max(setup.P[i] - p * g, -setup.c1 * g), setup.c2 * g);
  }
  return F;
}

Settlement settle(const MarginSetup& setup, double p) {
  validate(setup);
  require_admissible(setup, p);
  if (!std::isfinite(setup.c1) || !std::isfinite(setup.c2)) throw InvalidInput("settlement needs finite capital");
  const Eigen::Index n = setup.P.size();
  Settlement s;
  s.x1.resize(n);
  s.x2.resize(n);
  s.dc1.resize(n);
  s.dc2.resize(n);
  s.buyer_defaults.resize(static_cast<std::size_t>(n));
  s.seller_defaults.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = 1.0 + setup.b_return[i];
    const double x1 = (setup.c1 - p) * g + setup.P[i];
    const double x2 = (setup.c2 + p) * g - setup.P[i];
    s.x1[i] = x1;
    s.x2[i] = x2;
    s.dc1[i] = std::max(x1, 0.0) - std::max(-x2, 0.0) - setup.c1;
    s.dc2[i] = std::max(x2, 0.0) - std::max(-x1, 0.0) - setup.c2;
    s.buyer_defaults[static_cast<std::size_t>(i)] = x1 < 0.0;
    s.seller_defaults[static_cast<std::size_t>(i)] = x2 < 0.0;
  }
  return s;
}

DefaultStats default_stats(const MarginSetup& setup, double p, const Measure& m) {
  validate(setup);
  require_admissible(setup, p);
  if (m.size() != setup.P.size()) throw InvalidInput("measure and setup have different outcome counts");
  DefaultStats out;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double g = 1.0 + setup.b_return[i];
    if (std::isfinite(setup.c1) && (setup.c1 - p) * g + setup.P[i] < 0.0) out.buyer += m.weights()[i];
    if (std::isfinite(setup.c2) && (setup.c2 + p) * g - setup.P[i] < 0.0) out.seller += m.weights()[i];
  }
  return out;
}

double capital_surplus(const MarginSetup& setup, const CounterpartyView& view, Side side, double p,
                       const SolverConfig& cfg) {
  validate(setup);
  require_view(setup, view);
  if (!std::isfinite(side == Side::Buyer ? setup.c1 : setup.c2)) require_par_replication(setup, view.market);
  return surplus(setup, view, calibrate(view.market, view.measure, cfg), side, p, cfg);
}

double threshold_price(const MarginSetup& setup, const CounterpartyView& view, Side side, const SolverConfig& cfg) {
  return solve_threshold(setup, view, side, cfg);
}

ThresholdPrices threshold_prices(const MarginSetup& buyer_setup, const CounterpartyView& buyer,
                                 const MarginSetup& seller_setup, const CounterpartyView& seller,
                                 const SolverConfig& cfg) {
  require_same_capital(buyer_setup, seller_setup);
  ThresholdPrices out;
  out.p1 = solve_threshold(buyer_setup, buyer, Side::Buyer, cfg);
  out.p2 = solve_threshold(seller_setup, seller, Side::Seller, cfg);
  out.viable = out.p2 <= out.p1;
  return out;
}

ThresholdPrices threshold_prices(const MarginSetup& setup, const CounterpartyView& buyer,
                                 const CounterpartyView& seller, const SolverConfig& cfg) {
  return threshold_prices(setup, buyer, setup, seller, cfg);
}

std::vector<ViabilityPoint> viability_window(const MarginSetup& buyer_setup, const CounterpartyView& buyer,
                                             const MarginSetup& seller_setup, const CounterpartyView& seller,
                                             const std::vector<double>& prices, const SolverConfig& cfg) {
  require_same_capital(buyer_setup, seller_setup);
  validate(buyer_setup);
  validate(seller_setup);
  require_view(buyer_setup, buyer);
  require_view(seller_setup, seller);
  if (!std::isfinite(buyer_setup.c1)) require_par_replication(buyer_setup, buyer.market);
  if (!std::isfinite(seller_setup.c2)) require_par_replication(seller_setup, seller.market);
  const CalibrationResult cb = calibrate(buyer.market, buyer.measure, cfg);
  const CalibrationResult cs = calibrate(seller.market, seller.measure, cfg);
  std::vector<ViabilityPoint> out;
  for (double p : prices) {
    if (!std::isfinite(p) || p < -buyer_setup.c2 || p > buyer_setup.c1) continue;
    out.push_back({p, surplus(buyer_setup, buyer, cb, Side::Buyer, p, cfg),
                   surplus(seller_setup, seller, cs, Side::Seller, p, cfg)});
  }
  return out;
}

SimplifiedThresholds simplified_thresholds(const SimplifiedXva& x, const Measure& m1, const VectorRef& P1,
                                           const Measure& m2, const VectorRef& P2) {
  if (m1.size() != P1.size() || m2.size() != P2.size()) throw InvalidInput("measure and payoff sizes differ");
  if (!P1.allFinite() || !P2.allFinite()) throw InvalidInput("payoff is not finite");
  if (std::isnan(x.c1) || std::isnan(x.c2) || x.c1 < 0.0 || x.c2 < 0.0) throw InvalidInput("capital must be non-negative");
  if (!(x.dt > 0.0) || !std::isfinite(x.dt)) throw InvalidInput("dt must be positive");
  if (!std::isfinite(x.alpha1) || !std::isfinite(x.alpha2)) throw InvalidInput("risk aversion must be finite");
  const double g = 1.0 + x.r * x.dt;
  const double d1 = 1.0 + x.r1 * x.dt, d2 = 1.0 + x.r2 * x.dt;
  if (!(g > 0.0) || !(d1 > 0.0) || !(d2 > 0.0)) throw InvalidInput("funding growth factors must be positive");
  if ((!std::isfinite(x.c1) && x.r1 != x.r) || (!std::isfinite(x.c2) && x.r2 != x.r)) {
    throw InvalidInput("infinite capital needs the funding rate to equal the margin rate");
  }
  // Funding charge m (r_i - r) dt, zero when the rates agree even for infinite margin.
  const auto fva = [&x](double m, double ri) { return ri == x.r ? 0.0 : m * (ri - x.r) * x.dt; };
  const auto p_hat = [&](const VectorRef& P, double p) { return capped(P, -(x.c1 - p) * g, (x.c2 + p) * g); };

  const auto buyer = [&](double p) {
    return entropy_adjusted_mean(m1, p_hat(P1, p), x.alpha1) - fva(x.c1 - p, x.r1) - p * d1;
  };
  const auto seller = [&](double p) {
    return entropy_adjusted_mean(m2, p_hat(P2, p), -x.alpha2) + fva(x.c2 + p, x.r2) - p * d2;
  };

  SimplifiedThresholds out;
  const double scale = std::max(price_scale(P1), price_scale(P2));
  const double p1 = decreasing_root(buyer, -x.c2, x.c1, scale);
  const double p2 = decreasing_root(seller, -x.c2, x.c1, scale);
  out.prices = {p1, p2, p2 <= p1};

  const double b_all = entropy_adjusted_mean(m1, P1, x.alpha1);
  const double b_cap = entropy_adjusted_mean(m1, capped(P1, -kInfinity, (x.c2 + p1) * g), x.alpha1);
  const double b_hat = entropy_adjusted_mean(m1, p_hat(P1, p1), x.alpha1);
  out.buyer = {p1, b_all / d1, (b_cap - b_all) / d1, (b_hat - b_cap) / d1, -fva(x.c1 - p1, x.r1) / d1};

  const double s_all = entropy_adjusted_mean(m2, P2, -x.alpha2);
  const double s_floor = entropy_adjusted_mean(m2, capped(P2, -(x.c1 - p2) * g, kInfinity), -x.alpha2);
  const double s_hat = entropy_adjusted_mean(m2, p_hat(P2, p2), -x.alpha2);
  out.seller = {p2, s_all / d2, (s_floor - s_all) / d2, (s_hat - s_floor) / d2, fva(x.c2 + p2, x.r2) / d2};
  return out;
}

double buyer_margin(const Measure& m, const VectorRef& P, const VectorRef& b_return, double beta) {
  if (m.size() != P.size() || P.size() != b_return.size()) throw InvalidInput("outcome counts differ");
  if (std::isnan(beta) || beta < 0.0) throw InvalidInput("default aversion must be non-negative");
  const Vector discounted = (P.array() / (1.0 + b_return.array())).matrix();
  return std::max(-entropy_adjusted_mean(m, discounted, beta), 0.0);
}

double seller_margin(const Measure& m, const VectorRef& P, const VectorRef& b_return, double beta) {
  if (m.size() != P.size() || P.size() != b_return.size()) throw InvalidInput("outcome counts differ");
  if (std::isnan(beta) || beta < 0.0) throw InvalidInput("default aversion must be non-negative");
  const Vector discounted = (P.array() / (1.0 + b_return.array())).matrix();
  return std::max(entropy_adjusted_mean(m, discounted, -beta), 0.0);
}

Margins entropic_margin(const Measure& m, const VectorRef& P, const VectorRef& b_return, double beta1,
                        double beta2) {
  return {buyer_margin(m, P, b_return, beta1), seller_margin(m, P, b_return, beta2)};
}

}  // namespace entropic
