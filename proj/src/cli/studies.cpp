#include "entropic/cli/studies.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>

#include "entropic/calibrate.hpp"
#include "entropic/error.hpp"
#include "entropic/hedge.hpp"
#include "entropic/quantum.hpp"
#include "entropic/xva.hpp"

namespace entropic::cli {

namespace {

std::vector<double> grid_or(const std::optional<std::vector<double>>& given, const std::string& fallback) {
  std::vector<double> g = given ? *given : parse_grid(fallback);
  if (g.empty()) throw InvalidInput("study grid is empty");
  return g;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return out;
}

Json to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

// Funding asset at par growing at r dt, plus one underlying.
SampleMarket funded_market(const Vector& X, double q, double r, double dt) {
  SampleMarket m;
  m.q = Vector(2);
  m.q << 1.0, q;
  m.Q.resize(X.size(), 2);
  m.Q.col(0).setConstant(1.0 + r * dt);
  m.Q.col(1) = X;
  m.dt = dt;
  return m;
}

// Rows (strike, lambda, delta, price, bid, offer) with prices per unit notional: price
// and delta at notional lambda, bid at |lambda| and offer at -|lambda|.
template <class Solve>
void price_rows(Table& t, Report& rep, const std::vector<double>& strikes, const std::vector<double>& lambdas,
                Solve&& solve) {
  for (double k : strikes) {
    for (double lam : lambdas) {
      const auto [delta, price] = solve(k, lam);
      const double bid = solve(k, std::abs(lam)).second;
      const double offer = solve(k, -std::abs(lam)).second;
      t.add({k, lam, delta, price, bid, offer});
    }
  }
  rep.summary["rows"] = t.rows.size();
}

PayoffKind study_payoff(const std::string& name) {
  const PayoffKind kind = parse_payoff_kind(name);
  if (kind != PayoffKind::Call && kind != PayoffKind::Digital) throw InvalidInput("study payoff must be call or digital");
  return kind;
}

StudyOutput sample_pricing(const StudyOptions& o, const SampleMarket& market, const Measure& m) {
  StudyOutput out;
  out.table.columns = {"strike", "lambda", "delta", "price", "bid", "offer"};
  const CalibrationResult calib = calibrate(market, m, o.cfg);
  out.report.note(calib.residual_norm, calib.iterations);
  out.report.summary["r"] = calib.r;
  out.report.summary["phi"] = to_json(calib.phi);
  const PayoffKind kind = study_payoff(o.payoff);
  const auto strikes = grid_or(o.strikes, "-3:3:61");
  const auto lambdas = grid_or(o.lambdas, "-2:2:9");
  // Cached per strike: the payoff and hedges at each notional.
  std::map<std::pair<double, double>, std::pair<double, double>> cache;
  price_rows(out.table, out.report, strikes, lambdas, [&](double k, double lam) {
    const auto key = std::make_pair(k, lam);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const Vector P = make_payoff(market, kind, 1, k);
    const HedgeResult h = price_curve(market, calib, P, o.alpha, {lam}, o.cfg).front();
    out.report.note(h.residual, h.iterations);
    return cache[key] = {h.delta[1], h.p};
  });
  return out;
}

StudyOutput funding_rate_normal(const StudyOptions&) {
  StudyOutput out;
  out.table.columns = {"mu1", "sigma1", "sigma2", "r"};
  const Vector q = Vector::Ones(2);
  for (double mu1 : {-0.05, 0.0, 0.05}) {
    for (double sigma1 : {0.0, 0.05, 0.10, 0.15, 0.20}) {
      for (double sigma2 : parse_grid("0.005:0.2:40")) {
        // A riskless asset pins the funding rate to its drift.
        const double r = sigma1 == 0.0
                             ? mu1
                             : funding_rate_independent({NormalAsset{mu1, sigma1}, NormalAsset{0.0, sigma2}}, q, 1.0).r;
        out.table.add({mu1, sigma1, sigma2, r});
      }
    }
  }
  return out;
}

StudyOutput funding_rate_binomial(const StudyOptions&) {
  StudyOutput out;
  out.table.columns = {"c1", "w1", "w2", "r"};
  const Vector q = Vector::Ones(2);
  for (double c1 : {0.05, 0.10, 0.15}) {
    for (double w1 : {0.0001, 0.001, 0.01, 0.1}) {
      for (double w2 : log_grid(0.0001, 0.1, 40)) {
        const FundingRate f = funding_rate_independent({BinomialAsset{c1, w1}, BinomialAsset{0.10, w2}}, q, 1.0);
        out.table.add({c1, w1, w2, f.r});
      }
    }
  }
  return out;
}

StudyOutput options_study(const StudyOptions& o) {
  const Vector X = standardised_samples(o.dist, o.samples, o.seed);
  // Zero-mean samples price at zero, so the calibrated tilt vanishes.
  StudyOutput out = sample_pricing(o, funded_market(X, 0.0, o.r, 1.0), Measure::uniform(X.size()));
  out.report.summary["support"] = {X.minCoeff(), X.maxCoeff()};
  return out;
}

StudyOutput classical_study(const StudyOptions& o) {
  if (o.samples < 2) throw InvalidInput("study needs at least 2 samples");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> z;
  Vector X(o.samples);
  for (Eigen::Index i = 0; i < X.size(); ++i) X[i] = z(rng);
  X.array() -= X.mean();
  const SampleMarket market = funded_market(X, o.target, o.r, 1.0);
  const Measure m = Measure::uniform(X.size());
  StudyOutput out = sample_pricing(o, market, m);
  const CalibrationResult calib = calibrate(market, m, o.cfg);
  out.report.summary["price_measure_entropy"] = relative_entropy(*calib.gamma, m);
  return out;
}

StudyOutput quantum_smile(const StudyOptions& o) {
  const double eps = o.eps.value_or(1.0);
  const QuantumMarket m = two_state_market({o.theta, eps, 0.0});
  const HermitianOperator& B = m.ops[0];
  const HermitianOperator& Q = m.ops[1];
  const auto strikes = grid_or(o.strikes, "-3:3:121");
  Vector k(static_cast<Eigen::Index>(strikes.size()));
  for (std::size_t i = 0; i < strikes.size(); ++i) k[static_cast<Eigen::Index>(i)] = strikes[i];
  const ImpliedDistribution coarse = implied_distribution(Q, B, k);
  // The call integral runs on a fine grid three units beyond the output strikes.
  const double lo = k.minCoeff() - 3.0, hi = k.maxCoeff() + 3.0;
  const auto fine_n = static_cast<Eigen::Index>(std::ceil((hi - lo) / 1e-3)) + 1;
  const ImpliedDistribution fine = implied_distribution(Q, B, Vector::LinSpaced(fine_n, lo, hi));

  const bool reference = std::abs(o.theta - std::numbers::pi / 4) < 1e-12 && eps == 1.0;
  StudyOutput out;
  out.table.columns = {"strike", "call_trace", "call_integral", "density"};
  if (reference) out.table.columns.push_back("density_reference");
  const auto positive = [](double x) { return std::max(x, 0.0); };
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    std::vector<double> row{k[i], trace_mean(spread_payoff(Q, B, k[i], positive)), fine.call_value(k[i]),
                            coarse.density[i]};
    if (reference) row.push_back(0.5 * std::pow(1.0 + k[i] * k[i], -1.5));
    out.table.add(std::move(row));
  }
  Json atoms = Json::array();
  for (const ImpliedAtom& a : coarse.atoms) atoms.push_back({{"x", a.x}, {"w", a.w}});
  out.report.summary["atoms"] = atoms;
  out.report.summary["violations"] = coarse.violations;
  return out;
}

StudyOutput quantum_pricing(const StudyOptions& o) {
  const double eps = o.eps.value_or(0.0);
  const QuantumMarket m = two_state_market({o.theta, eps, 0.0});
  const QuantumCalibration calib = calibrate_quantum(m, o.cfg);
  const PayoffKind kind = study_payoff(o.payoff);
  StudyOutput out;
  out.table.columns = {"strike", "lambda", "delta", "price", "bid", "offer"};
  out.report.note(calib.residual_norm, calib.iterations);
  std::map<std::pair<double, double>, std::pair<double, double>> cache;
  price_rows(out.table, out.report, grid_or(o.strikes, "-2:2:41"), grid_or(o.lambdas, "-2:2:9"),
             [&](double k, double lam) {
               const auto key = std::make_pair(k, lam);
               if (auto it = cache.find(key); it != cache.end()) return it->second;
               const HermitianOperator P =
                   spread_payoff(m.ops[1], m.ops[0], k, [kind](double x) { return payoff_value(kind, x); });
               const QuantumHedge h = solve_quantum(m, calib, P, o.alpha * lam, o.cfg);
               out.report.note(h.residual, h.iterations);
               return cache[key] = {h.delta[1], h.p};
             });
  return out;
}

StudyOutput xva_study(const StudyOptions& o) {
  // Buyer: uniform with mean 0.5; seller: normal with mean 0; both unit variance.
  Vector Xb = standardised_samples("uniform", o.samples, o.seed);
  Xb.array() += 0.5;
  const Vector Xs = standardised_samples("normal", o.samples, o.seed + 1);
  const auto n = static_cast<Eigen::Index>(o.samples);
  SampleMarket funding;
  funding.q = Vector::Ones(1);
  funding.Q = Matrix::Ones(n, 1);
  const Measure m = Measure::uniform(n);

  StudyOutput out;
  out.table.columns = {"lambda", "c2", "price", "buyer", "seller"};
  Json thresholds = Json::array();
  const auto prices = grid_or(o.prices, "-0.5:1.5:81");
  for (double lam : grid_or(o.lambdas, "0:2:3")) {
    for (double c2 : {kInfinity, 0.5}) {
      // Per unit notional: notional lambda scales the risk aversion.
      const MarginSetup sb{kInfinity, c2, Vector::Zero(n), Xb.cwiseMax(0.0)};
      const MarginSetup ss{kInfinity, c2, Vector::Zero(n), Xs.cwiseMax(0.0)};
      const CounterpartyView buyer{m, funding, o.alpha * lam};
      const CounterpartyView seller{m, funding, o.alpha * lam};
      for (const ViabilityPoint& v : viability_window(sb, buyer, ss, seller, prices, o.cfg)) {
        out.table.add({lam, c2, v.p, v.buyer, v.seller});
      }
      const ThresholdPrices t = threshold_prices(sb, buyer, ss, seller, o.cfg);
      thresholds.push_back({{"lambda", lam}, {"c2", format_number(c2)}, {"p1", t.p1}, {"p2", t.p2}, {"viable", t.viable}});
    }
  }
  out.report.summary["thresholds"] = thresholds;
  return out;
}

using Runner = std::function<StudyOutput(const StudyOptions&)>;

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> r{
      {"funding-rate-normal", funding_rate_normal},
      {"funding-rate-binomial", funding_rate_binomial},
      {"options", options_study},
      {"classical", classical_study},
      {"quantum", quantum_smile},
      {"quantum-pricing", quantum_pricing},
      {"xva", xva_study},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& study_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, runner] : runners()) n.push_back(name);
    return n;
  }();
  return names;
}

StudyOutput run_study(const StudyOptions& options) {
  const auto it = runners().find(options.name);
  if (it == runners().end()) throw InvalidInput("unknown study '" + options.name + "'");
  StudyOutput out = it->second(options);
  out.report.command = "study " + options.name;
  out.report.summary["seed"] = options.seed;
  return out;
}

Vector standardised_samples(const std::string& dist, int n, std::uint64_t seed) {
  if (n < 2) throw InvalidInput("study needs at least 2 samples");
  std::mt19937_64 rng(seed);
  Vector x(n);
  if (dist == "normal") {
    std::normal_distribution<double> d;
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = d(rng);
  } else if (dist == "poisson") {
    std::poisson_distribution<int> d(10.0);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = d(rng);
  } else if (dist == "uniform") {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = d(rng);
  } else {
    throw InvalidInput("unknown distribution '" + dist + "'");
  }
  x.array() -= x.mean();
  const double sd = std::sqrt(x.squaredNorm() / static_cast<double>(n));
  if (!(sd > 0.0)) throw InvalidInput("samples are constant");
  return x / sd;
}

}  // namespace entropic::cli
