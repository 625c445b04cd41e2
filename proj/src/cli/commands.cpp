#include "entropic/cli/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

#include "entropic/cli/io.hpp"
#include "entropic/cli/studies.hpp"
#include "entropic/error.hpp"
#include "entropic/model_risk.hpp"
#include "entropic/pde.hpp"
#include "entropic/xva.hpp"

namespace entropic::cli {

namespace {

struct Result {
  Table table;
  Report report;
  // Replaces the table under --format json.
  std::optional<Json> document;
};

struct Common {
  std::string out;
  std::string report;
  std::string format = "csv";
  double tol = 1e-12;
  int max_iter = 100;
  std::uint64_t seed = 1;

  SolverConfig cfg() const {
    if (!(tol > 0.0) || max_iter < 1) throw InvalidInput("--tol must be positive and --max-iter at least 1");
    SolverConfig c;
    c.tol = tol;
    c.max_iter = max_iter;
    return c;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output path (default: standard output)");
  sub->add_option("--report", c.report, "Solver report path (default: <out>.report.json)");
  sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--tol", c.tol, "Solver tolerance");
  sub->add_option("--max-iter", c.max_iter, "Newton iteration limit");
  sub->add_option("--seed", c.seed, "Seed for sampled markets");
}

// Columns name_0, ..., name_{n-1}.
void append_columns(std::vector<std::string>& cols, const std::string& name, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) cols.push_back(name + "_" + std::to_string(i));
}

void append_values(std::vector<double>& row, const Vector& v) { row.insert(row.end(), v.data(), v.data() + v.size()); }

Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::Index pick_asset(long asset, const SampleMarket& m) {
  if (asset < 0) return m.assets() - 1;
  if (asset >= m.assets()) throw InvalidInput("--asset out of range");
  return asset;
}

// Inputs shared by the sample-market commands.
struct MarketArgs {
  std::string market;
  std::string payoff;
  long asset = -1;
  double alpha = 1.0;
};

void add_market(CLI::App* sub, MarketArgs& a, bool payoff) {
  sub->add_option("--market", a.market, "Market JSON {q, Q, weights?, dt?}")->required();
  sub->add_option("--asset", a.asset, "Asset index for the payoff or metric (default: last)");
  if (payoff) {
    sub->add_option("--payoff", a.payoff, "kind:strike (call, put, digital, linear) or JSON file")->required();
    sub->add_option("--alpha", a.alpha, "Risk aversion");
  }
}

Result risk_metric(const MarketArgs& a, const std::string& grid) {
  const MarketInput in = parse_market(read_json_file(a.market));
  const Vector x = in.market.Q.col(pick_asset(a.asset, in.market));
  Result r;
  r.table.columns = {"alpha", "eam"};
  for (double alpha : parse_grid(grid)) r.table.add({alpha, entropy_adjusted_mean(in.measure, x, alpha)});
  const EssBounds b = ess_bounds(in.measure, x);
  r.report.summary["mean"] = expectation(in.measure, x);
  r.report.summary["ess_inf"] = b.inf;
  r.report.summary["ess_sup"] = b.sup;
  return r;
}

Result calibrate_cmd(const MarketArgs& a, const SolverConfig& cfg) {
  const MarketInput in = parse_market(read_json_file(a.market));
  const CalibrationResult c = calibrate(in.market, in.measure, cfg);
  Result r;
  r.table.columns = {"asset", "q", "phi"};
  for (Eigen::Index i = 0; i < in.market.assets(); ++i) r.table.add({double(i), in.market.q[i], c.phi[i]});
  r.report.note(c.residual_norm, c.iterations);
  r.report.summary["r"] = c.r;
  r.report.summary["relative_entropy"] = relative_entropy(*c.gamma, in.measure);
  r.document = Json{{"phi", vector_json(c.phi)},
                    {"r", c.r},
                    {"gamma", vector_json(c.gamma->weights())},
                    {"residual_norm", c.residual_norm},
                    {"iterations", c.iterations}};
  return r;
}

Result price_cmd(const MarketArgs& a, const std::string& lambda_grid, const SolverConfig& cfg) {
  const MarketInput in = parse_market(read_json_file(a.market));
  const Vector P = parse_payoff(a.payoff, in.market, pick_asset(a.asset, in.market));
  const CalibrationResult c = calibrate(in.market, in.measure, cfg);
  const std::vector<double> lambdas = lambda_grid.empty() ? std::vector<double>{1.0} : parse_grid(lambda_grid);
  Result r;
  r.table.columns = {"lambda", "price", "s"};
  append_columns(r.table.columns, "delta", in.market.assets());
  r.report.note(c.residual_norm, c.iterations);
  const std::vector<HedgeResult> hedges = price_curve(in.market, c, P, a.alpha, lambdas, cfg);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    std::vector<double> row{lambdas[i], hedges[i].p, hedges[i].s};
    append_values(row, hedges[i].delta);
    r.table.add(std::move(row));
    r.report.note(hedges[i].residual, hedges[i].iterations);
  }
  r.report.summary["r"] = c.r;
  return r;
}

Result order_book_cmd(const MarketArgs& a, const SolverConfig& cfg) {
  const MarketInput in = parse_market(read_json_file(a.market));
  const Vector P = parse_payoff(a.payoff, in.market, pick_asset(a.asset, in.market));
  const CalibrationResult c = calibrate(in.market, in.measure, cfg);
  const OrderBook ob = order_book(in.market, c, P, a.alpha);
  Result r;
  r.table.columns = {"mid", "p_pm", "bid", "offer", "s"};
  append_columns(r.table.columns, "delta", in.market.assets());
  std::vector<double> row{ob.p0, ob.p_pm, ob.p0 - 0.5 * ob.p_pm, ob.p0 + 0.5 * ob.p_pm, ob.s};
  append_values(row, ob.delta);
  r.table.add(std::move(row));
  r.report.note(c.residual_norm, c.iterations);
  r.report.summary["r"] = c.r;
  return r;
}

Result model_risk_cmd(const MarketArgs& a, const std::string& perturbation, double fd_eps, const SolverConfig& cfg) {
  if (!(fd_eps > 0.0)) throw InvalidInput("--fd-eps must be positive");
  const MarketInput in = parse_market(read_json_file(a.market));
  const Vector P = parse_payoff(a.payoff, in.market, pick_asset(a.asset, in.market));
  const Vector W = parse_vector(read_json_file(perturbation), "");
  if (W.size() != in.market.outcomes() || !W.allFinite()) throw InvalidInput("perturbation needs one finite value per outcome");
  const CalibrationResult c = calibrate(in.market, in.measure, cfg);
  const HedgeResult h = solve_hedge(in.market, c, P, a.alpha, cfg);
  const CalibrationSensitivity s = perturb_calibration(in.market, c, W);
  const double dp = price_sensitivity(in.market, c, h, P, W, a.alpha);
  // Central differences of the fully re-solved pipeline.
  const Reprice up = reweighted_reprice(in.market, in.measure, W, fd_eps, P, a.alpha, cfg);
  const Reprice down = reweighted_reprice(in.market, in.measure, W, -fd_eps, P, a.alpha, cfg);
  const double fd_dr = (up.calib.r - down.calib.r) / (2.0 * fd_eps);
  const double fd_dp = (up.hedge.p - down.hedge.p) / (2.0 * fd_eps);
  const Vector fd_dphi = (up.calib.phi - down.calib.phi) / (2.0 * fd_eps);
  Result r;
  r.table.columns = {"dr", "dp"};
  append_columns(r.table.columns, "dphi", in.market.assets());
  r.table.columns.insert(r.table.columns.end(), {"fd_dr", "fd_dp"});
  append_columns(r.table.columns, "fd_dphi", in.market.assets());
  std::vector<double> row{s.dr, dp};
  append_values(row, s.dphi);
  row.insert(row.end(), {fd_dr, fd_dp});
  append_values(row, fd_dphi);
  r.table.add(std::move(row));
  for (const Reprice* x : {&up, &down}) {
    r.report.note(x->calib.residual_norm, x->calib.iterations);
    r.report.note(x->hedge.residual, x->hedge.iterations);
  }
  r.report.note(c.residual_norm, c.iterations);
  r.report.note(h.residual, h.iterations);
  r.document = Json{{"dr", s.dr},
                    {"dphi", vector_json(s.dphi)},
                    {"dp", dp},
                    {"fd_check", {{"eps", fd_eps}, {"dr", fd_dr}, {"dphi", vector_json(fd_dphi)}, {"dp", fd_dp}}}};
  return r;
}

struct PdeArgs {
  std::string model = "bs";
  std::string payoff = "call";
  double q0 = 100.0, strike = 100.0, T = 1.0, r = 0.0, mu = 0.0, sigma = 0.2;
  double kappa = 0.0, nu_bar = 0.04, eps_vol = 0.0, rho = 0.0, alpha = 1.0;
  std::optional<double> nu0;
  int steps = 200;
  bool surface = false;
};

Result pde_cmd(const PdeArgs& a) {
  const PayoffKind kind = parse_payoff_kind(a.payoff);
  const ScalarPayoff f = [kind, k = a.strike](double q) { return payoff_value(kind, q - k); };
  if (!(a.q0 > 0.0)) throw InvalidInput("--q0 must be positive");
  Result r;
  if (a.model == "bs") {
    Grid1D g = default_grid(a.q0);
    g.steps = a.steps;
    const BsSurface s = solve_bs_complete({a.r, a.mu, a.sigma * a.sigma}, f, a.T, g);
    r.report.summary["value"] = s.value_at(a.q0);
    r.report.summary["delta"] = s.delta_at(a.q0);
    if (kind == PayoffKind::Call) r.report.summary["black_scholes"] = black_scholes_call(a.q0, a.strike, a.sigma, a.r, a.T);
    if (a.surface) {
      r.table.columns = {"t", "q", "p", "delta"};
      for (Eigen::Index i = 0; i < s.t.size(); ++i) {
        for (Eigen::Index j = 0; j < s.q.size(); ++j) r.table.add({s.t[i], s.q[j], s.p(i, j), s.delta(i, j)});
      }
      return r;
    }
    r.table.columns = {"value", "delta"};
    std::vector<double> row{s.value_at(a.q0), s.delta_at(a.q0)};
    if (kind == PayoffKind::Call) {
      r.table.columns.push_back("black_scholes");
      row.push_back(black_scholes_call(a.q0, a.strike, a.sigma, a.r, a.T));
    }
    r.table.add(std::move(row));
    return r;
  }
  if (a.model != "sv") throw InvalidInput("--model must be bs or sv");
  Grid2D g = default_grid(a.q0, a.nu_bar);
  g.steps = a.steps;
  const SvSurface s = solve_sv_incomplete({a.r, a.mu, a.kappa, a.nu_bar, a.eps_vol, a.rho}, a.alpha, f, a.T, g);
  const double nu0 = a.nu0.value_or(a.nu_bar);
  r.report.summary["value"] = s.value_at(a.q0, nu0);
  r.report.summary["delta"] = s.delta_at(a.q0, nu0);
  if (a.surface) {
    // t = 0 only; the full time stack is rarely wanted at 201 x 101 nodes per level.
    r.table.columns = {"t", "q", "nu", "p", "delta"};
    for (Eigen::Index j = 0; j < s.q.size(); ++j) {
      for (Eigen::Index k = 0; k < s.nu.size(); ++k) r.table.add({s.t[0], s.q[j], s.nu[k], s.p[0](j, k), s.delta[0](j, k)});
    }
    return r;
  }
  r.table.columns = {"value", "delta"};
  r.table.add({s.value_at(a.q0, nu0), s.delta_at(a.q0, nu0)});
  return r;
}

struct QuantumArgs {
  std::string market;
  std::string payoff;
  double alpha = 1.0;
  std::string strike_grid;
};

Result quantum_cmd(const QuantumArgs& a, const SolverConfig& cfg) {
  const QuantumMarket m = parse_quantum_market(read_json_file(a.market));
  Result r;
  if (!a.strike_grid.empty()) {
    if (m.ops.size() < 2) throw InvalidInput("implied distribution needs B and Q as the first two operators");
    const std::vector<double> grid = parse_grid(a.strike_grid);
    const Vector k = Eigen::Map<const Vector>(grid.data(), static_cast<Eigen::Index>(grid.size()));
    const ImpliedDistribution d = implied_distribution(m.ops[1], m.ops[0], k);
    r.table.columns = {"strike", "density", "call_integral", "call_trace"};
    const auto positive = [](double x) { return std::max(x, 0.0); };
    for (Eigen::Index i = 0; i < k.size(); ++i) {
      r.table.add({k[i], d.density[i], d.call_value(k[i]), trace_mean(spread_payoff(m.ops[1], m.ops[0], k[i], positive))});
    }
    Json atoms = Json::array();
    for (const ImpliedAtom& at : d.atoms) atoms.push_back({{"x", at.x}, {"w", at.w}, {"branch", at.branch}});
    r.report.summary["atoms"] = atoms;
    r.report.summary["violations"] = d.violations;
    return r;
  }
  if (a.payoff.empty()) throw InvalidInput("quantum needs --payoff or --strike-grid");
  HermitianOperator P;
  if (const auto colon = a.payoff.find(':'); colon != std::string::npos) {
    if (m.ops.size() < 2) throw InvalidInput("spread payoffs need B and Q as the first two operators");
    const PayoffKind kind = parse_payoff_kind(a.payoff.substr(0, colon));
    const double k = parse_number(Json::parse(a.payoff.substr(colon + 1), nullptr, false), "--payoff");
    P = spread_payoff(m.ops[1], m.ops[0], k, [kind](double x) { return payoff_value(kind, x); });
  } else {
    P = parse_operator(read_json_file(a.payoff));
  }
  const QuantumCalibration c = calibrate_quantum(m, cfg);
  const QuantumHedge h = solve_quantum(m, c, P, a.alpha, cfg);
  const QuantumMid mid = quantum_mid(m, c, P);
  r.table.columns = {"alpha", "price", "s", "r", "mid", "spread_per_alpha"};
  append_columns(r.table.columns, "delta", m.assets());
  std::vector<double> row{a.alpha, h.p, h.s, h.r, mid.p0, mid.spread_per_alpha};
  append_values(row, h.delta);
  r.table.add(std::move(row));
  r.report.note(c.residual_norm, c.iterations);
  r.report.note(h.residual, h.iterations);
  return r;
}

double capital(const Json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) return kInfinity;
  return parse_number(doc[key], std::string("/") + key);
}

Result xva_cmd(const std::string& scenario, const std::string& price_grid, const SolverConfig& cfg) {
  const Json doc = read_json_file(scenario);
  const std::vector<Violation> v = check_config(doc);
  if (!v.empty()) throw InvalidInput("invalid scenario at " + v.front().path + ": " + v.front().message);
  if (!doc.contains("P")) throw InvalidInput("scenario needs P");
  const Vector P = parse_vector(doc["P"], "/P");
  const auto n = P.size();
  const Measure m = doc.contains("weights") ? Measure(parse_vector(doc["weights"], "/weights")) : Measure::uniform(n);
  const Json rates = doc.value("rates", Json::object());
  SimplifiedXva x;
  x.r1 = rates.value("r1", 0.0);
  x.r2 = rates.value("r2", 0.0);
  x.r = rates.value("r", 0.0);
  x.dt = doc.value("dt", 1.0);
  x.c1 = capital(doc, "c1");
  x.c2 = capital(doc, "c2");
  if (doc.contains("alphas")) {
    x.alpha1 = parse_number(doc["alphas"][0], "/alphas/0");
    x.alpha2 = parse_number(doc["alphas"][1], "/alphas/1");
  }
  double beta1 = kInfinity, beta2 = kInfinity;
  if (doc.contains("betas")) {
    beta1 = parse_number(doc["betas"][0], "/betas/0");
    beta2 = parse_number(doc["betas"][1], "/betas/1");
  }
  const Vector R = doc.contains("b_return") ? parse_vector(doc["b_return"], "/b_return") : Vector::Constant(n, x.r * x.dt);

  const MarginSetup setup{x.c1, x.c2, R, P};
  const auto funding = [&](double ri) {
    SampleMarket mk;
    mk.q = Vector::Ones(1);
    mk.Q = Matrix::Constant(n, 1, 1.0 + ri * x.dt);
    mk.dt = x.dt;
    return mk;
  };
  const CounterpartyView buyer{m, funding(x.r1), x.alpha1};
  const CounterpartyView seller{m, funding(x.r2), x.alpha2};
  const ThresholdPrices t = threshold_prices(setup, buyer, seller, cfg);

  Result r;
  Json& s = r.report.summary;
  s["p1"] = t.p1;
  s["p2"] = t.p2;
  s["viable"] = t.viable;
  if ((R.array() == x.r * x.dt).all()) {
    const SimplifiedThresholds st = simplified_thresholds(x, m, P, m, P);
    for (const auto& [name, b] : {std::pair{"buyer", st.buyer}, std::pair{"seller", st.seller}}) {
      s["breakdown"][name] = {{"price", b.price}, {"unmargined", b.unmargined}, {"cva", b.cva}, {"dva", b.dva}, {"fva", b.fva}};
    }
  }
  const Margins mg = entropic_margin(m, P, R, beta1, beta2);
  s["margins"] = {{"m1", mg.m1}, {"m2", mg.m2}};
  for (const auto& [name, p] : {std::pair{"at_p1", t.p1}, std::pair{"at_p2", t.p2}}) {
    if (p < -x.c2 || p > x.c1) continue;
    const DefaultStats d = default_stats(setup, p, m);
    s["default_probability"][name] = {{"buyer", d.buyer}, {"seller", d.seller}};
  }

  std::vector<double> prices;
  if (price_grid.empty()) {
    const double lo = std::max(-x.c2, P.minCoeff()), hi = std::min(x.c1, P.maxCoeff());
    prices = parse_grid(format_number(lo) + ":" + format_number(hi) + ":41");
  } else {
    prices = parse_grid(price_grid);
  }
  r.table.columns = {"price", "buyer", "seller"};
  for (const ViabilityPoint& p : viability_window(setup, buyer, setup, seller, prices, cfg)) {
    r.table.add({p.p, p.buyer, p.seller});
  }
  return r;
}

int validate_cmd(const std::string& path, std::ostream& out) {
  const Json doc = read_json_file(path);
  const std::vector<Violation> v = check_config(doc);
  Json j = Json::object();
  j["file"] = path;
  j["violations"] = Json::array();
  for (const Violation& x : v) j["violations"].push_back({{"path", x.path.empty() ? "/" : x.path}, {"message", x.message}});
  out << j.dump(2) << '\n';
  return v.empty() ? kExitOk : kExitInvalid;
}

void write_report(const Report& rep, const std::string& path) {
  if (path.empty()) return;
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write '" + path + "'");
  os << rep.to_json().dump(2) << '\n';
}

std::string report_path(const Common& c) {
  if (!c.report.empty()) return c.report;
  return c.out.empty() ? std::string() : c.out + ".report.json";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropic pricing and hedging in incomplete markets", "entropic"};
  app.require_subcommand(1);
  Common common;
  MarketArgs market;
  double fd_eps = 1e-4;
  std::string alpha_grid = "-5:5:101", lambda_grid, perturbation, scenario, price_grid, strike_grid, config;
  PdeArgs pde;
  QuantumArgs quantum;
  StudyOptions study;

  std::function<Result(const SolverConfig&)> action;
  std::string command;

  auto* risk = app.add_subcommand("risk-metric", "Entropy-adjusted mean of one asset over a risk-aversion grid");
  add_market(risk, market, false);
  risk->add_option("--alpha-grid", alpha_grid, "a:b:n");
  risk->callback([&] { action = [&](const SolverConfig&) { return risk_metric(market, alpha_grid); }; });

  auto* cal = app.add_subcommand("calibrate", "Unit optimal portfolio and implied funding rate");
  add_market(cal, market, false);
  cal->callback([&] { action = [&](const SolverConfig& cfg) { return calibrate_cmd(market, cfg); }; });

  auto* price = app.add_subcommand("price", "Hedged price, hedge and funding spread");
  add_market(price, market, true);
  price->add_option("--lambda-grid", lambda_grid, "Notionals a:b:n; prices are per unit notional");
  price->callback([&] { action = [&](const SolverConfig& cfg) { return price_cmd(market, lambda_grid, cfg); }; });

  auto* book = app.add_subcommand("order-book", "Mid price, bid-offer and marginal hedge");
  add_market(book, market, true);
  book->callback([&] { action = [&](const SolverConfig& cfg) { return order_book_cmd(market, cfg); }; });

  auto* risk_cmd = app.add_subcommand("model-risk", "First-order response to a measure perturbation");
  add_market(risk_cmd, market, true);
  risk_cmd->add_option("--perturbation", perturbation, "JSON array W, one value per outcome")->required();
  risk_cmd->add_option("--fd-eps", fd_eps, "Step of the finite-difference check");
  risk_cmd->callback([&] { action = [&](const SolverConfig& cfg) { return model_risk_cmd(market, perturbation, fd_eps, cfg); }; });

  auto* pde_app = app.add_subcommand("pde", "Black-Scholes or stochastic-volatility PDE price");
  pde_app->add_option("--model", pde.model, "bs or sv")->check(CLI::IsMember({"bs", "sv"}));
  pde_app->add_option("--payoff", pde.payoff, "call, put, digital or linear");
  pde_app->add_option("--q0", pde.q0);
  pde_app->add_option("--strike", pde.strike);
  pde_app->add_option("--T", pde.T);
  pde_app->add_option("--r", pde.r);
  pde_app->add_option("--mu", pde.mu);
  pde_app->add_option("--sigma", pde.sigma, "Volatility of the complete model");
  pde_app->add_option("--kappa", pde.kappa);
  pde_app->add_option("--nu-bar", pde.nu_bar);
  pde_app->add_option("--nu0", pde.nu0, "Initial variance (default: nu-bar)");
  pde_app->add_option("--eps-vol", pde.eps_vol);
  pde_app->add_option("--rho", pde.rho);
  pde_app->add_option("--alpha", pde.alpha);
  pde_app->add_option("--steps", pde.steps);
  pde_app->add_flag("--surface", pde.surface, "Emit the surface (t, q[, nu], p, delta) instead of the point value");
  pde_app->callback([&] { action = [&](const SolverConfig&) { return pde_cmd(pde); }; });

  auto* q_app = app.add_subcommand("quantum", "Trace-market hedge, or implied distribution over a strike grid");
  q_app->add_option("--market", quantum.market, "Quantum market JSON {q, ops, dt?}")->required();
  q_app->add_option("--payoff", quantum.payoff, "kind:strike on Q - k B, or operator JSON file");
  q_app->add_option("--alpha", quantum.alpha);
  q_app->add_option("--strike-grid", quantum.strike_grid, "a:b:n for the implied distribution");
  q_app->callback([&] { action = [&](const SolverConfig& cfg) { return quantum_cmd(quantum, cfg); }; });

  auto* xva = app.add_subcommand("xva", "Threshold prices, margins and viability window");
  xva->add_option("--scenario", scenario, "Scenario JSON")->required();
  xva->add_option("--price-grid", price_grid, "a:b:n");
  xva->callback([&] { action = [&](const SolverConfig& cfg) { return xva_cmd(scenario, price_grid, cfg); }; });

  auto* st = app.add_subcommand("study", "Tabulate a synthetic-model study");
  st->add_option("name", study.name, "Study name")->required()->check(CLI::IsMember(study_names()));
  st->add_option("--alpha", study.alpha);
  st->add_option("--r", study.r);
  st->add_option("--dist", study.dist, "normal, poisson or uniform")->check(CLI::IsMember({"normal", "poisson", "uniform"}));
  st->add_option("--payoff", study.payoff, "call or digital")->check(CLI::IsMember({"call", "digital"}));
  st->add_option("--samples", study.samples);
  st->add_option("--target", study.target, "Initial underlying price of the classical study");
  st->add_option("--theta", study.theta);
  st->add_option("--eps", study.eps);
  st->add_option("--strike-grid", strike_grid, "a:b:n");
  st->add_option("--lambda-grid", lambda_grid, "a:b:n");
  st->add_option("--price-grid", price_grid, "a:b:n");
  st->callback([&] {
    action = [&](const SolverConfig& cfg) {
      study.seed = common.seed;
      study.cfg = cfg;
      if (!strike_grid.empty()) study.strikes = parse_grid(strike_grid);
      if (!lambda_grid.empty()) study.lambdas = parse_grid(lambda_grid);
      if (!price_grid.empty()) study.prices = parse_grid(price_grid);
      if (common.out.empty()) common.out = study.name + (common.format == "json" ? ".json" : ".csv");
      StudyOutput o = run_study(study);
      return Result{std::move(o.table), std::move(o.report), std::nullopt};
    };
  });

  auto* val = app.add_subcommand("validate", "Schema check of a market, operator or scenario file");
  val->add_option("config", config, "Config JSON path")->required();

  for (CLI::App* sub : {risk, cal, price, book, risk_cmd, pde_app, q_app, xva, st}) add_common(sub, common);

  std::vector<std::string> argv_store{"entropic"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  Report report;
  try {
    if (val->parsed()) return validate_cmd(config, out);
    command = app.get_subcommands().front()->get_name();
    const Format format = parse_format(common.format);
    Result r = action(common.cfg());
    if (r.report.command.empty()) r.report.command = command;
    report = r.report;
    const auto emit = [&](std::ostream& os) {
      if (format == Format::Json && r.document) {
        os << r.document->dump(2) << '\n';
      } else {
        write_table(os, r.table, format);
      }
    };
    if (common.out.empty()) {
      emit(out);
    } else {
      std::ofstream os(common.out);
      if (!os) throw InvalidInput("cannot write '" + common.out + "'");
      emit(os);
    }
    write_report(report, report_path(common));
    return kExitOk;
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << '\n';
    report.status = "invalid_input";
    report.message = e.what();
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    report.status = "solver_failure";
    report.message = e.what();
    report.note(e.residual(), e.iterations());
  } catch (const Json::exception& e) {
    err << "invalid input: " << e.what() << '\n';
    report.status = "invalid_input";
    report.message = e.what();
  }
  report.command = command;
  try {
    write_report(report, report_path(common));
  } catch (const InvalidInput& e) {
    err << e.what() << '\n';
  }
  return report.status == "solver_failure" ? kExitSolver : kExitInvalid;
}

}  // namespace entropic::cli
