#include "entropic/cli/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "entropic/error.hpp"

namespace entropic::cli {

namespace {

constexpr double kWeightTol = 1e-12;
constexpr double kHermitianTol = 1e-12;

std::string join(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string join(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

bool is_number(const Json& v) {
  return v.is_number() || (v.is_string() && (v == "inf" || v == "-inf"));
}

void check_vector(const Json& v, const std::string& path, std::vector<Violation>& out) {
  if (!v.is_array() || v.empty()) {
    out.push_back({path, "expected a non-empty array of numbers"});
    return;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) out.push_back({join(path, i), "expected a number"});
  }
}

// Rows of equal length; returns the column count or 0 on failure.
std::size_t check_matrix(const Json& v, const std::string& path, std::vector<Violation>& out) {
  if (!v.is_array() || v.empty()) {
    out.push_back({path, "expected a non-empty array of rows"});
    return 0;
  }
  std::size_t cols = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t before = out.size();
    check_vector(v[i], join(path, i), out);
    if (out.size() != before) return 0;
    if (i == 0) cols = v[i].size();
    if (v[i].size() != cols) {
      out.push_back({join(path, i), "row length " + std::to_string(v[i].size()) + " differs from " +
                                        std::to_string(cols)});
      return 0;
    }
  }
  return cols;
}

Matrix to_matrix(const Json& v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v[0].size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = v[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

void check_dt(const Json& doc, const std::string& path, std::vector<Violation>& out) {
  if (!doc.contains("dt")) return;
  if (!doc["dt"].is_number() || !(doc["dt"].get<double>() > 0.0)) out.push_back({join(path, "dt"), "dt must be positive"});
}

void check_weights(const Json& doc, std::size_t outcomes, std::vector<Violation>& out) {
  if (!doc.contains("weights")) return;
  const std::size_t before = out.size();
  check_vector(doc["weights"], "/weights", out);
  if (out.size() != before) return;
  if (doc["weights"].size() != outcomes) {
    out.push_back({"/weights", "expected " + std::to_string(outcomes) + " weights"});
    return;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < outcomes; ++i) {
    const double w = doc["weights"][i];
    if (!(w > 0.0)) out.push_back({join("/weights", i), "weight must be positive"});
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightTol) out.push_back({"/weights", "weights sum to " + format_number(sum) + ", expected 1"});
}

void check_operator(const Json& doc, const std::string& path, std::vector<Violation>& out) {
  if (!doc.is_object() || !doc.contains("re")) {
    out.push_back({path, "expected an operator object with \"re\" and optional \"im\""});
    return;
  }
  const std::size_t before = out.size();
  const std::size_t n = check_matrix(doc["re"], join(path, "re"), out);
  if (out.size() != before) return;
  if (n != doc["re"].size()) {
    out.push_back({join(path, "re"), "operator must be square"});
    return;
  }
  Matrix im = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (doc.contains("im")) {
    const std::size_t m = check_matrix(doc["im"], join(path, "im"), out);
    if (out.size() != before) return;
    if (m != n || doc["im"].size() != n) {
      out.push_back({join(path, "im"), "imaginary part has a different shape"});
      return;
    }
    im = to_matrix(doc["im"]);
  }
  const ComplexMatrix h = to_matrix(doc["re"]).cast<std::complex<double>>() + std::complex<double>(0.0, 1.0) * im;
  const double asym = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (asym > kHermitianTol * std::max(1.0, h.cwiseAbs().maxCoeff())) {
    out.push_back({path, "operator is not Hermitian (max |H - H^dagger| = " + format_number(asym) + ")"});
  }
}

void check_market(const Json& doc, std::vector<Violation>& out) {
  const std::size_t before = out.size();
  if (!doc.contains("q")) out.push_back({"/q", "missing initial prices"});
  else check_vector(doc["q"], "/q", out);
  const std::size_t cols = check_matrix(doc["Q"], "/Q", out);
  if (out.size() != before) return;
  if (cols != doc["q"].size()) {
    out.push_back({"/Q", "expected " + std::to_string(doc["q"].size()) + " columns, one per asset"});
  }
  check_weights(doc, doc["Q"].size(), out);
  check_dt(doc, "", out);
}

void check_quantum_market(const Json& doc, std::vector<Violation>& out) {
  if (!doc.contains("q")) out.push_back({"/q", "missing initial prices"});
  else check_vector(doc["q"], "/q", out);
  const Json& ops = doc["ops"];
  if (!ops.is_array() || ops.empty()) {
    out.push_back({"/ops", "expected a non-empty array of operators"});
    return;
  }
  for (std::size_t i = 0; i < ops.size(); ++i) check_operator(ops[i], join("/ops", i), out);
  if (doc.contains("q") && doc["q"].is_array() && doc["q"].size() != ops.size()) {
    out.push_back({"/ops", "expected one operator per initial price"});
  }
  if (out.empty()) {
    for (std::size_t i = 1; i < ops.size(); ++i) {
      if (ops[i]["re"].size() != ops[0]["re"].size()) out.push_back({join("/ops", i), "operator dimensions differ"});
    }
  }
  check_dt(doc, "", out);
}

void check_scenario(const Json& doc, std::vector<Violation>& out) {
  const std::size_t before = out.size();
  check_vector(doc["P"], "/P", out);
  if (out.size() != before) return;
  const std::size_t n = doc["P"].size();
  if (doc.contains("b_return")) {
    check_vector(doc["b_return"], "/b_return", out);
    if (out.size() == before && doc["b_return"].size() != n) out.push_back({"/b_return", "expected one return per outcome"});
  }
  check_weights(doc, n, out);
  for (const char* key : {"c1", "c2"}) {
    if (doc.contains(key) && !is_number(doc[key]) && !doc[key].is_null()) {
      out.push_back({join("", key), "capital must be a number, \"inf\" or null"});
    }
  }
  for (const char* key : {"alphas", "betas"}) {
    if (!doc.contains(key)) continue;
    const Json& v = doc[key];
    if (!v.is_array() || v.size() != 2 || !is_number(v[0]) || !is_number(v[1])) {
      out.push_back({join("", key), "expected two numbers, buyer then seller"});
    }
  }
  if (doc.contains("rates")) {
    if (!doc["rates"].is_object()) out.push_back({"/rates", "expected an object with r1, r2 and r"});
    else {
      for (const auto& [key, value] : doc["rates"].items()) {
        if (key != "r1" && key != "r2" && key != "r") out.push_back({join("/rates", key), "unknown rate"});
        else if (!value.is_number()) out.push_back({join("/rates", key), "expected a number"});
      }
    }
  }
  check_dt(doc, "", out);
}

void throw_first(const std::vector<Violation>& v) {
  if (!v.empty()) throw InvalidInput("invalid config at " + (v.front().path.empty() ? "/" : v.front().path) + ": " + v.front().message);
}

}  // namespace

void Table::add(std::vector<double> row) {
  if (row.size() != columns.size()) throw std::logic_error("table row width differs from the column count");
  rows.push_back(std::move(row));
}

Format parse_format(const std::string& name) {
  if (name == "csv") return Format::Csv;
  if (name == "json") return Format::Json;
  throw InvalidInput("unknown format '" + name + "'");
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x == 0.0 ? 0.0 : x);
  return buf;
}

void write_csv(std::ostream& os, const Table& table) {
  for (std::size_t j = 0; j < table.columns.size(); ++j) os << (j ? "," : "") << table.columns[j];
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << format_number(row[j]);
    os << '\n';
  }
}

Json table_json(const Table& table) {
  Json rows = Json::array();
  for (const auto& row : table.rows) {
    Json obj = Json::object();
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (std::isfinite(row[j])) obj[table.columns[j]] = std::stod(format_number(row[j]));
      else obj[table.columns[j]] = format_number(row[j]);
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

void write_table(std::ostream& os, const Table& table, Format format) {
  if (format == Format::Csv) write_csv(os, table);
  else os << table_json(table).dump(2) << '\n';
}

void Report::note(double residual, int iterations) {
  if (std::isfinite(residual)) max_residual = std::max(max_residual, residual);
  max_iterations = std::max(max_iterations, iterations);
}

Json Report::to_json() const {
  Json j = Json::object();
  j["command"] = command;
  j["status"] = status;
  if (!message.empty()) j["message"] = message;
  j["max_residual"] = max_residual;
  j["max_iterations"] = max_iterations;
  j["summary"] = summary;
  return j;
}

std::vector<double> parse_grid(const std::string& spec) {
  const auto a = spec.find(':');
  const auto b = a == std::string::npos ? std::string::npos : spec.find(':', a + 1);
  if (b == std::string::npos) throw InvalidInput("grid '" + spec + "' is not of the form a:b:n");
  double lo = 0.0, hi = 0.0;
  long n = 0;
  try {
    std::size_t used = 0;
    lo = std::stod(spec.substr(0, a), &used);
    if (used != a) throw std::invalid_argument("lo");
    hi = std::stod(spec.substr(a + 1, b - a - 1), &used);
    if (used != b - a - 1) throw std::invalid_argument("hi");
    n = std::stol(spec.substr(b + 1), &used);
    if (used != spec.size() - b - 1) throw std::invalid_argument("n");
  } catch (const std::exception&) {
    throw InvalidInput("grid '" + spec + "' is not of the form a:b:n");
  }
  if (n < 1 || !std::isfinite(lo) || !std::isfinite(hi)) throw InvalidInput("grid '" + spec + "' needs n >= 1 and finite ends");
  if (n == 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidInput("malformed JSON in '" + path + "': " + e.what());
  }
}

std::vector<Violation> check_config(const Json& doc) {
  std::vector<Violation> out;
  if (!doc.is_object()) {
    out.push_back({"", "expected a JSON object"});
    return out;
  }
  if (doc.contains("ops")) check_quantum_market(doc, out);
  else if (doc.contains("re")) check_operator(doc, "", out);
  else if (doc.contains("Q")) check_market(doc, out);
  else if (doc.contains("P")) check_scenario(doc, out);
  else out.push_back({"", "unrecognised config: expected a market, operator, quantum market or xva scenario"});
  return out;
}

double parse_number(const Json& value, const std::string& path) {
  if (value.is_number()) return value.get<double>();
  if (value == "inf") return kInfinity;
  if (value == "-inf") return -kInfinity;
  throw InvalidInput("expected a number at " + path);
}

Vector parse_vector(const Json& value, const std::string& path) {
  if (!value.is_array()) throw InvalidInput("expected an array at " + path);
  Vector v(static_cast<Eigen::Index>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_number(value[i], join(path, i));
  return v;
}

MarketInput parse_market(const Json& doc) {
  std::vector<Violation> v;
  if (!doc.is_object() || !doc.contains("Q")) v.push_back({"", "expected a market with q and Q"});
  else check_market(doc, v);
  throw_first(v);
  SampleMarket market;
  market.q = parse_vector(doc["q"], "/q");
  market.Q = to_matrix(doc["Q"]);
  market.dt = doc.value("dt", 1.0);
  Measure m = doc.contains("weights") ? Measure(parse_vector(doc["weights"], "/weights"))
                                      : Measure::uniform(market.outcomes());
  validate(market, m);
  return {std::move(market), std::move(m)};
}

HermitianOperator parse_operator(const Json& doc) {
  std::vector<Violation> v;
  check_operator(doc, "", v);
  throw_first(v);
  const Matrix re = to_matrix(doc["re"]);
  const Matrix im = doc.contains("im") ? to_matrix(doc["im"]) : Matrix::Zero(re.rows(), re.cols());
  return HermitianOperator(re.cast<std::complex<double>>() + std::complex<double>(0.0, 1.0) * im.cast<std::complex<double>>());
}

QuantumMarket parse_quantum_market(const Json& doc) {
  std::vector<Violation> v;
  if (!doc.is_object() || !doc.contains("ops")) v.push_back({"", "expected a quantum market with q and ops"});
  else check_quantum_market(doc, v);
  throw_first(v);
  QuantumMarket m;
  m.q = parse_vector(doc["q"], "/q");
  for (const Json& op : doc["ops"]) m.ops.push_back(parse_operator(op));
  m.dt = doc.value("dt", 1.0);
  validate(m);
  return m;
}

PayoffKind parse_payoff_kind(const std::string& name) {
  if (name == "call") return PayoffKind::Call;
  if (name == "put") return PayoffKind::Put;
  if (name == "digital") return PayoffKind::Digital;
  if (name == "linear") return PayoffKind::Linear;
  throw InvalidInput("unknown payoff '" + name + "'");
}

Vector parse_payoff(const std::string& spec, const SampleMarket& market, Eigen::Index asset) {
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const PayoffKind kind = parse_payoff_kind(spec.substr(0, colon));
    double strike = 0.0;
    try {
      strike = std::stod(spec.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidInput("payoff '" + spec + "' has no numeric strike");
    }
    if (asset < 0 || asset >= market.assets()) throw InvalidInput("payoff asset index out of range");
    return make_payoff(market, kind, asset, strike);
  }
  const Vector P = parse_vector(read_json_file(spec), "");
  if (P.size() != market.outcomes()) throw InvalidInput("payoff file has the wrong number of outcomes");
  if (!P.allFinite()) throw InvalidInput("payoff file has non-finite entries");
  return P;
}

}  // namespace entropic::cli
