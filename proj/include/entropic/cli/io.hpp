#pragma once

// Config ingestion and table output for the command-line front end.

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entropic/calibrate.hpp"
#include "entropic/quantum.hpp"

namespace entropic::cli {

using Json = nlohmann::ordered_json;

// Rows of doubles under named columns, written with 12 significant digits.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  // Throws std::logic_error when the row width differs from the column count.
  void add(std::vector<double> row);
};

enum class Format { Csv, Json };

Format parse_format(const std::string& name);
std::string format_number(double x);
void write_csv(std::ostream& os, const Table& table);
// Array of objects keyed by column. Non-finite values are written as strings.
Json table_json(const Table& table);
void write_table(std::ostream& os, const Table& table, Format format);

// Solver diagnostics written beside every output.
struct Report {
  std::string command;
  std::string status = "ok";
  std::string message;
  double max_residual = 0.0;
  int max_iterations = 0;
  Json summary = Json::object();

  void note(double residual, int iterations);
  Json to_json() const;
};

// "a:b:n" gives n evenly spaced points from a to b; n = 1 gives a.
std::vector<double> parse_grid(const std::string& spec);

// Throws InvalidInput when the file is unreadable or not JSON.
Json read_json_file(const std::string& path);

struct Violation {
  std::string path;
  std::string message;
};

// Schema check of a market, quantum market, operator or xva scenario document. The kind
// is recognised from its keys: "ops" quantum market, "re" operator, "Q" market,
// "P" scenario.
std::vector<Violation> check_config(const Json& doc);

struct MarketInput {
  SampleMarket market;
  Measure measure;
};

// Throw InvalidInput carrying the first violation.
MarketInput parse_market(const Json& doc);
HermitianOperator parse_operator(const Json& doc);
QuantumMarket parse_quantum_market(const Json& doc);

// Numbers, or the strings "inf" and "-inf".
double parse_number(const Json& value, const std::string& path);
Vector parse_vector(const Json& value, const std::string& path);

PayoffKind parse_payoff_kind(const std::string& name);

// "kind:strike" on the given asset, or a JSON file holding one payoff per outcome.
Vector parse_payoff(const std::string& spec, const SampleMarket& market, Eigen::Index asset);

}  // namespace entropic::cli
