#pragma once

// Study runners that tabulate the synthetic-model figures. Output depends only on the
// options, including the seed for sampled markets.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entropic/cli/io.hpp"
#include "entropic/tilt.hpp"

namespace entropic::cli {

struct StudyOptions {
  std::string name;
  std::uint64_t seed = 1;
  double alpha = 1.0;
  double r = 0.0;
  std::string dist = "normal";     // options: normal, poisson or uniform
  std::string payoff = "call";     // call or digital
  int samples = 1000;
  double target = -0.4;            // classical: initial underlying price
  double theta = 0.7853981633974483;
  // Eigenvalue gap of B; defaults to 1 for quantum and 0 for quantum-pricing.
  std::optional<double> eps;
  std::optional<std::vector<double>> strikes;
  std::optional<std::vector<double>> prices;  // xva price grid
  std::optional<std::vector<double>> lambdas;
  SolverConfig cfg;
};

struct StudyOutput {
  Table table;
  Report report;
};

const std::vector<std::string>& study_names();

// Throws InvalidInput for an unknown study or an empty grid.
StudyOutput run_study(const StudyOptions& options);

// Draws n samples of the named distribution and standardises them to zero mean and
// unit standard deviation.
Vector standardised_samples(const std::string& dist, int n, std::uint64_t seed);

}  // namespace entropic::cli
