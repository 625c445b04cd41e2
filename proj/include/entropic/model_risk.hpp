#pragma once

#include "entropic/hedge.hpp"

namespace entropic {

// First-order response to reweighting the expectation measure to m exp(eps W)
// normalised, at eps = 0.
struct CalibrationSensitivity {
  double dr = 0.0;
  Vector dphi;
};

CalibrationSensitivity perturb_calibration(const SampleMarket& market, const CalibrationResult& calib,
                                           const VectorRef& W);

// d p / d eps for the hedged price solved at risk aversion alpha.
double price_sensitivity(const SampleMarket& market, const CalibrationResult& calib, const HedgeResult& hedge,
                         const VectorRef& P, const VectorRef& W, double alpha);

struct Reprice {
  CalibrationResult calib;
  HedgeResult hedge;
};

// Recalibrates and rehedges under m exp(eps W) normalised. Throws InvalidInput if a
// reweighted outcome underflows to zero weight.
Reprice reweighted_reprice(const SampleMarket& market, const Measure& m, const VectorRef& W, double eps,
                           const VectorRef& P, double alpha, const SolverConfig& cfg = {});

}  // namespace entropic
