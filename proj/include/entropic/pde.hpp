#pragma once

#include <functional>
#include <vector>

#include "entropic/measure.hpp"

namespace entropic {

// dq = q (mu dt + sqrt(nu) dy), funding at rate r.
struct BsParams {
  double r = 0.0;
  double mu = 0.0;
  double nu = 0.04;
};

// Heston variance: dnu = kappa (nu_bar - nu) dt + eps_vol sqrt(nu) dz, corr(dy, dz) = rho.
struct SvParams {
  double r = 0.0;
  double mu = 0.0;
  double kappa = 0.0;
  double nu_bar = 0.04;
  double eps_vol = 0.0;
  double rho = 0.0;
};

using ScalarPayoff = std::function<double(double)>;

// Uniform time steps on [0, T]. The first `rannacher` steps are taken as two implicit
// Euler half steps each to damp the payoff kink.
struct Grid1D {
  Vector q;
  int steps = 200;
  int rannacher = 2;
};

struct Grid2D {
  Vector q;
  Vector nu;
  int steps = 200;
  int rannacher = 2;
};

// 201 nodes on [0, 4 q0] and 200 steps.
Grid1D default_grid(double q0);
// Adds 101 variance nodes on [0, 8 nu_bar].
Grid2D default_grid(double q0, double nu_bar);

// p(i, j) and delta(i, j) at time t[i] and q[j]; t[0] = 0.
struct BsSurface {
  Vector t;
  Vector q;
  Matrix p;
  Matrix delta;

  // Linear interpolation in q at t = 0.
  double value_at(double q0) const;
  double delta_at(double q0) const;
};

// p[i](j, k) at time t[i], q[j], nu[k].
struct SvSurface {
  Vector t;
  Vector q;
  Vector nu;
  std::vector<Matrix> p;
  std::vector<Matrix> delta;

  // Bilinear interpolation at t = 0.
  double value_at(double q0, double nu0) const;
  double delta_at(double q0, double nu0) const;
};

// Terminal values are payoff averages over each interior node's dual cell.
//
// 0 = p_t - (p - delta q) r + 1/2 p_qq q^2 nu with delta = p_q, backward from p(T) = payoff.
// Crank-Nicolson in time, p_qq = 0 at the top q node.
BsSurface solve_bs_complete(const BsParams& params, const ScalarPayoff& payoff, double T, const Grid1D& grid);

// 0 = p_t - p r + p_q q r + p_nu (kappa (nu_bar - nu) - (mu - r) rho eps)
//     + 1/2 p_qq q^2 nu + p_qnu q nu rho eps + 1/2 p_nunu nu eps^2
//     - 1/2 alpha p_nu^2 nu (1 - rho^2) eps^2,
// delta = p_q + p_nu rho eps / q. The reserve term is lagged one time level.
SvSurface solve_sv_incomplete(const SvParams& params, double alpha, const ScalarPayoff& payoff, double T,
                              const Grid2D& grid);

// Price-measure parameters: mu -> r, nu_bar -> nu_bar - (mu - r) rho eps / kappa.
SvParams heston_price_measure(const SvParams& params);

// Closed-form Black-Scholes call with continuous funding rate r.
double black_scholes_call(double q, double k, double sigma, double r, double T);

}  // namespace entropic
