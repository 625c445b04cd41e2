#pragma once

#include <cmath>
#include <utility>

#include "entropic/error.hpp"

namespace entropic::detail {

// Brent's method on [a, b]. Requires f(a) and f(b) of opposite sign or one of them zero.
template <class F>
double brent(F&& f, double a, double b, double xtol = 1e-15, int max_iter = 300) {
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (!(std::isfinite(fa) && std::isfinite(fb)) || (fa > 0.0) == (fb > 0.0)) {
    throw SolverFailure("root is not bracketed", std::min(std::abs(fa), std::abs(fb)), 0);
  }
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * 2.2e-16 * std::abs(b) + 0.5 * xtol;
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0.0) return b;
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double p, qq;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        qq = 1.0 - s;
      } else {
        const double r = fb / fc;
        const double t = fa / fc;
        p = s * (2.0 * m * t * (t - r) - (b - a) * (r - 1.0));
        qq = (t - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) qq = -qq;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * m * qq - std::abs(tol * qq), std::abs(e * qq))) {
        e = d;
        d = p / qq;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol ? d : (m > 0.0 ? tol : -tol);
    fb = f(b);
  }
  throw SolverFailure("bracketed root search did not converge", std::abs(fb), max_iter);
}

// Grows [lo, hi] geometrically around its start until f changes sign. f must be
// monotone. Bounds are clipped to [floor, ceil].
template <class F>
std::pair<double, double> expand_bracket(F&& f, double lo, double hi, double floor, double ceil,
                                         int max_iter = 200) {
  double flo = f(lo), fhi = f(hi);
  double width = hi - lo;
  for (int it = 0; it < max_iter; ++it) {
    if (flo == 0.0 || fhi == 0.0 || (flo > 0.0) != (fhi > 0.0)) return {lo, hi};
    width *= 2.0;
    const bool increasing = fhi > flo;
    // The root lies on the side where |f| is heading to zero.
    if ((flo > 0.0) == increasing) {
      hi = lo;
      fhi = flo;
      lo = std::max(floor, lo - width);
      flo = f(lo);
    } else {
      lo = hi;
      flo = fhi;
      hi = std::min(ceil, hi + width);
      fhi = f(hi);
    }
  }
  throw SolverFailure("could not bracket root", std::min(std::abs(flo), std::abs(fhi)), max_iter);
}

}  // namespace entropic::detail
