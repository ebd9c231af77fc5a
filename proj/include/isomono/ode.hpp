#pragma once

#include <algorithm>
#include <cmath>

#include "isomono/core.hpp"

namespace isomono {

struct OdeOptions {
  double tol = 1e-10;  // mixed absolute/relative local error bound
  double h0 = 0.0;     // initial step; 0 picks one from the interval length
  double hmin_rel = 1e-13;
  long max_steps = 2'000'000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
};

/// Dormand-Prince 5(4) on a complex vector state, y' = f(s, y), s real.
/// Throws NumericAbort on step-size underflow or a non-finite state.
template <class F>
Vec dopri5(F&& f, double s0, double s1, Vec y, const OdeOptions& opt = {}, OdeStats* stats = nullptr) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double span = s1 - s0;
  if (span == 0.0) return y;
  const double dir = span > 0 ? 1.0 : -1.0;
  double h = opt.h0 > 0 ? opt.h0 : std::abs(span) * 1e-2;
  const double hmin = opt.hmin_rel * std::max(1.0, std::abs(span));
  double s = s0;
  Vec k1 = f(s, y);
  Vec comp = Vec::Zero(y.size());  // Kahan compensation for the state update
  double err_prev = 1.0;
  OdeStats st;
  while (dir * (s1 - s) > 0) {
    if (st.accepted + st.rejected > opt.max_steps) throw NumericAbort("integrator: step budget exhausted");
    h = std::min(h, std::abs(s1 - s));
    const double hs = dir * h;
    const Vec k2 = f(s + c2 * hs, y + hs * (a21 * k1));
    const Vec k3 = f(s + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
    const Vec k4 = f(s + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec k5 = f(s + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 = f(s + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vec incr = hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6) - comp;
    const Vec yn = y + incr;
    const Vec k7 = f(s + hs, yn);
    const Vec e = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double err = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      err = std::max(err, std::abs(e(i)) / (opt.tol * (1.0 + std::max(std::abs(y(i)), std::abs(yn(i))))));
    if (!std::isfinite(err)) throw NumericAbort("integrator: non-finite state");
    if (err <= 1.0) {
      s = (std::abs(s1 - s) <= h) ? s1 : s + hs;
      comp = (yn - y) - incr;
      y = yn;
      k1 = k7;
      ++st.accepted;
      // PI step control.
      const double fac = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.7 / 5) * std::pow(err_prev, 0.4 / 5);
      h *= std::clamp(fac, 0.2, 5.0);
      err_prev = std::max(err, 1e-4);
    } else {
      ++st.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h < hmin) throw NumericAbort("integrator: step size underflow (stiff or singular right-hand side)");
    }
  }
  if (stats) *stats = st;
  return y;
}

}  // namespace isomono
