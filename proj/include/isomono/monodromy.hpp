#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <vector>

#include "isomono/connection.hpp"
#include "isomono/core.hpp"
#include "isomono/ode.hpp"

namespace isomono {

/// Straight segment or circular arc, parametrized by s in [0, 1].
struct Segment {
  enum class Kind { Line, Arc };
  Kind kind = Kind::Line;
  cplx a{}, b{};          // line endpoints
  cplx center{};          // arc data
  double radius = 0.0;
  double theta0 = 0.0;
  double sweep = 0.0;     // signed; positive is counterclockwise

  static Segment line(cplx from, cplx to) { return Segment{Kind::Line, from, to, {}, 0.0, 0.0, 0.0}; }
  static Segment arc(cplx c, double r, double theta0, double sweep) {
    if (!(r > 0.0)) throw MalformedInput("arc radius must be positive");
    return Segment{Kind::Arc, {}, {}, c, r, theta0, sweep};
  }

  [[nodiscard]] cplx at(double s) const {
    if (kind == Kind::Line) return a + s * (b - a);
    return center + std::polar(radius, theta0 + s * sweep);
  }
  [[nodiscard]] cplx tangent(double s) const {
    if (kind == Kind::Line) return b - a;
    return kI * sweep * std::polar(radius, theta0 + s * sweep);
  }
  [[nodiscard]] cplx start() const { return at(0.0); }
  [[nodiscard]] cplx end() const { return at(1.0); }

  [[nodiscard]] Segment reversed() const {
    if (kind == Kind::Line) return line(b, a);
    return arc(center, radius, theta0 + sweep, -sweep);
  }

  [[nodiscard]] double distance_to(cplx p) const {
    if (kind == Kind::Line) {
      const cplx d = b - a;
      const double len2 = std::norm(d);
      const double s = len2 == 0.0 ? 0.0 : std::clamp(std::real((p - a) * std::conj(d)) / len2, 0.0, 1.0);
      return std::abs(p - at(s));
    }
    double best = std::min(std::abs(p - start()), std::abs(p - end()));
    if (p == center) return radius;
    // Closest point on the full circle, if its angle lies within the sweep.
    const double phi = std::arg(p - center);
    const double lo = std::min(theta0, theta0 + sweep), hi = std::max(theta0, theta0 + sweep);
    double rel = std::remainder(phi - lo, 2.0 * kPi);
    if (rel < 0) rel += 2.0 * kPi;
    if (rel <= hi - lo || hi - lo >= 2.0 * kPi) best = std::min(best, std::abs(std::abs(p - center) - radius));
    return best;
  }
};

struct Path {
  std::vector<Segment> segments;
  double delta = 0.0;  // required clearance; 0 means only the 2 tau_sep floor

  Path& then(const Segment& s) {
    if (!segments.empty() && std::abs(segments.back().end() - s.start()) > 1e-12 * std::max(1.0, std::abs(s.start())))
      throw MalformedInput("path: segments do not join");
    segments.push_back(s);
    return *this;
  }

  static Path circle(cplx c, double r) {
    Path p;
    p.then(Segment::arc(c, r, 0.0, 2.0 * kPi));
    return p;
  }

  [[nodiscard]] cplx start() const { return segments.front().start(); }
  [[nodiscard]] cplx end() const { return segments.back().end(); }

  [[nodiscard]] Path reversed() const {
    Path p;
    p.delta = delta;
    for (auto it = segments.rbegin(); it != segments.rend(); ++it) p.segments.push_back(it->reversed());
    return p;
  }

  [[nodiscard]] double clearance(const std::vector<cplx>& poles) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : segments)
      for (const auto& t : poles) best = std::min(best, s.distance_to(t));
    return best;
  }
};

inline Path concat(const Path& first, const Path& second) {
  Path p = first;
  for (const auto& s : second.segments) p.then(s);
  p.delta = std::max(first.delta, second.delta);
  return p;
}

/// Finite poles of A in storage order: D, then extra, then the base pole.
inline std::vector<cplx> finite_poles(const Connection& a) {
  std::vector<cplx> out;
  for (const auto& p : a.all_polar()) out.push_back(p.t);
  return out;
}

namespace detail {

/// Adaptive Gauss-Legendre quadrature of a smooth complex integrand on [lo, hi].
template <class F>
cplx integrate_smooth(const F& f, double lo, double hi, double tol, int depth = 0) {
  static constexpr std::array<double, 8> x{0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                                           0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                           0.9445750230732326, 0.9894009349916499};
  static constexpr std::array<double, 8> w{0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                           0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                           0.0622535239386479, 0.0271524594117541};
  auto gl = [&](double a, double b) {
    const double m = 0.5 * (a + b), r = 0.5 * (b - a);
    cplx acc{};
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * (f(m - r * x[i]) + f(m + r * x[i]));
    return r * acc;
  };
  const double mid = 0.5 * (lo + hi);
  const cplx whole = gl(lo, hi);
  const cplx halves = gl(lo, mid) + gl(mid, hi);
  if (std::abs(whole - halves) <= tol * std::max(1.0, std::abs(halves)) || depth > 40) return halves;
  return integrate_smooth(f, lo, mid, 0.5 * tol, depth + 1) + integrate_smooth(f, mid, hi, 0.5 * tol, depth + 1);
}

inline Vec mat_to_vec(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }
inline Mat vec_to_mat(const Vec& v, Eigen::Index n) { return Eigen::Map<const Mat>(v.data(), n, n); }

}  // namespace detail

struct TransportResult {
  Mat y;
  cplx trace_integral{};  // integral of tr A along the path, by independent quadrature
  double abel_defect = 0.0;  // |det Y - exp(trace_integral)| relative to max(1, |det Y|)
};

/// Y(end) for dY/dz = A(z) Y along the path with Y(start) = I.
inline TransportResult transport_checked(const Connection& a, const Path& path, double tol) {
  if (!(tol > 0.0)) throw MalformedInput("transport: tol must be positive");
  if (path.segments.empty()) throw MalformedInput("transport: empty path");
  const auto poles = finite_poles(a);
  const double need = std::max(path.delta, 2.0 * tol::sep);
  if (path.clearance(poles) < need) throw PreconditionError("transport: path violates pole clearance");
  const Eigen::Index n = a.n();
  const PFSum<Mat> pf = a.as_pfsum();
  Mat y = identity(n);
  cplx tr_int{};
  // The local error bound is tightened so the accumulated error stays below tol.
  const OdeOptions opt{0.05 * tol, 0.0, 1e-13, 2'000'000};
  for (const auto& seg : path.segments) {
    auto rhs = [&](double s, const Vec& v) -> Vec {
      const Mat am = pf(seg.at(s)) * seg.tangent(s);
      return detail::mat_to_vec(am * detail::vec_to_mat(v, n));
    };
    y = detail::vec_to_mat(dopri5(rhs, 0.0, 1.0, detail::mat_to_vec(y), opt), n);
    tr_int += detail::integrate_smooth([&](double s) { return pf(seg.at(s)).trace() * seg.tangent(s); }, 0.0, 1.0,
                                       1e-14);
  }
  const cplx det = y.determinant();
  const double defect = std::abs(det - std::exp(tr_int)) / std::max(1.0, std::abs(det));
  return TransportResult{y, tr_int, defect};
}

inline Mat transport(const Connection& a, const Path& path, double tol) { return transport_checked(a, path, tol).y; }

// ---------------------------------------------------------------------------
// Monodromy representation

struct MonodromyRep {
  cplx base{};
  std::vector<std::size_t> order;  // indices into finite_poles, in loop order
  std::vector<cplx> poles;         // loop order
  std::vector<Path> loops;
  std::vector<Mat> matrices;

  /// M_l ... M_1.
  [[nodiscard]] Mat ordered_product() const {
    Mat p = identity(matrices.empty() ? 0 : matrices.front().rows());
    for (const auto& m : matrices) p = m * p;
    return p;
  }

  /// First-order sensitivity of the ordered product to relative errors in
  /// the factors: sum_i |M_l..M_{i+1}| |M_i| |M_{i-1}..M_1| (Frobenius).
  [[nodiscard]] double product_sensitivity() const {
    double kappa = 0.0;
    for (std::size_t i = 0; i < matrices.size(); ++i) {
      Mat left = identity(matrices[i].rows()), right = identity(matrices[i].rows());
      for (std::size_t j = i + 1; j < matrices.size(); ++j) left = matrices[j] * left;
      for (std::size_t j = 0; j < i; ++j) right = matrices[j] * right;
      kappa += left.norm() * matrices[i].norm() * right.norm();
    }
    return kappa;
  }
};

/// Poles sorted by increasing argument of t - z0, ties by modulus.
inline std::vector<std::size_t> loop_order(const std::vector<cplx>& poles, cplx z0) {
  std::vector<std::size_t> idx(poles.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    const double ai = std::arg(poles[i] - z0), aj = std::arg(poles[j] - z0);
    if (ai != aj) return ai < aj;
    return std::abs(poles[i] - z0) < std::abs(poles[j] - z0);
  });
  return idx;
}

/// Loop radius: a quarter of the distance to the nearest other pole, kept
/// away from the base point.
inline double loop_radius(const std::vector<cplx>& poles, std::size_t i, cplx z0) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < poles.size(); ++j)
    if (j != i) d = std::min(d, std::abs(poles[j] - poles[i]));
  if (!std::isfinite(d)) d = std::abs(z0 - poles[i]);
  return 0.25 * std::min(d, 2.0 * std::abs(z0 - poles[i]));
}

/// Radial segment to the circle of radius rho around t, full positive circle, radial return.
inline Path keyhole(cplx z0, cplx t, double rho) {
  const cplx u = (z0 - t) / std::abs(z0 - t);
  const cplx touch = t + rho * u;
  const Segment circle = Segment::arc(t, rho, std::arg(u), 2.0 * kPi);
  Path p;
  p.then(Segment::line(z0, touch)).then(circle).then(Segment::line(circle.end(), z0));
  return p;
}

inline MonodromyRep monodromy_rep(const Connection& a, cplx z0, double tol, std::vector<std::size_t> order) {
  const auto poles = finite_poles(a);
  if (order.size() != poles.size()) throw MalformedInput("monodromy_rep: loop order does not cover the poles");
  for (const auto& t : poles)
    if (std::abs(t - z0) <= 2.0 * tol::sep) throw PreconditionError("monodromy_rep: base point is at a pole");
  MonodromyRep rep;
  rep.base = z0;
  rep.order = std::move(order);
  for (std::size_t i : rep.order) {
    const Path loop = keyhole(z0, poles.at(i), loop_radius(poles, i, z0));
    rep.poles.push_back(poles[i]);
    rep.matrices.push_back(transport(a, loop, tol));
    rep.loops.push_back(loop);
  }
  return rep;
}

inline MonodromyRep monodromy_rep(const Connection& a, cplx z0, double tol) {
  return monodromy_rep(a, z0, tol, loop_order(finite_poles(a), z0));
}

/// Smallest distance from any pole to the keyhole loops drawn from z0 to the other poles.
inline double star_clearance(const std::vector<cplx>& poles, cplx z0) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poles.size(); ++i) {
    const Path loop = keyhole(z0, poles[i], loop_radius(poles, i, z0));
    for (std::size_t j = 0; j < poles.size(); ++j)
      if (j != i) best = std::min(best, loop.clearance({poles[j]}));
    best = std::min(best, loop_radius(poles, i, z0));
  }
  return best;
}

/// Base point on a ring around the poles maximizing the keyhole clearance
/// over every pole configuration given.
inline cplx choose_base_point(const std::vector<std::vector<cplx>>& configurations) {
  if (configurations.empty() || configurations.front().empty()) return cplx{};
  cplx c{};
  std::size_t count = 0;
  double spread = 0.0;
  for (const auto& cfg : configurations)
    for (const auto& t : cfg) {
      c += t;
      ++count;
    }
  c /= static_cast<double>(count);
  for (const auto& cfg : configurations)
    for (const auto& t : cfg) spread = std::max(spread, std::abs(t - c));
  cplx best = c + 2.0 * std::max(spread, 1.0);
  double best_score = -1.0;
  for (double ring : {1.5, 2.0, 3.0})
    for (int k = 0; k < 72; ++k) {
      const cplx z = c + ring * std::max(spread, 1.0) * std::polar(1.0, 2.0 * kPi * (k + 0.5) / 72.0);
      double score = std::numeric_limits<double>::infinity();
      for (const auto& cfg : configurations) score = std::min(score, star_clearance(cfg, z));
      if (score > best_score) {
        best_score = score;
        best = z;
      }
    }
  return best;
}

inline cplx choose_base_point(const Connection& a) { return choose_base_point({finite_poles(a)}); }

/// Coefficients of det(x I - M) from the leading 1 down to the constant term.
inline std::vector<cplx> char_poly(const Mat& m) {
  const Eigen::Index n = m.rows();
  std::vector<cplx> c(static_cast<std::size_t>(n + 1));
  c[0] = 1.0;
  Mat mk = zero_mat(n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    mk = m * mk + c[static_cast<std::size_t>(k - 1)] * identity(n);
    c[static_cast<std::size_t>(k)] = -(m * mk).trace() / static_cast<double>(k);
  }
  return c;
}

/// Per loop the characteristic-polynomial coefficients, then tr(M_i M_{i+1})
/// for consecutive loops.
inline std::vector<cplx> conjugacy_invariants(const MonodromyRep& rep) {
  std::vector<cplx> out;
  for (const auto& m : rep.matrices) {
    const auto c = char_poly(m);
    out.insert(out.end(), c.begin(), c.end());
  }
  for (std::size_t i = 0; i + 1 < rep.matrices.size(); ++i) out.push_back((rep.matrices[i] * rep.matrices[i + 1]).trace());
  return out;
}

/// Normwise magnitude of each entry of conjugacy_invariants: |M|_F^k for the
/// coefficient of x^{n-k}, |M_i|_F |M_{i+1}|_F for the pair traces. Rounding
/// in the loop matrices perturbs an invariant by roughly eps times this.
inline std::vector<double> invariant_scales(const MonodromyRep& rep) {
  std::vector<double> out;
  for (const auto& m : rep.matrices) {
    double p = 1.0;
    for (Eigen::Index k = 0; k <= m.rows(); ++k, p *= m.norm()) out.push_back(p);
  }
  for (std::size_t i = 0; i + 1 < rep.matrices.size(); ++i)
    out.push_back(rep.matrices[i].norm() * rep.matrices[i + 1].norm());
  return out;
}

/// Monodromy around a single point on a small circle starting on the circle;
/// used for points where only the conjugacy class matters.
inline Mat local_monodromy(const Connection& a, cplx t, double tol) {
  const auto poles = finite_poles(a);
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : poles)
    if (std::abs(p - t) > tol::sep) d = std::min(d, std::abs(p - t));
  if (!std::isfinite(d)) d = 1.0;
  return transport(a, Path::circle(t, 0.25 * d), tol);
}

}  // namespace isomono
