#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "isomono/core.hpp"
#include "isomono/laurent.hpp"
#include "isomono/pfsum.hpp"
#include "isomono/ratfun.hpp"

namespace isomono {

using PolarPart = PolarTerm<Mat>;
using QuadraticDifferential = PFSum<cplx>;

struct PolarDivisor {
  std::vector<cplx> t;
  std::vector<int> l;
};

/// Fixed simple pole with residue (2 k pi i / n) Identity.
struct BasePole {
  cplx z{};
  int k = 0;

  [[nodiscard]] Mat residue(Eigen::Index n) const {
    return (2.0 * kPi * kI * static_cast<double>(k) / static_cast<double>(n)) * identity(n);
  }
};

/// A = (connection) - d, as a matrix of dz-coefficients in the flat frame of
/// the trivial reference connection. Poles in D carry the dynamics; `extra`
/// poles (twist points and anything else outside D) and the base pole are
/// fixed data.
class Connection {
 public:
  Connection() = default;
  Connection(Eigen::Index n, std::vector<PolarPart> poles, std::vector<Mat> tail = {},
             std::vector<PolarPart> extra = {}, std::optional<BasePole> base = std::nullopt)
      : n_(n), poles_(std::move(poles)), extra_(std::move(extra)), tail_(std::move(tail)), base_(base) {
    validate();
  }

  [[nodiscard]] Eigen::Index n() const { return n_; }
  [[nodiscard]] const std::vector<PolarPart>& poles() const { return poles_; }
  [[nodiscard]] const std::vector<PolarPart>& extra() const { return extra_; }
  [[nodiscard]] const std::vector<Mat>& tail() const { return tail_; }
  [[nodiscard]] const std::optional<BasePole>& base() const { return base_; }

  [[nodiscard]] PolarDivisor divisor() const {
    PolarDivisor d;
    for (const auto& p : poles_) {
      d.t.push_back(p.t);
      d.l.push_back(p.order());
    }
    return d;
  }

  /// Every finite pole: D, then extra, then the base pole.
  [[nodiscard]] std::vector<PolarPart> all_polar() const {
    std::vector<PolarPart> all = poles_;
    all.insert(all.end(), extra_.begin(), extra_.end());
    if (base_) all.push_back({base_->z, {base_->residue(n_)}});
    return all;
  }

  [[nodiscard]] PFSum<Mat> as_pfsum() const { return PFSum<Mat>(all_polar(), tail_, zero_mat(n_)); }

  [[nodiscard]] Mat operator()(cplx z) const { return as_pfsum()(z); }
  [[nodiscard]] Mat eval(cplx z) const { return (*this)(z); }

  /// Jet of the 1-form A at p through order kmax.
  [[nodiscard]] MatJet laurent(Point p, int kmax) const { return as_pfsum().laurent(p, kmax, true); }

  /// Pole order at t (0 if A is regular there).
  [[nodiscard]] int order_at(cplx t) const {
    for (const auto& p : all_polar())
      if (std::abs(p.t - t) <= tol::sep) return p.order();
    return 0;
  }

  [[nodiscard]] Connection with_poles(std::vector<PolarPart> poles) const {
    return Connection(n_, std::move(poles), tail_, extra_, base_);
  }
  [[nodiscard]] Connection with_extra(std::vector<PolarPart> extra) const {
    return Connection(n_, poles_, tail_, std::move(extra), base_);
  }

 private:
  void validate() {
    if (n_ < 1) throw MalformedInput("connection: rank must be positive");
    auto check = [&](const Mat& m) {
      if (m.rows() != n_ || m.cols() != n_) throw MalformedInput("connection: coefficient has wrong size");
    };
    for (const auto* list : {&poles_, &extra_})
      for (const auto& p : *list) {
        if (p.c.empty()) throw MalformedInput("connection: pole with empty polar part");
        for (const auto& m : p.c) check(m);
      }
    for (const auto& m : tail_) check(m);
    std::stable_sort(poles_.begin(), poles_.end(),
                     [](const PolarPart& a, const PolarPart& b) { return a.order() > b.order(); });
    const auto all = all_polar();
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j)
        if (std::abs(all[i].t - all[j].t) <= tol::sep) throw MalformedInput("connection: poles not separated");
  }

  Eigen::Index n_ = 0;
  std::vector<PolarPart> poles_;
  std::vector<PolarPart> extra_;
  std::vector<Mat> tail_;
  std::optional<BasePole> base_;
};

namespace detail {

inline void add_candidate(std::vector<cplx>& pts, cplx z) {
  for (const auto& p : pts)
    if (std::abs(p - z) <= 1e-7) return;
  pts.push_back(z);
}

/// dg g^{-1} + g A g^{-1} as a jet at p, valid through at least `need`.
inline MatJet gauge_jet(const Connection& a, const RatMat& g, const RatMat& dg, Point p, int need) {
  for (int k = need + 8; k < need + 200; k += 16) {
    const MatJet gj = g.laurent(p, k);
    const MatJet gi = inverse(gj, tol::cancel);
    const MatJet r = dg.laurent(p, k, true) * gi + gj * a.laurent(p, k) * gi;
    if (r.kmax() >= need) return r.truncated(need);
  }
  throw NumericAbort("gauge_transform: could not reach the requested jet order");
}

}  // namespace detail

/// A -> dg g^{-1} + g A g^{-1}: the action on connection forms induced by
/// Y -> g Y on solutions of dY = A Y.
inline Connection gauge_transform(const Connection& a, const RatMat& g) {
  if (g.size() != a.n()) throw MalformedInput("gauge_transform: size mismatch");
  const RatScalar det = g.determinant();
  if (det.is_zero()) throw DegenerateError("gauge_transform: g is identically singular");

  std::vector<cplx> pts;
  for (const auto& p : a.all_polar()) detail::add_candidate(pts, p.t);
  for (const auto& f : g.poles()) detail::add_candidate(pts, f.root);
  for (const auto& r : det.numerator().root_clusters()) detail::add_candidate(pts, r.first);

  const RatMat dg = g.derivative();
  std::vector<MatJet> jets;
  for (const auto& z : pts) jets.push_back(detail::gauge_jet(a, g, dg, Point::at(z), -1));
  const MatJet inf = detail::gauge_jet(a, g, dg, Point::inf(), -2);
  const PFSum<Mat> pf = PFSum<Mat>::from_jets(jets, inf, true);

  std::vector<PolarPart> poles;
  std::vector<PolarPart> extra;
  std::optional<BasePole> base;
  for (const auto& term : pf.polar()) {
    bool in_d = false;
    for (const auto& p : a.poles()) in_d = in_d || std::abs(p.t - term.t) <= 1e-7;
    if (in_d) {
      poles.push_back(term);
      continue;
    }
    if (a.base() && std::abs(a.base()->z - term.t) <= 1e-7 && term.order() == 1 &&
        max_abs(term.c[0] - a.base()->residue(a.n())) <= 1e-10) {
      base = a.base();
      continue;
    }
    extra.push_back(term);
  }
  return Connection(a.n(), std::move(poles), pf.tail(), std::move(extra), base);
}

/// tr(A^2) as a scalar rational function (q in q dz^2).
inline QuadraticDifferential spectral_quadratic(const Connection& a) {
  std::vector<ScalarJet> jets;
  const PFSum<Mat> pf = a.as_pfsum();
  for (const auto& p : pf.polar()) {
    const MatJet j = pf.laurent(Point::at(p.t), p.order() - 1, false);
    jets.push_back(trace(j * j));
  }
  // At infinity A is read as a function of w; its square's nonpositive powers
  // give the polynomial part of q.
  int top = static_cast<int>(a.tail().size()) - 1;
  const MatJet ji = pf.laurent(Point::inf(), std::max(top, 0), false);
  const ScalarJet qi = trace(ji * ji);
  return QuadraticDifferential::from_jets(jets, qi, false);
}

/// Eigen-decomposition of a regular leading term: eigenvalues sorted in
/// descending lexicographic (re, im) order, eigenvector columns normalized to
/// 1 at their own diagonal index.
struct RegularBasis {
  std::vector<cplx> lambda;
  Mat z0;
};

inline RegularBasis regular_basis(const Mat& lead) {
  const Eigen::Index n = lead.rows();
  Eigen::ComplexEigenSolver<Mat> es(lead);
  if (es.info() != Eigen::Success) throw NumericAbort("eigen-decomposition failed");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  const Vec ev = es.eigenvalues();
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (ev(a).real() != ev(b).real()) return ev(a).real() > ev(b).real();
    return ev(a).imag() > ev(b).imag();
  });
  RegularBasis rb;
  rb.z0 = Mat(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index s = idx[static_cast<std::size_t>(j)];
    rb.lambda.push_back(ev(s));
    Vec v = es.eigenvectors().col(s);
    if (std::abs(v(j)) > 1e-8 * v.norm())
      v /= v(j);
    else
      v /= v.norm();
    rb.z0.col(j) = v;
  }
  for (std::size_t a = 0; a < rb.lambda.size(); ++a)
    for (std::size_t b = a + 1; b < rb.lambda.size(); ++b)
      if (std::abs(rb.lambda[a] - rb.lambda[b]) < tol::reg)
        throw RegularityError("leading term is not regular (eigenvalue gap below tolerance)");
  Eigen::FullPivLU<Mat> lu(rb.z0);
  if (!lu.isInvertible()) throw RegularityError("leading term is not diagonalizable");
  return rb;
}

/// Formal normal form A = dZ Z^{-1} + Z B Z^{-1} at a pole with regular
/// leading term. Z = Z0 (I + sum F_m w^m) with diag(F_m) = 0, B diagonal.
struct DiagonalJetPair {
  MatJet z;
  MatJet b;
  Mat z0;
  std::vector<cplx> lambda;
};

namespace detail {

/// Shared recursion. With `pointwise` the derivative term is dropped, which
/// gives the eigenvalue jets of A(z) instead of the formal normal form.
inline DiagonalJetPair diagonalize_jet(const MatJet& a, int l, int order, bool pointwise) {
  if (order < 0) throw DomainError("formal_diagonalize: order must be non-negative");
  const Point p = a.at();
  const RegularBasis rb = regular_basis(a.coeff(-l));
  const Eigen::Index n = rb.z0.rows();
  const Mat z0i = rb.z0.inverse();
  std::vector<Mat> at(static_cast<std::size_t>(order + 1));  // at[m] = Z0^{-1} A_{m-l} Z0
  for (int m = 0; m <= order; ++m) at[static_cast<std::size_t>(m)] = z0i * a.coeff(m - l) * rb.z0;
  std::vector<Mat> f(static_cast<std::size_t>(order + 1), zero_mat(n));
  std::vector<Mat> b(static_cast<std::size_t>(order + 1), zero_mat(n));
  f[0] = identity(n);
  for (Eigen::Index i = 0; i < n; ++i) b[0](i, i) = rb.lambda[static_cast<std::size_t>(i)];
  for (int m = 1; m <= order; ++m) {
    Mat c = at[static_cast<std::size_t>(m)];
    for (int j = 1; j <= m - 1; ++j)
      c += at[static_cast<std::size_t>(j)] * f[static_cast<std::size_t>(m - j)] -
           f[static_cast<std::size_t>(m - j)] * b[static_cast<std::size_t>(j)];
    const int dm = m - l + 1;  // index of F fed by the derivative term
    const bool deriv = !pointwise && dm >= 1;
    if (deriv && dm < m) c -= static_cast<double>(dm) * f[static_cast<std::size_t>(dm)];
    for (Eigen::Index i = 0; i < n; ++i) b[static_cast<std::size_t>(m)](i, i) = c(i, i);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index s = 0; s < n; ++s) {
        if (r == s) continue;
        const cplx gap = rb.lambda[static_cast<std::size_t>(r)] - rb.lambda[static_cast<std::size_t>(s)];
        if (deriv && dm == m) {
          // Fuchsian case: (lambda_r - lambda_s - m) F_rs = -C_rs.
          const cplx den = static_cast<double>(m) - gap;
          if (std::abs(den) < tol::reg) throw RegularityError("formal_diagonalize: resonant eigenvalues");
          f[static_cast<std::size_t>(m)](r, s) = c(r, s) / den;
        } else {
          f[static_cast<std::size_t>(m)](r, s) = -c(r, s) / gap;
        }
      }
  }
  std::vector<Mat> zc;
  for (int m = 0; m <= order; ++m) zc.push_back(rb.z0 * f[static_cast<std::size_t>(m)]);
  DiagonalJetPair out{MatJet(p, 0, std::move(zc), false, order), MatJet(p, -l, b, true, order - l), rb.z0,
                      rb.lambda};
  return out;
}

inline int pole_order_at(const Connection& a, Point p) {
  if (p.infinite) throw DomainError("formal_diagonalize: pole at infinity is not supported");
  const int l = a.order_at(p.z);
  if (l == 0) throw DomainError("formal_diagonalize: point is not a pole");
  return l;
}

}  // namespace detail

/// Z and B through the given order: the defect A - (dZ Z^{-1} + Z B Z^{-1})
/// vanishes through order (order - l).
inline DiagonalJetPair formal_diagonalize(const Connection& a, cplx p, int order) {
  const int l = detail::pole_order_at(a, Point::at(p));
  return detail::diagonalize_jet(a.laurent(Point::at(p), order - l), l, order, false);
}

inline DiagonalJetPair formal_diagonalize(const MatJet& a, int l, int order) {
  return detail::diagonalize_jet(a.truncated(order - l), l, order, false);
}

/// Eigenvalue jets of A(z) at a pole, orders -l .. order - l.
inline std::vector<ScalarJet> eigenvalue_jets(const Connection& a, cplx p, int order) {
  const int l = detail::pole_order_at(a, Point::at(p));
  const DiagonalJetPair d = detail::diagonalize_jet(a.laurent(Point::at(p), order - l), l, order, true);
  std::vector<ScalarJet> out;
  for (Eigen::Index i = 0; i < a.n(); ++i) {
    std::vector<cplx> c;
    for (int k = -l; k <= order - l; ++k) c.push_back(d.b.coeff(k)(i, i));
    out.emplace_back(Point::at(p), -l, std::move(c), true, order - l);
  }
  return out;
}

}  // namespace isomono
