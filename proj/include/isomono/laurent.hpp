#pragma once

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <utility>
#include <vector>

#include "isomono/core.hpp"

namespace isomono {

namespace detail {

inline cplx zero_like(const cplx&) { return cplx{}; }
inline Mat zero_like(const Mat& m) { return Mat::Zero(m.rows(), m.cols()); }

inline double norm_of(const cplx& c) { return std::abs(c); }
inline double norm_of(const Mat& m) { return max_abs(m); }

}  // namespace detail

/// Truncated Laurent expansion sum_k c_k w^k around a point.
///
/// Coefficients below kmin are zero. Coefficients up to kmax are known (those
/// past the stored ones are zero); coefficients above kmax are unknown and
/// asking for them throws. Products and inverses track how many orders stay
/// valid, so a chain of jet operations never silently returns garbage.
/// `is_form` marks a dz-coefficient (a 1-form) rather than a function.
template <class T>
class Laurent {
 public:
  /// kmax of a jet that is exact (finitely many nonzero terms).
  static constexpr int kExact = 1 << 26;

  Laurent() = default;

  Laurent(Point at, int kmin, std::vector<T> coeffs, bool is_form = false, int kmax = kNone)
      : at_(at), kmin_(kmin), c_(std::move(coeffs)), is_form_(is_form) {
    if (c_.empty()) throw MalformedInput("Laurent: empty coefficient list");
    kmax_ = (kmax == kNone) ? stored_max() : kmax;
    if (kmax_ < stored_max()) c_.resize(static_cast<std::size_t>(std::max(kmax_ - kmin_ + 1, 1)));
  }

  /// All coefficients known to be zero through order kmax.
  static Laurent zero(Point at, const T& proto, int kmax = kExact, bool is_form = false) {
    return Laurent(at, std::min(kmax, 0), {detail::zero_like(proto)}, is_form, kmax);
  }

  static Laurent constant(Point at, const T& value, bool is_form = false) {
    return Laurent(at, 0, {value}, is_form, kExact);
  }

  [[nodiscard]] Point at() const { return at_; }
  [[nodiscard]] int kmin() const { return kmin_; }
  [[nodiscard]] int kmax() const { return kmax_; }
  [[nodiscard]] bool exact() const { return kmax_ >= kExact / 2; }
  [[nodiscard]] int stored_max() const { return kmin_ + static_cast<int>(c_.size()) - 1; }
  [[nodiscard]] bool is_form() const { return is_form_; }
  void set_form(bool f) { is_form_ = f; }
  [[nodiscard]] const T& proto() const { return c_.front(); }

  /// Coefficient of w^k; zero below kmin, throws above kmax.
  [[nodiscard]] T coeff(int k) const {
    if (k > kmax_) throw DomainError("Laurent: coefficient beyond truncation order requested");
    if (k < kmin_ || k > stored_max()) return detail::zero_like(c_.front());
    return c_[static_cast<std::size_t>(k - kmin_)];
  }

  /// Residue of a form jet (coefficient of w^{-1}).
  [[nodiscard]] T residue() const { return coeff(-1); }

  /// Forget coefficients above k.
  [[nodiscard]] Laurent truncated(int k) const {
    if (k >= kmax_) return *this;
    if (k < kmin_) return zero(at_, c_.front(), k, is_form_);
    std::vector<T> c(c_.begin(), c_.begin() + (std::min(k, stored_max()) - kmin_ + 1));
    return Laurent(at_, kmin_, std::move(c), is_form_, k);
  }

  /// Strip leading coefficients whose norm is below rel * (largest norm).
  [[nodiscard]] Laurent trimmed(double rel = 1e-13) const {
    double big = 0.0;
    for (const auto& x : c_) big = std::max(big, detail::norm_of(x));
    std::size_t first = 0;
    while (first + 1 < c_.size() && detail::norm_of(c_[first]) <= rel * big) ++first;
    if (first == 0) return *this;
    std::vector<T> c(c_.begin() + static_cast<std::ptrdiff_t>(first), c_.end());
    return Laurent(at_, kmin_ + static_cast<int>(first), std::move(c), is_form_, kmax_);
  }

  /// Order of the first coefficient above the relative threshold.
  [[nodiscard]] int valuation(double rel = 1e-13) const { return trimmed(rel).kmin(); }

  /// Derivative with respect to the local coordinate w.
  [[nodiscard]] Laurent derivative() const {
    std::vector<T> c;
    c.reserve(c_.size());
    for (int k = kmin_; k <= stored_max(); ++k) c.push_back(coeff(k) * static_cast<double>(k));
    return Laurent(at_, kmin_ - 1, std::move(c), is_form_, exact() ? kExact : kmax_ - 1);
  }

  Laurent operator-() const {
    std::vector<T> c;
    for (const auto& x : c_) c.push_back(-x);
    return Laurent(at_, kmin_, std::move(c), is_form_, kmax_);
  }

  friend Laurent operator+(const Laurent& a, const Laurent& b) {
    const int lo = std::min(a.kmin(), b.kmin());
    const int hi = std::min(a.kmax(), b.kmax());
    if (hi < lo) return zero(a.at_, a.c_.front(), hi, a.is_form_);
    const int top = std::min(hi, std::max(a.stored_max(), b.stored_max()));
    std::vector<T> c;
    for (int k = lo; k <= top; ++k) c.push_back(a.coeff(k) + b.coeff(k));
    return Laurent(a.at_, lo, std::move(c), a.is_form_ || b.is_form_, hi);
  }
  friend Laurent operator-(const Laurent& a, const Laurent& b) { return a + (-b); }

  friend Laurent operator*(const cplx& s, const Laurent& a) {
    std::vector<T> c;
    for (const auto& x : a.c_) c.push_back(s * x);
    return Laurent(a.at_, a.kmin_, std::move(c), a.is_form_, a.kmax_);
  }
  friend Laurent operator*(double s, const Laurent& a) { return cplx(s) * a; }

  [[nodiscard]] const std::vector<T>& data() const { return c_; }

 private:
  static constexpr int kNone = -(1 << 29);
  Point at_{};
  int kmin_ = 0;
  int kmax_ = 0;
  std::vector<T> c_;
  bool is_form_ = false;
};

namespace detail {

inline int product_kmax(int amin, int amax, int bmin, int bmax, int exact) {
  const long long x = static_cast<long long>(amax) + bmin;
  const long long y = static_cast<long long>(bmax) + amin;
  const long long hi = std::min(x, y);
  return static_cast<int>(std::min<long long>(hi, exact));
}

}  // namespace detail

using ScalarJet = Laurent<cplx>;
using MatJet = Laurent<Mat>;

/// Product of two jets with any coefficient types whose product is defined.
/// Valid orders: kmin = a.kmin + b.kmin, kmax = min(a.kmax + b.kmin, b.kmax + a.kmin).
template <class A, class B>
auto multiply(const Laurent<A>& a, const Laurent<B>& b) {
  using R = std::decay_t<decltype((std::declval<A>() * std::declval<B>()).eval())>;
  constexpr int ex = Laurent<R>::kExact;
  const int lo = a.kmin() + b.kmin();
  int hi = detail::product_kmax(a.kmin(), a.kmax(), b.kmin(), b.kmax(), ex);
  if (a.exact() && b.exact()) hi = ex;
  const int top = std::min(hi, a.stored_max() + b.stored_max());
  R proto = (a.proto() * b.proto()).eval();
  std::vector<R> c;
  for (int k = lo; k <= std::max(top, lo); ++k) {
    R acc = detail::zero_like(proto);
    if (k <= top)
      for (int i = std::max(a.kmin(), k - b.stored_max()); i <= std::min(a.stored_max(), k - b.kmin()); ++i)
        acc += a.coeff(i) * b.coeff(k - i);
    c.push_back(acc);
  }
  return Laurent<R>(a.at(), lo, std::move(c), a.is_form() || b.is_form(), std::max(hi, lo - 1));
}

inline MatJet operator*(const MatJet& a, const MatJet& b) { return multiply(a, b); }

inline ScalarJet operator*(const ScalarJet& a, const ScalarJet& b) {
  constexpr int ex = ScalarJet::kExact;
  const int lo = a.kmin() + b.kmin();
  int hi = detail::product_kmax(a.kmin(), a.kmax(), b.kmin(), b.kmax(), ex);
  if (a.exact() && b.exact()) hi = ex;
  const int top = std::min(hi, a.stored_max() + b.stored_max());
  std::vector<cplx> c;
  for (int k = lo; k <= std::max(top, lo); ++k) {
    cplx acc{};
    if (k <= top)
      for (int i = std::max(a.kmin(), k - b.stored_max()); i <= std::min(a.stored_max(), k - b.kmin()); ++i)
        acc += a.coeff(i) * b.coeff(k - i);
    c.push_back(acc);
  }
  return ScalarJet(a.at(), lo, std::move(c), a.is_form() || b.is_form(), std::max(hi, lo - 1));
}

/// Scalar jet times matrix jet.
inline MatJet operator*(const ScalarJet& a, const MatJet& b) {
  constexpr int ex = MatJet::kExact;
  const int lo = a.kmin() + b.kmin();
  int hi = detail::product_kmax(a.kmin(), a.kmax(), b.kmin(), b.kmax(), ex);
  if (a.exact() && b.exact()) hi = ex;
  const int top = std::min(hi, a.stored_max() + b.stored_max());
  std::vector<Mat> c;
  for (int k = lo; k <= std::max(top, lo); ++k) {
    Mat acc = detail::zero_like(b.proto());
    if (k <= top)
      for (int i = std::max(a.kmin(), k - b.stored_max()); i <= std::min(a.stored_max(), k - b.kmin()); ++i)
        acc += a.coeff(i) * b.coeff(k - i);
    c.push_back(acc);
  }
  return MatJet(a.at(), lo, std::move(c), a.is_form() || b.is_form(), std::max(hi, lo - 1));
}

/// Number of terms produced when inverting an exact jet (whose reciprocal is
/// an infinite series). Callers that need more truncate the input first.
inline constexpr int kExactInverseTerms = 48;

/// Reciprocal of a scalar jet. The true valuation is found with `rel`.
inline ScalarJet inverse(const ScalarJet& f, double rel = 1e-13) {
  const ScalarJet t = f.trimmed(rel);
  const cplx lead = t.coeff(t.kmin());
  if (lead == cplx{}) throw DomainError("inverse: jet is identically zero to known order");
  const int v = t.kmin();
  const int len = t.exact() ? kExactInverseTerms : t.kmax() - v + 1;
  std::vector<cplx> g(static_cast<std::size_t>(len));
  for (int k = 0; k < len; ++k) {
    cplx acc = (k == 0) ? cplx{1.0} : cplx{};
    for (int j = 1; j <= k; ++j) acc -= t.coeff(v + j) * g[static_cast<std::size_t>(k - j)];
    g[static_cast<std::size_t>(k)] = acc / lead;
  }
  return ScalarJet(f.at(), -v, std::move(g), false);
}

/// Scalar entry (i, j) of a matrix jet.
inline ScalarJet entry(const MatJet& m, Eigen::Index i, Eigen::Index j) {
  std::vector<cplx> c;
  for (int k = m.kmin(); k <= m.stored_max(); ++k) c.push_back(m.coeff(k)(i, j));
  return ScalarJet(m.at(), m.kmin(), std::move(c), m.is_form(), m.kmax());
}

inline MatJet assemble(const std::vector<std::vector<ScalarJet>>& e, Point at) {
  const auto n = static_cast<Eigen::Index>(e.size());
  int lo = e[0][0].kmin();
  int hi = e[0][0].kmax();
  int top = lo;
  bool form = false;
  for (const auto& row : e)
    for (const auto& x : row) {
      lo = std::min(lo, x.kmin());
      hi = std::min(hi, x.kmax());
      top = std::max(top, x.stored_max());
      form = form || x.is_form();
    }
  top = std::min(top, hi);
  std::vector<Mat> c;
  for (int k = lo; k <= std::max(top, lo); ++k) {
    Mat m = Mat::Zero(n, n);
    if (k <= top)
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = e[i][j].coeff(k);
    c.push_back(m);
  }
  return MatJet(at, lo, std::move(c), form, std::max(hi, lo - 1));
}

namespace detail {

inline ScalarJet det_jet(const std::vector<std::vector<ScalarJet>>& e) {
  const std::size_t n = e.size();
  if (n == 1) return e[0][0];
  ScalarJet acc = ScalarJet::zero(e[0][0].at(), cplx{});
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::vector<ScalarJet>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<ScalarJet> row;
      for (std::size_t k = 0; k < n; ++k)
        if (k != c) row.push_back(e[r][k]);
      minor.push_back(row);
    }
    ScalarJet term = e[0][c] * det_jet(minor);
    acc = (c % 2 == 0) ? acc + term : acc - term;
  }
  return acc;
}

inline std::vector<std::vector<ScalarJet>> entries(const MatJet& m) {
  const auto n = m.proto().rows();
  std::vector<std::vector<ScalarJet>> e(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) e[static_cast<std::size_t>(i)].push_back(entry(m, i, j));
  return e;
}

}  // namespace detail

inline ScalarJet determinant(const MatJet& m) { return detail::det_jet(detail::entries(m)); }

inline ScalarJet trace(const MatJet& m) {
  std::vector<cplx> c;
  for (int k = m.kmin(); k <= m.stored_max(); ++k) c.push_back(m.coeff(k).trace());
  return ScalarJet(m.at(), m.kmin(), std::move(c), m.is_form(), m.kmax());
}

/// Inverse of a matrix jet. Uses the direct recursion when the leading
/// coefficient is well conditioned and the adjugate/determinant route when the
/// determinant vanishes at the expansion point.
inline MatJet inverse(const MatJet& m, double rel = 1e-13) {
  const MatJet t = m.trimmed(rel);
  const Mat lead = t.coeff(t.kmin());
  Eigen::FullPivLU<Mat> lu(lead);
  const double scale = std::max(max_abs(lead), 1e-300);
  lu.setThreshold(1e-10);
  if (lu.isInvertible() && lu.rcond() > 1e-10 * scale / std::max(scale, 1.0)) {
    const int v = t.kmin();
    const int len = t.exact() ? kExactInverseTerms : t.kmax() - v + 1;
    const Mat l0 = lu.inverse();
    std::vector<Mat> g;
    for (int k = 0; k < len; ++k) {
      Mat acc = (k == 0) ? Mat(identity(lead.rows())) : Mat(zero_mat(lead.rows()));
      for (int j = 1; j <= k; ++j) acc -= t.coeff(v + j) * g[static_cast<std::size_t>(k - j)];
      g.push_back(l0 * acc);
    }
    return MatJet(m.at(), -v, std::move(g), false);
  }
  const auto e = detail::entries(m);
  const std::size_t n = e.size();
  const ScalarJet det_inv = inverse(detail::det_jet(e), rel);
  std::vector<std::vector<ScalarJet>> adj(n, std::vector<ScalarJet>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (n == 1) {
        adj[0][0] = ScalarJet::constant(m.at(), cplx{1.0});
        continue;
      }
      std::vector<std::vector<ScalarJet>> minor;
      for (std::size_t r = 0; r < n; ++r) {
        if (r == j) continue;
        std::vector<ScalarJet> row;
        for (std::size_t c = 0; c < n; ++c)
          if (c != i) row.push_back(e[r][c]);
        minor.push_back(row);
      }
      ScalarJet cof = detail::det_jet(minor);
      adj[i][j] = ((i + j) % 2 == 0) ? cof : -cof;
    }
  for (auto& row : adj)
    for (auto& x : row) x = x * det_inv;
  return assemble(adj, m.at());
}

/// Coefficients of (w + d)^{-m}, k = 0..order.
inline std::vector<cplx> inverse_power_series(cplx d, int m, int order) {
  std::vector<cplx> c(static_cast<std::size_t>(std::max(order, 0)) + 1);
  c[0] = std::pow(d, -m);
  for (int k = 1; k <= order; ++k)
    c[static_cast<std::size_t>(k)] =
        c[static_cast<std::size_t>(k - 1)] * (-static_cast<double>(m + k - 1) / k) / d;
  return c;
}

}  // namespace isomono
