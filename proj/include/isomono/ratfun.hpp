#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "isomono/core.hpp"
#include "isomono/laurent.hpp"

namespace isomono {

/// Polynomial in z with ascending coefficients.
class Polynomial {
 public:
  Polynomial() : c_{cplx{}} {}
  Polynomial(std::vector<cplx> c) : c_(std::move(c)) {  // NOLINT: implicit from coefficient list
    if (c_.empty()) c_.push_back(cplx{});
    strip();
  }
  Polynomial(std::initializer_list<cplx> c) : Polynomial(std::vector<cplx>(c)) {}

  static Polynomial constant(cplx a) { return Polynomial({a}); }
  /// z - a
  static Polynomial linear(cplx a) { return Polynomial({-a, cplx{1.0}}); }

  [[nodiscard]] int degree() const { return static_cast<int>(c_.size()) - 1; }
  [[nodiscard]] bool is_zero() const { return c_.size() == 1 && c_[0] == cplx{}; }
  [[nodiscard]] const std::vector<cplx>& coeffs() const { return c_; }
  [[nodiscard]] cplx coeff(int k) const {
    return (k < 0 || k > degree()) ? cplx{} : c_[static_cast<std::size_t>(k)];
  }

  [[nodiscard]] cplx operator()(cplx z) const {
    cplx acc{};
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
    return acc;
  }

  /// sum_k |c_k| |z|^k, the natural scale for deciding whether p(z) vanishes.
  [[nodiscard]] double abs_scale(cplx z) const {
    double acc = 0.0;
    const double r = std::abs(z);
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * r + std::abs(*it);
    return acc;
  }

  [[nodiscard]] Polynomial derivative() const {
    if (degree() == 0) return {};
    std::vector<cplx> d;
    for (int k = 1; k <= degree(); ++k) d.push_back(c_[static_cast<std::size_t>(k)] * static_cast<double>(k));
    return Polynomial(std::move(d));
  }

  /// Coefficients in the shifted variable w = z - p.
  [[nodiscard]] std::vector<cplx> taylor_at(cplx p) const {
    std::vector<cplx> a = c_;
    const int n = degree();
    for (int i = 0; i < n; ++i)
      for (int k = n - 1; k >= i; --k) a[static_cast<std::size_t>(k)] += p * a[static_cast<std::size_t>(k + 1)];
    return a;
  }

  /// Divide by (z - r); the remainder is dropped.
  [[nodiscard]] Polynomial deflate(cplx r) const {
    if (degree() == 0) return {};
    std::vector<cplx> q(static_cast<std::size_t>(degree()));
    cplx carry{};
    for (int k = degree(); k >= 1; --k) {
      carry = c_[static_cast<std::size_t>(k)] + carry * r;
      q[static_cast<std::size_t>(k - 1)] = carry;
    }
    return Polynomial(std::move(q));
  }

  /// Roots from the companion matrix.
  [[nodiscard]] std::vector<cplx> roots() const {
    const int n = degree();
    if (n < 1) return {};
    Mat comp = Mat::Zero(n, n);
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -c_[static_cast<std::size_t>(i)] / c_.back();
    Eigen::ComplexEigenSolver<Mat> es(comp, false);
    std::vector<cplx> r(es.eigenvalues().data(), es.eigenvalues().data() + n);
    return r;
  }

  /// Roots grouped into clusters (a multiple root splits into a ring of
  /// radius ~ eps^{1/m}); each cluster is replaced by its mean.
  [[nodiscard]] std::vector<std::pair<cplx, int>> root_clusters(double rel = 1e-4) const {
    std::vector<std::pair<cplx, int>> out;
    std::vector<cplx> sums;
    for (const auto& r : roots()) {
      bool placed = false;
      for (std::size_t i = 0; i < out.size() && !placed; ++i)
        if (std::abs(out[i].first - r) <= rel * std::max(1.0, std::abs(r))) {
          sums[i] += r;
          ++out[i].second;
          out[i].first = sums[i] / static_cast<double>(out[i].second);
          placed = true;
        }
      if (!placed) {
        out.emplace_back(r, 1);
        sums.push_back(r);
      }
    }
    return out;
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<cplx> c(static_cast<std::size_t>(std::max(a.degree(), b.degree()) + 1));
    for (int k = 0; k < static_cast<int>(c.size()); ++k) c[static_cast<std::size_t>(k)] = a.coeff(k) + b.coeff(k);
    return Polynomial(std::move(c));
  }
  friend Polynomial operator-(const Polynomial& a) {
    std::vector<cplx> c = a.c_;
    for (auto& x : c) x = -x;
    return Polynomial(std::move(c));
  }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    std::vector<cplx> c(static_cast<std::size_t>(a.degree() + b.degree() + 1));
    for (int i = 0; i <= a.degree(); ++i)
      for (int j = 0; j <= b.degree(); ++j) c[static_cast<std::size_t>(i + j)] += a.c_[i] * b.c_[j];
    return Polynomial(std::move(c));
  }
  friend Polynomial operator*(cplx s, const Polynomial& a) { return Polynomial::constant(s) * a; }

 private:
  void strip() {
    while (c_.size() > 1 && c_.back() == cplx{}) c_.pop_back();
  }
  std::vector<cplx> c_;
};

struct PoleFactor {
  cplx root;
  int mult = 1;
};

/// Rational function N(z) / prod (z - r_i)^{m_i}.
class RatScalar {
 public:
  RatScalar() = default;
  RatScalar(Polynomial num) : num_(std::move(num)) {}  // NOLINT: polynomials are rational
  RatScalar(Polynomial num, std::vector<PoleFactor> poles) : num_(std::move(num)) {
    for (const auto& f : poles) add_factor(f);
    cancel();
  }

  static RatScalar constant(cplx a) { return RatScalar(Polynomial::constant(a)); }
  /// c / (z - t)^m
  static RatScalar pole_term(cplx c, cplx t, int m) { return RatScalar(Polynomial::constant(c), {{t, m}}); }

  [[nodiscard]] const Polynomial& numerator() const { return num_; }
  [[nodiscard]] const std::vector<PoleFactor>& poles() const { return poles_; }
  [[nodiscard]] bool is_zero() const { return num_.is_zero(); }

  /// Multiplicity of the pole at t (0 if regular).
  [[nodiscard]] int pole_order(cplx t) const {
    for (const auto& f : poles_)
      if (std::abs(f.root - t) <= tol::cancel) return f.mult;
    return 0;
  }

  [[nodiscard]] Polynomial denominator() const {
    Polynomial d = Polynomial::constant(1.0);
    for (const auto& f : poles_)
      for (int k = 0; k < f.mult; ++k) d = d * Polynomial::linear(f.root);
    return d;
  }

  [[nodiscard]] cplx operator()(cplx z) const {
    cplx den{1.0};
    for (const auto& f : poles_) {
      if (z == f.root) throw DomainError("RatScalar: evaluation at a pole");
      den *= std::pow(z - f.root, f.mult);
    }
    return num_(z) / den;
  }

  /// Laurent expansion at p through order kmax (in w = z - p, or w = 1/z at
  /// infinity). With is_form the function is read as a dz-coefficient and the
  /// chart change dz = -dw/w^2 is applied at infinity.
  [[nodiscard]] ScalarJet laurent(Point p, int kmax, bool is_form = false) const {
    return p.infinite ? laurent_inf(kmax, is_form) : laurent_finite(p.z, kmax, is_form);
  }

  /// Residue of f dz at p.
  [[nodiscard]] cplx residue(Point p) const { return laurent(p, -1, true).coeff(-1); }

  [[nodiscard]] RatScalar derivative() const {
    // (N/D)' with D = prod (z-r)^m: numerator N' * prod(z-r) - N * sum_i m_i prod_{j!=i}(z-r_j),
    // every multiplicity raised by one.
    Polynomial lin = Polynomial::constant(1.0);
    for (const auto& f : poles_) lin = lin * Polynomial::linear(f.root);
    Polynomial acc = num_.derivative() * lin;
    for (std::size_t i = 0; i < poles_.size(); ++i) {
      Polynomial others = Polynomial::constant(static_cast<double>(poles_[i].mult));
      for (std::size_t j = 0; j < poles_.size(); ++j)
        if (j != i) others = others * Polynomial::linear(poles_[j].root);
      acc = acc - num_ * others;
    }
    std::vector<PoleFactor> p = poles_;
    for (auto& f : p) ++f.mult;
    return RatScalar(acc, p);
  }

  friend RatScalar operator*(const RatScalar& a, const RatScalar& b) {
    std::vector<PoleFactor> p = a.poles_;
    p.insert(p.end(), b.poles_.begin(), b.poles_.end());
    return RatScalar(a.num_ * b.num_, p);
  }
  friend RatScalar operator*(cplx s, const RatScalar& a) {
    RatScalar r = a;
    r.num_ = s * r.num_;
    return r;
  }
  friend RatScalar operator+(const RatScalar& a, const RatScalar& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    // Common denominator with multiplicity max(m_a, m_b) per root.
    std::vector<PoleFactor> common = a.poles_;
    for (const auto& f : b.poles_) {
      auto it = std::find_if(common.begin(), common.end(),
                             [&](const PoleFactor& g) { return std::abs(g.root - f.root) <= tol::cancel; });
      if (it == common.end())
        common.push_back(f);
      else
        it->mult = std::max(it->mult, f.mult);
    }
    auto lift = [&](const RatScalar& x) {
      Polynomial n = x.num_;
      for (const auto& f : common) {
        const int extra = f.mult - x.pole_order(f.root);
        for (int k = 0; k < extra; ++k) n = n * Polynomial::linear(f.root);
      }
      return n;
    };
    return RatScalar(lift(a) + lift(b), common);
  }
  friend RatScalar operator-(const RatScalar& a) { return cplx{-1.0} * a; }
  friend RatScalar operator-(const RatScalar& a, const RatScalar& b) { return a + (-b); }

 private:
  void add_factor(const PoleFactor& f) {
    if (f.mult <= 0) throw MalformedInput("RatScalar: pole multiplicity must be positive");
    for (auto& g : poles_) {
      if (g.root == f.root) {
        g.mult += f.mult;
        return;
      }
      if (std::abs(g.root - f.root) <= tol::cancel)
        throw MalformedInput("RatScalar: denominator roots coincide within tolerance but differ");
    }
    poles_.push_back(f);
  }

  void cancel() {
    if (num_.is_zero()) {
      poles_.clear();
      return;
    }
    for (auto& f : poles_) {
      while (f.mult > 0 && num_.degree() > 0 &&
             std::abs(num_(f.root)) <= tol::cancel * num_.abs_scale(f.root)) {
        num_ = num_.deflate(f.root);
        --f.mult;
      }
    }
    poles_.erase(std::remove_if(poles_.begin(), poles_.end(), [](const PoleFactor& f) { return f.mult == 0; }),
                 poles_.end());
  }

  ScalarJet laurent_finite(cplx p, int kmax, bool is_form) const {
    int lead = 0;
    for (const auto& f : poles_)
      if (std::abs(f.root - p) <= tol::cancel) lead = f.mult;
    const bool exact = (static_cast<int>(poles_.size()) == (lead > 0 ? 1 : 0));
    const int len = kmax + lead + 1;  // regular-part coefficients needed
    if (len <= 0) return ScalarJet::zero(Point::at(p), cplx{}, kmax, is_form);
    std::vector<cplx> s = num_.taylor_at(p);
    if (exact) {
      return ScalarJet(Point::at(p), -lead, std::move(s), is_form, ScalarJet::kExact).truncated(kmax);
    }
    s.resize(static_cast<std::size_t>(len));
    for (const auto& f : poles_) {
      if (std::abs(f.root - p) <= tol::cancel) continue;
      s = series_mul(s, inverse_power_series(p - f.root, f.mult, len - 1));
    }
    return ScalarJet(Point::at(p), -lead, std::move(s), is_form, kmax);
  }

  ScalarJet laurent_inf(int kmax, bool is_form) const {
    // f = w^{M-d} Ntilde(w) prod (1 - r w)^{-m}; a form picks up -w^{-2}.
    int big_m = 0;
    for (const auto& f : poles_) big_m += f.mult;
    const int d = num_.degree();
    const int shift = big_m - d + (is_form ? -2 : 0);
    const double sign = is_form ? -1.0 : 1.0;
    std::vector<cplx> s(num_.coeffs().rbegin(), num_.coeffs().rend());
    for (auto& x : s) x *= sign;
    if (poles_.empty())
      return ScalarJet(Point::inf(), shift, std::move(s), is_form, ScalarJet::kExact).truncated(kmax);
    const int len = kmax - shift + 1;
    if (len <= 0) return ScalarJet::zero(Point::inf(), cplx{}, kmax, is_form);
    s.resize(static_cast<std::size_t>(len));
    for (const auto& f : poles_) {
      std::vector<cplx> g(static_cast<std::size_t>(len));
      g[0] = 1.0;
      for (int k = 1; k < len; ++k)
        g[static_cast<std::size_t>(k)] =
            g[static_cast<std::size_t>(k - 1)] * (static_cast<double>(f.mult + k - 1) / k) * f.root;
      s = series_mul(s, g);
    }
    return ScalarJet(Point::inf(), shift, std::move(s), is_form, kmax);
  }

  static std::vector<cplx> series_mul(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    std::vector<cplx> c(a.size());
    for (std::size_t k = 0; k < c.size(); ++k)
      for (std::size_t i = 0; i <= k && i < b.size(); ++i) c[k] += b[i] * a[k - i];
    return c;
  }

  Polynomial num_;
  std::vector<PoleFactor> poles_;
};

/// Square matrix of rational functions.
class RatMat {
 public:
  RatMat() = default;
  explicit RatMat(Eigen::Index n) : n_(n), e_(static_cast<std::size_t>(n * n)) {}

  static RatMat constant(const Mat& m) {
    RatMat r(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) r(i, j) = RatScalar::constant(m(i, j));
    return r;
  }
  static RatMat identity(Eigen::Index n) { return constant(isomono::identity(n)); }
  /// M / (z - t)^k
  static RatMat pole_term(const Mat& m, cplx t, int k) {
    RatMat r(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) r(i, j) = RatScalar::pole_term(m(i, j), t, k);
    return r;
  }
  /// sum_k C_k z^k
  static RatMat polynomial(const std::vector<Mat>& coeffs) {
    const Eigen::Index n = coeffs.at(0).rows();
    RatMat r(n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        std::vector<cplx> c;
        for (const auto& m : coeffs) c.push_back(m(i, j));
        r(i, j) = RatScalar(Polynomial(c));
      }
    return r;
  }

  [[nodiscard]] Eigen::Index size() const { return n_; }
  RatScalar& operator()(Eigen::Index i, Eigen::Index j) { return e_[static_cast<std::size_t>(i * n_ + j)]; }
  [[nodiscard]] const RatScalar& operator()(Eigen::Index i, Eigen::Index j) const {
    return e_[static_cast<std::size_t>(i * n_ + j)];
  }

  [[nodiscard]] Mat operator()(cplx z) const {
    Mat m(n_, n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      for (Eigen::Index j = 0; j < n_; ++j) m(i, j) = (*this)(i, j)(z);
    return m;
  }

  [[nodiscard]] MatJet laurent(Point p, int kmax, bool is_form = false) const {
    std::vector<std::vector<ScalarJet>> e(static_cast<std::size_t>(n_));
    for (Eigen::Index i = 0; i < n_; ++i)
      for (Eigen::Index j = 0; j < n_; ++j) e[static_cast<std::size_t>(i)].push_back((*this)(i, j).laurent(p, kmax, is_form));
    MatJet m = assemble(e, p);
    m.set_form(is_form);
    return m;
  }

  [[nodiscard]] Mat residue(Point p) const { return laurent(p, -1, true).coeff(-1); }

  /// Distinct finite poles of all entries with their maximal multiplicity.
  [[nodiscard]] std::vector<PoleFactor> poles() const {
    std::vector<PoleFactor> out;
    for (const auto& x : e_)
      for (const auto& f : x.poles()) {
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const PoleFactor& g) { return std::abs(g.root - f.root) <= tol::cancel; });
        if (it == out.end())
          out.push_back(f);
        else
          it->mult = std::max(it->mult, f.mult);
      }
    return out;
  }

  [[nodiscard]] RatMat derivative() const {
    RatMat r(n_);
    for (std::size_t k = 0; k < e_.size(); ++k) r.e_[k] = e_[k].derivative();
    return r;
  }

  [[nodiscard]] RatScalar determinant() const { return det_rec(*this); }

  friend RatMat operator*(const RatMat& a, const RatMat& b) {
    RatMat r(a.n_);
    for (Eigen::Index i = 0; i < a.n_; ++i)
      for (Eigen::Index j = 0; j < a.n_; ++j) {
        RatScalar acc;
        for (Eigen::Index k = 0; k < a.n_; ++k) acc = acc + a(i, k) * b(k, j);
        r(i, j) = acc;
      }
    return r;
  }
  friend RatMat operator+(const RatMat& a, const RatMat& b) {
    RatMat r(a.n_);
    for (std::size_t k = 0; k < a.e_.size(); ++k) r.e_[k] = a.e_[k] + b.e_[k];
    return r;
  }
  friend RatMat operator-(const RatMat& a, const RatMat& b) {
    RatMat r(a.n_);
    for (std::size_t k = 0; k < a.e_.size(); ++k) r.e_[k] = a.e_[k] - b.e_[k];
    return r;
  }

 private:
  static RatScalar det_rec(const RatMat& m) {
    if (m.n_ == 1) return m(0, 0);
    RatScalar acc;
    for (Eigen::Index c = 0; c < m.n_; ++c) {
      RatMat minor(m.n_ - 1);
      for (Eigen::Index r = 1; r < m.n_; ++r)
        for (Eigen::Index k = 0, kk = 0; k < m.n_; ++k)
          if (k != c) minor(r - 1, kk++) = m(r, k);
      RatScalar term = m(0, c) * det_rec(minor);
      acc = (c % 2 == 0) ? acc + term : acc - term;
    }
    return acc;
  }

  Eigen::Index n_ = 0;
  std::vector<RatScalar> e_;
};

struct FractionTerm {
  cplx pole;
  int order;  // coefficient of (z - pole)^{-order}
  cplx coeff;
};

struct PartialFractions {
  std::vector<FractionTerm> terms;
  Polynomial poly;

  [[nodiscard]] cplx operator()(cplx z) const {
    cplx acc = poly(z);
    for (const auto& t : terms) acc += t.coeff / std::pow(z - t.pole, t.order);
    return acc;
  }
};

inline PartialFractions partial_fractions(const RatScalar& f) {
  PartialFractions pf;
  for (const auto& p : f.poles()) {
    const ScalarJet j = f.laurent(Point::at(p.root), -1);
    double big = 0.0;
    for (int k = -p.mult; k <= -1; ++k) big = std::max(big, std::abs(j.coeff(k)));
    for (int k = p.mult; k >= 1; --k) {
      const cplx c = j.coeff(-k);
      if (std::abs(c) > 1e-15 * big) pf.terms.push_back({p.root, k, c});
    }
  }
  // Polynomial part: the non-positive powers of w = 1/z at infinity.
  const ScalarJet inf = f.laurent(Point::inf(), 0);
  std::vector<cplx> c;
  for (int k = 0; k <= -inf.kmin(); ++k) c.push_back(inf.coeff(-k));
  pf.poly = Polynomial(c);
  return pf;
}

namespace detail {

template <class F>
void check_quadrature_circle(const F& f, Point p, double radius) {
  if (!(radius > 0.0)) throw PreconditionError("quadrature: radius must be positive");
  // Plain callables carry no pole list; the caller owns the radius choice.
  if constexpr (requires { f.poles(); }) {
    for (const auto& pole : f.poles()) {
      if (p.infinite) {
        if (std::abs(pole.root) >= 1.0 / radius)
          throw PreconditionError("quadrature: a finite pole lies outside the circle around infinity");
      } else if (std::abs(pole.root - p.z) > tol::cancel && std::abs(pole.root - p.z) <= radius) {
        throw PreconditionError("quadrature: another pole lies within the radius");
      }
    }
  }
}

}  // namespace detail

/// (1/2 pi i) times the N-node trapezoid rule for the integral of f dz around
/// p. At infinity the circle |w| = radius is used in the chart w = 1/z.
template <class F>
auto residue_quadrature_oracle(const F& f, Point p, double radius, int n_nodes = 256) {
  detail::check_quadrature_circle(f, p, radius);
  using R = std::decay_t<decltype(f(cplx{}))>;
  R acc = f(p.infinite ? cplx{1.0 / radius} : p.z + radius) * cplx{0.0};
  for (int k = 0; k < n_nodes; ++k) {
    const cplx e = std::exp(kI * (2.0 * kPi * k / n_nodes));
    if (p.infinite) {
      const cplx z = e / radius;
      acc -= f(z) * z;  // the circle around infinity is traversed clockwise in z
    } else {
      acc += f(p.z + radius * e) * (radius * e);
    }
  }
  return R(acc / static_cast<double>(n_nodes));
}

}  // namespace isomono
