#pragma once

#include <vector>

#include "isomono/core.hpp"
#include "isomono/laurent.hpp"
#include "isomono/ratfun.hpp"

namespace isomono {

/// Polar part c_1/(z-t) + ... + c_l/(z-t)^l; c[k-1] multiplies (z-t)^{-k}.
template <class T>
struct PolarTerm {
  cplx t{};
  std::vector<T> c;

  [[nodiscard]] int order() const { return static_cast<int>(c.size()); }
};

namespace detail {

/// Jet at p of the scalar (z-t)^{-k}, or of (z-t)^{-k} dz when is_form.
inline ScalarJet pole_power_jet(cplx t, int k, Point p, int kmax, bool is_form) {
  if (!p.infinite && p.z == t) return ScalarJet(p, -k, {cplx{1.0}}, is_form, ScalarJet::kExact).truncated(kmax);
  if (!p.infinite) {
    const int len = kmax + 1;
    if (len <= 0) return ScalarJet::zero(p, cplx{}, kmax, is_form);
    return ScalarJet(p, 0, inverse_power_series(p.z - t, k, kmax), is_form, kmax);
  }
  // w^k (1 - t w)^{-k}, times -w^{-2} for a form.
  const int shift = k + (is_form ? -2 : 0);
  const int len = kmax - shift + 1;
  if (len <= 0) return ScalarJet::zero(p, cplx{}, kmax, is_form);
  std::vector<cplx> g(static_cast<std::size_t>(len));
  g[0] = is_form ? -1.0 : 1.0;
  for (int j = 1; j < len; ++j)
    g[static_cast<std::size_t>(j)] = g[static_cast<std::size_t>(j - 1)] * (static_cast<double>(k + j - 1) / j) * t;
  return ScalarJet(p, shift, std::move(g), is_form, t == cplx{} ? ScalarJet::kExact : kmax).truncated(kmax);
}

template <class T>
Laurent<T> scale_jet(const ScalarJet& s, const T& m) {
  std::vector<T> c;
  for (int k = s.kmin(); k <= s.stored_max(); ++k) c.push_back(s.coeff(k) * m);
  return Laurent<T>(s.at(), s.kmin(), std::move(c), s.is_form(), s.kmax());
}

}  // namespace detail

/// Rational function (or dz-coefficient) stored as polar parts plus a
/// polynomial tail sum_j tail[j] z^j. Residues are read off by structure.
template <class T>
class PFSum {
 public:
  PFSum() = default;
  PFSum(std::vector<PolarTerm<T>> polar, std::vector<T> tail, T proto)
      : polar_(std::move(polar)), tail_(std::move(tail)), proto_(detail::zero_like(proto)) {}

  [[nodiscard]] const std::vector<PolarTerm<T>>& polar() const { return polar_; }
  [[nodiscard]] std::vector<PolarTerm<T>>& polar() { return polar_; }
  [[nodiscard]] const std::vector<T>& tail() const { return tail_; }
  [[nodiscard]] std::vector<T>& tail() { return tail_; }
  [[nodiscard]] const T& proto() const { return proto_; }

  [[nodiscard]] T operator()(cplx z) const {
    T acc = proto_;
    for (const auto& p : polar_) {
      if (std::abs(z - p.t) <= tol::sep) throw DomainError("evaluation at a pole");
      const cplx inv = 1.0 / (z - p.t);
      cplx w = inv;
      for (const auto& c : p.c) {
        acc += w * c;
        w *= inv;
      }
    }
    cplx zk{1.0};
    for (const auto& c : tail_) {
      acc += zk * c;
      zk *= z;
    }
    return acc;
  }

  /// Jet at p through kmax; is_form applies the dz chart factor at infinity.
  [[nodiscard]] Laurent<T> laurent(Point p, int kmax, bool is_form) const {
    Laurent<T> acc = Laurent<T>::zero(p, proto_, Laurent<T>::kExact, is_form);
    for (const auto& term : polar_)
      for (int k = 1; k <= term.order(); ++k)
        acc = acc + detail::scale_jet(detail::pole_power_jet(term.t, k, p, kmax, is_form), term.c[k - 1]);
    if (!tail_.empty()) {
      if (p.infinite) {
        std::vector<T> c(tail_.rbegin(), tail_.rend());
        const int deg = static_cast<int>(tail_.size()) - 1;
        if (is_form)
          for (auto& x : c) x = -x;
        acc = acc + Laurent<T>(p, -deg - (is_form ? 2 : 0), std::move(c), is_form, Laurent<T>::kExact);
      } else {
        // Taylor coefficients of the tail at p (Horner shift).
        std::vector<T> a = tail_;
        const int n = static_cast<int>(a.size()) - 1;
        for (int i = 0; i < n; ++i)
          for (int k = n - 1; k >= i; --k) a[k] += p.z * a[k + 1];
        acc = acc + Laurent<T>(p, 0, std::move(a), is_form, Laurent<T>::kExact);
      }
    }
    Laurent<T> out = acc.truncated(kmax);
    out.set_form(is_form);
    return out;
  }

  /// Residue of the dz-coefficient at p.
  [[nodiscard]] T residue(Point p) const {
    if (p.infinite) return laurent(p, -1, true).coeff(-1);
    for (const auto& term : polar_)
      if (term.t == p.z) return term.c.empty() ? proto_ : term.c[0];
    return proto_;
  }

  /// Rebuild from jets: polar parts read from the negative coefficients of
  /// the jets at the given finite points, the tail from the jet at infinity.
  /// Coefficients below rel * scale are dropped so spurious orders vanish.
  static PFSum from_jets(const std::vector<Laurent<T>>& at_points, const Laurent<T>& at_inf, bool is_form,
                         double rel = 1e-11) {
    double scale = 0.0;
    for (const auto& j : at_points)
      for (int k = j.kmin(); k <= std::min(-1, j.stored_max()); ++k) scale = std::max(scale, detail::norm_of(j.coeff(k)));
    const int tail_hi = is_form ? -2 : 0;
    for (int k = at_inf.kmin(); k <= std::min(tail_hi, at_inf.stored_max()); ++k)
      scale = std::max(scale, detail::norm_of(at_inf.coeff(k)));
    const double cut = rel * std::max(scale, 1.0);

    std::vector<PolarTerm<T>> polar;
    for (const auto& j : at_points) {
      PolarTerm<T> term{j.at().z, {}};
      for (int k = 1; k <= -j.kmin(); ++k) term.c.push_back(j.coeff(-k));
      while (!term.c.empty() && detail::norm_of(term.c.back()) <= cut) term.c.pop_back();
      if (!term.c.empty()) polar.push_back(std::move(term));
    }
    // Function: z^j <-> w^{-j}. Form: z^j dz <-> -w^{-j-2} dw.
    std::vector<T> tail;
    const int top = is_form ? -at_inf.kmin() - 2 : -at_inf.kmin();
    for (int j = 0; j <= top; ++j) {
      const int k = is_form ? -j - 2 : -j;
      T c = at_inf.coeff(k);
      if (is_form) c = -c;
      tail.push_back(c);
    }
    while (!tail.empty() && detail::norm_of(tail.back()) <= cut) tail.pop_back();
    return PFSum(std::move(polar), std::move(tail), at_inf.proto());
  }

 private:
  std::vector<PolarTerm<T>> polar_;
  std::vector<T> tail_;
  T proto_{};
};

}  // namespace isomono
