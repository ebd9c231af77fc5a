#pragma once

#include <vector>

#include "isomono/connection.hpp"
#include "isomono/core.hpp"
#include "isomono/ratfun.hpp"

namespace isomono {

/// One site of a matrix divisor: a polynomial germ T(w) = sum_k T[k] w^k in
/// the local coordinate w = z - p.
struct TwistSite {
  cplx p{};
  std::vector<Mat> t;
  std::vector<cplx> params;  // normal-form hyperplane data when built by normal_form

  [[nodiscard]] Eigen::Index n() const { return t.at(0).rows(); }

  [[nodiscard]] Mat operator()(cplx z) const {
    Mat acc = zero_mat(n());
    cplx wk{1.0};
    for (const auto& c : t) {
      acc += wk * c;
      wk *= (z - p);
    }
    return acc;
  }

  /// The germ as a polynomial matrix in z.
  [[nodiscard]] RatMat as_ratmat() const {
    // sum_k T_k (z - p)^k, expanded with binomial coefficients.
    const int deg = static_cast<int>(t.size()) - 1;
    std::vector<Mat> zc(static_cast<std::size_t>(deg + 1), zero_mat(n()));
    for (int k = 0; k <= deg; ++k) {
      double binom = 1.0;
      for (int j = 0; j <= k; ++j) {
        zc[static_cast<std::size_t>(j)] += binom * std::pow(-p, k - j) * t[static_cast<std::size_t>(k)];
        binom = binom * (k - j) / (j + 1);
      }
    }
    return RatMat::polynomial(zc);
  }

  /// Determinant as a jet in w = z - p (exact: T is polynomial).
  [[nodiscard]] ScalarJet det_jet() const {
    return determinant(MatJet(Point::at(p), 0, t, false, MatJet::kExact));
  }
};

struct MatrixDivisor {
  std::vector<TwistSite> sites;
};

/// Germ with first row (w, -T_2, ..., -T_n) over identity rows, where
/// w = z - p vanishes at the site. T_1 is kept as data.
inline TwistSite normal_form(cplx p, const std::vector<cplx>& params) {
  const auto n = static_cast<Eigen::Index>(params.size());
  if (n < 1) throw MalformedInput("normal_form: at least one parameter required");
  Mat t0 = identity(n);
  Mat t1 = zero_mat(n);
  t0(0, 0) = 0.0;
  t1(0, 0) = 1.0;
  for (Eigen::Index j = 1; j < n; ++j) t0(0, j) = -params[static_cast<std::size_t>(j)];
  return TwistSite{p, {t0, t1}, params};
}

/// Vanishing order of det T at the site.
inline int site_degree(const TwistSite& s) {
  const ScalarJet d = s.det_jet();
  double big = 0.0;
  for (const auto& c : d.data()) big = std::max(big, std::abs(c));
  if (big == 0.0) throw SingularGermError("twist: germ is identically singular");
  int k = d.kmin();
  while (std::abs(d.coeff(k)) <= 1e-12 * big) ++k;
  return k;
}

inline int degree(const MatrixDivisor& d) {
  int total = 0;
  for (const auto& s : d.sites) total += site_degree(s);
  return total;
}

namespace detail {

/// det T must be c (z - p)^d globally, so that T is invertible off the site.
inline void check_site_det(const TwistSite& s, int deg) {
  const ScalarJet d = s.det_jet();
  double big = 0.0;
  for (const auto& c : d.data()) big = std::max(big, std::abs(c));
  for (int k = d.kmin(); k <= d.stored_max(); ++k)
    if (k != deg && std::abs(d.coeff(k)) > 1e-12 * big)
      throw SingularGermError("twist: det T vanishes away from its site");
}

inline void check_disjoint(const MatrixDivisor& d, const Connection& a) {
  for (const auto& s : d.sites) {
    for (const auto& p : a.all_polar())
      if (std::abs(p.t - s.p) <= tol::sep) throw PreconditionError("twist: site overlaps a pole of the connection");
  }
  for (std::size_t i = 0; i < d.sites.size(); ++i)
    for (std::size_t j = i + 1; j < d.sites.size(); ++j)
      if (std::abs(d.sites[i].p - d.sites[j].p) <= tol::sep) throw PreconditionError("twist: sites coincide");
}

/// T^{-1} = adj(T) / (c (z - p)^d).
inline RatMat inverse_site(const TwistSite& s) {
  const int deg = site_degree(s);
  check_site_det(s, deg);
  const cplx c = s.det_jet().coeff(deg);
  const RatMat t = s.as_ratmat();
  const Eigen::Index n = s.n();
  RatMat inv(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      RatScalar cof;
      if (n == 1) {
        cof = RatScalar::constant(1.0);
      } else {
        RatMat minor(n - 1);
        for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
          if (r == j) continue;
          for (Eigen::Index k = 0, kk = 0; k < n; ++k)
            if (k != i) minor(rr, kk++) = t(r, k);
          ++rr;
        }
        cof = minor.determinant();
        if ((i + j) % 2 == 1) cof = -cof;
      }
      inv(i, j) = (deg > 0) ? RatScalar(Polynomial::constant(1.0 / c), {{s.p, deg}}) * cof : (1.0 / c) * cof;
    }
  return inv;
}

}  // namespace detail

/// Connection on V expressed in the V0 frame: A0 = dT T^{-1} + T A1 T^{-1},
/// with T = T_1 T_2 ... T_m. New poles appear only at the sites.
inline Connection push_connection(const MatrixDivisor& d, const Connection& a) {
  detail::check_disjoint(d, a);
  Connection out = a;
  for (auto it = d.sites.rbegin(); it != d.sites.rend(); ++it) {
    detail::check_site_det(*it, site_degree(*it));
    out = gauge_transform(out, it->as_ratmat());
  }
  return out;
}

/// Inverse of push_connection: A1 = T^{-1} A0 T - T^{-1} dT.
inline Connection pull_connection(const MatrixDivisor& d, const Connection& a0) {
  for (const auto& s : d.sites)
    for (const auto& p : a0.poles())
      if (std::abs(p.t - s.p) <= tol::sep) throw PreconditionError("twist: site overlaps a pole in D");
  Connection out = a0;
  for (const auto& s : d.sites) out = gauge_transform(out, detail::inverse_site(s));
  return out;
}

}  // namespace isomono
