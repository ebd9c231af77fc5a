#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include <Eigen/SVD>

#include "isomono/connection.hpp"
#include "isomono/core.hpp"
#include "isomono/laurent.hpp"
#include "isomono/pfsum.hpp"
#include "isomono/twist.hpp"

namespace isomono {

/// Vector-field germ m(w) d/dz near a pole, m = sum_k c[k - kmin] w^k.
struct VectorGerm {
  int kmin = 0;
  std::vector<cplx> c;

  [[nodiscard]] bool empty() const { return c.empty(); }
};

/// One germ per pole of D (an empty germ is zero).
struct DeformationCocycle {
  std::vector<VectorGerm> m;

  static DeformationCocycle translation(std::size_t npoles, std::size_t i, cplx rate = 1.0) {
    DeformationCocycle d;
    d.m.resize(npoles);
    d.m.at(i) = VectorGerm{0, {rate}};
    return d;
  }
};

/// Diagonal truncated series beta = sum_{j=1}^{l-1} beta[j-1] w^{-j} at one pole.
struct IrregularCotangent {
  std::vector<Mat> beta;
};

/// Tangent data (t, s, b): twist germ variations per site, trivialization jets
/// per pole of D, and polar-part variations per pole of D and per site.
struct TangentVec {
  std::vector<std::vector<Mat>> t;        // per site, coefficients of w^k
  std::vector<std::vector<Mat>> s;        // per pole of D, s[m] multiplies w^m
  std::vector<std::vector<Mat>> b;        // per pole of D, b[k-1] multiplies w^{-k} dz
  std::vector<std::vector<Mat>> b_sites;  // per site, polar variation in the V0 frame
};

/// Linear functional on polar-part variations, dH(j, b) = sum_k tr(b[k-1] g[j][k-1]).
struct Cotangent {
  std::vector<std::vector<Mat>> g;

  [[nodiscard]] cplx operator()(std::size_t j, const std::vector<Mat>& b) const {
    cplx acc{};
    for (std::size_t k = 0; k < b.size() && k < g.at(j).size(); ++k) acc += (b[k] * g[j][k]).trace();
    return acc;
  }
};

/// Polar part of [s, P] with s = sum_m s[m] w^m and P = sum_k p[k-1] w^{-k}.
inline std::vector<Mat> polar_bracket(const std::vector<Mat>& s, const std::vector<Mat>& p) {
  const auto l = static_cast<int>(p.size());
  std::vector<Mat> out(p.size(), zero_mat(p.at(0).rows()));
  for (int m = 0; m < static_cast<int>(s.size()); ++m)
    for (int k = m + 1; k <= l; ++k) out[static_cast<std::size_t>(k - m - 1)] += commutator(s[m], p[k - 1]);
  return out;
}

/// Polar part of g P g^{-1} for a holomorphic jet g (g[m] multiplies w^m).
inline std::vector<Mat> conjugate_polar(const std::vector<Mat>& p, const std::vector<Mat>& g) {
  const auto l = static_cast<int>(p.size());
  std::vector<Mat> pc;
  for (int k = l; k >= 1; --k) pc.push_back(p[static_cast<std::size_t>(k - 1)]);
  const MatJet pj(Point::at(0.0), -l, pc, true, MatJet::kExact);
  const MatJet gj(Point::at(0.0), 0, g, false, MatJet::kExact);
  const MatJet r = gj * pj * inverse(gj);
  std::vector<Mat> out;
  for (int k = 1; k <= l; ++k) out.push_back(r.coeff(-k));
  return out;
}

// ---------------------------------------------------------------------------
// Residue pairing and the symplectic form

enum class Frame { U0, U1 };

/// U1: sum res tr(b T^{-1} a); U0: sum res tr(b a). a is a germ in w, b a
/// 1-form germ, both as jets at the site.
inline cplx residue_pairing(const MatJet& a, const MatJet& b, const TwistSite& site, Frame frame) {
  if (frame == Frame::U0) return trace(b * a).coeff(-1);
  if (frame != Frame::U1) throw MalformedInput("residue_pairing: unknown frame");
  const MatJet tj(Point::at(site.p), 0, site.t, false, MatJet::kExact);
  return trace(b * inverse(tj, tol::cancel) * a).coeff(-1);
}

namespace detail {

inline PFSum<Mat> variation_form(const TangentVec& x, const Connection& a, const MatrixDivisor* twist) {
  std::vector<PolarPart> terms;
  for (std::size_t i = 0; i < x.b.size(); ++i) terms.push_back({a.poles().at(i).t, x.b[i]});
  if (twist)
    for (std::size_t e = 0; e < x.b_sites.size(); ++e) terms.push_back({twist->sites.at(e).p, x.b_sites[e]});
  return PFSum<Mat>(terms, {}, zero_mat(a.n()));
}

inline cplx twist_part(const TangentVec& x1, const PFSum<Mat>& b2, const MatrixDivisor& twist) {
  cplx acc{};
  for (std::size_t e = 0; e < x1.t.size(); ++e) {
    if (x1.t[e].empty()) continue;
    const TwistSite& site = twist.sites.at(e);
    const MatJet t1(Point::at(site.p), 0, x1.t[e], false, MatJet::kExact);
    const MatJet tj(Point::at(site.p), 0, site.t, false, MatJet::kExact);
    // V0-frame variation of the twist: a0 = t T^{-1}.
    const MatJet a0 = t1 * inverse(tj, tol::cancel);
    const MatJet bj = b2.laurent(Point::at(site.p), -a0.kmin() + 1, true);
    acc += trace(bj * a0).coeff(-1);
  }
  return acc;
}

}  // namespace detail

/// omega((t1,s1,b1),(t2,s2,b2)) = <t1,b2> - <t2,b1> + res_D tr(s1 b2 - s2 b1).
/// Both halves are accumulated separately, so swapping arguments negates the
/// result exactly.
inline cplx symplectic_form(const TangentVec& x1, const TangentVec& x2, const Connection& a,
                            const MatrixDivisor* twist = nullptr) {
  const std::size_t np = a.poles().size();
  if (x1.s.size() != np || x2.s.size() != np || x1.b.size() != np || x2.b.size() != np)
    throw MalformedInput("symplectic_form: tangent does not match the pole structure");
  auto half = [&](const TangentVec& u, const TangentVec& v) {
    cplx acc{};
    for (std::size_t i = 0; i < np; ++i) {
      const std::size_t l = static_cast<std::size_t>(a.poles()[i].order());
      if (u.s[i].size() > l || u.b[i].size() > l) throw MalformedInput("symplectic_form: jet order exceeds the pole order");
      for (std::size_t m = 0; m < u.s[i].size() && m < v.b[i].size(); ++m) acc += (u.s[i][m] * v.b[i][m]).trace();
    }
    if (twist && !u.t.empty()) acc += detail::twist_part(u, detail::variation_form(v, a, twist), *twist);
    return acc;
  };
  return half(x1, x2) - half(x2, x1);
}

// ---------------------------------------------------------------------------
// Chart: tangents to the orbit of each polar part

struct ChartVec {
  std::size_t pole = 0;
  std::vector<Mat> s;
  std::vector<Mat> b;
};

inline cplx chart_form(const ChartVec& x, const ChartVec& y) {
  if (x.pole != y.pole) return cplx{};
  cplx xy{}, yx{};
  for (std::size_t m = 0; m < x.s.size(); ++m) {
    xy += (x.s[m] * y.b[m]).trace();
    yx += (y.s[m] * x.b[m]).trace();
  }
  return xy - yx;
}

/// Basis of orbit tangents at every pole of D: right singular vectors of
/// s -> polar[s, P] above the relative rank cut.
inline std::vector<ChartVec> chart_basis(const Connection& a) {
  std::vector<ChartVec> basis;
  const Eigen::Index n = a.n();
  for (std::size_t i = 0; i < a.poles().size(); ++i) {
    const auto& p = a.poles()[i].c;
    const auto l = static_cast<Eigen::Index>(p.size());
    const Eigen::Index dim = n * n * l;
    Mat lin(dim, dim);
    for (Eigen::Index col = 0; col < dim; ++col) {
      std::vector<Mat> s(static_cast<std::size_t>(l), zero_mat(n));
      s[static_cast<std::size_t>(col / (n * n))]((col % (n * n)) / n, col % n) = 1.0;
      const auto b = polar_bracket(s, p);
      for (Eigen::Index k = 0; k < l; ++k)
        lin.block(k * n * n, col, n * n, 1) = Eigen::Map<const Vec>(b[static_cast<std::size_t>(k)].data(), n * n);
    }
    Eigen::JacobiSVD<Mat> svd(lin, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) continue;
    for (Eigen::Index q = 0; q < sv.size() && sv(q) > tol::rank * sv(0); ++q) {
      const Vec v = svd.matrixV().col(q);
      ChartVec cv;
      cv.pole = i;
      for (Eigen::Index m = 0; m < l; ++m) {
        Mat sm(n, n);
        for (Eigen::Index r = 0; r < n; ++r)
          for (Eigen::Index c = 0; c < n; ++c) sm(r, c) = v(m * n * n + r * n + c);
        cv.s.push_back(sm);
      }
      cv.b = polar_bracket(cv.s, p);
      basis.push_back(std::move(cv));
    }
  }
  return basis;
}

inline Mat gram_matrix(const std::vector<ChartVec>& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  Mat g(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      g(a, b) = chart_form(basis[static_cast<std::size_t>(a)], basis[static_cast<std::size_t>(b)]);
  return g;
}

/// The X with omega(X, Y) = dH(Y) for every chart basis tangent Y.
inline TangentVec hamiltonian_vector_field(const Cotangent& dh, const Connection& a) {
  const auto basis = chart_basis(a);
  TangentVec x;
  for (const auto& p : a.poles()) {
    x.s.emplace_back(p.c.size(), zero_mat(a.n()));
    x.b.emplace_back(p.c.size(), zero_mat(a.n()));
  }
  if (basis.empty()) return x;
  const Mat g = gram_matrix(basis);
  Eigen::JacobiSVD<Mat> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= tol::rank * sv(0)) throw DegenerateError("symplectic chart is degenerate");
  Vec rhs(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) rhs(static_cast<Eigen::Index>(k)) = dh(basis[k].pole, basis[k].b);
  const Vec coef = svd.solve(rhs);  // G^T x = dH with G antisymmetric: solve G x = -dH
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const cplx c = -coef(static_cast<Eigen::Index>(k));
    const auto& v = basis[k];
    for (std::size_t m = 0; m < v.s.size(); ++m) {
      x.s[v.pole][m] += c * v.s[m];
      x.b[v.pole][m] += c * v.b[m];
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Spectral Hamiltonians

/// Fixed part of tr(A^2): at each irregular pole the polar orders
/// -2l .. -(l+1), plus residues at those poles chosen so the result vanishes
/// to maximal order at infinity. Zero for Fuchsian connections.
inline QuadraticDifferential q0(const Connection& a) {
  const QuadraticDifferential q = spectral_quadratic(a);
  std::vector<PolarTerm<cplx>> terms;
  for (const auto& p : a.poles()) {
    const int l = p.order();
    if (l < 2) continue;
    PolarTerm<cplx> term{p.t, std::vector<cplx>(static_cast<std::size_t>(2 * l), cplx{})};
    for (const auto& qt : q.polar())
      if (qt.t == p.t)
        for (int k = l + 1; k <= std::min(2 * l, qt.order()); ++k) term.c[k - 1] = qt.c[k - 1];
    terms.push_back(std::move(term));
  }
  const auto m = static_cast<Eigen::Index>(terms.size());
  if (m > 0) {
    // Coefficient of z^{-j} at infinity, j = 1..m: sum_i r_i t_i^{j-1} + fixed_j = 0.
    Mat v(m, m);
    Vec rhs = Vec::Zero(m);
    for (Eigen::Index j = 1; j <= m; ++j)
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto& term = terms[static_cast<std::size_t>(i)];
        v(j - 1, i) = std::pow(term.t, static_cast<double>(j - 1));
        for (int k = 2; k <= term.order() && k <= j; ++k) {
          double binom = 1.0;
          for (int r = 1; r <= k - 1; ++r) binom = binom * static_cast<double>(j - 1 - (k - 1) + r) / r;
          rhs(j - 1) -= term.c[k - 1] * binom * std::pow(term.t, static_cast<double>(j - k));
        }
      }
    const Vec r = v.fullPivLu().solve(rhs);
    for (Eigen::Index i = 0; i < m; ++i) terms[static_cast<std::size_t>(i)].c[0] = r(i);
  }
  return QuadraticDifferential(terms, {}, cplx{});
}

/// Q = tr(A^2) - Q0.
inline QuadraticDifferential reduced_quadratic(const Connection& a) {
  QuadraticDifferential q = spectral_quadratic(a);
  const QuadraticDifferential z = q0(a);
  auto& polar = q.polar();
  for (const auto& t0 : z.polar()) {
    auto it = std::find_if(polar.begin(), polar.end(), [&](const auto& p) { return p.t == t0.t; });
    if (it == polar.end()) {
      polar.push_back(PolarTerm<cplx>{t0.t, {}});
      it = polar.end() - 1;
    }
    if (it->c.size() < t0.c.size()) it->c.resize(t0.c.size(), cplx{});
    for (std::size_t k = 0; k < t0.c.size(); ++k) it->c[k] -= t0.c[k];
  }
  return q;
}

inline ScalarJet germ_jet(const VectorGerm& m, cplx t) {
  return ScalarJet(Point::at(t), m.kmin, m.c, false, ScalarJet::kExact);
}

/// H = sum over poles of res(m_i Q), with Q = reduced_quadratic(a) supplied.
inline cplx hamiltonian_mu_Q(const DeformationCocycle& mu, const Connection& a, const QuadraticDifferential& q) {
  cplx acc{};
  for (std::size_t i = 0; i < mu.m.size() && i < a.poles().size(); ++i) {
    if (mu.m[i].empty()) continue;
    const cplx t = a.poles()[i].t;
    const ScalarJet qj = q.laurent(Point::at(t), -1 - mu.m[i].kmin, false);
    acc += (germ_jet(mu.m[i], t) * qj).coeff(-1);
  }
  return acc;
}

inline cplx hamiltonian_mu_Q(const DeformationCocycle& mu, const Connection& a) {
  return hamiltonian_mu_Q(mu, a, reduced_quadratic(a));
}

/// dH_{mu Q}(delta A) = sum_i res_{t_i}(m_i 2 tr(A delta A)); Q0 is fixed on fibers.
inline Cotangent d_hamiltonian_mu_Q(const DeformationCocycle& mu, const Connection& a) {
  const auto& poles = a.poles();
  Cotangent dh;
  for (const auto& pj : poles) dh.g.emplace_back(pj.c.size(), zero_mat(a.n()));
  for (std::size_t i = 0; i < mu.m.size() && i < poles.size(); ++i) {
    if (mu.m[i].empty()) continue;
    const cplx ti = poles[i].t;
    const ScalarJet m = germ_jet(mu.m[i], ti);
    const int top = -1 - mu.m[i].kmin;  // highest order of (phi A) needed
    for (std::size_t j = 0; j < poles.size(); ++j)
      for (int k = 1; k <= poles[j].order(); ++k) {
        const int phi_min = (j == i) ? -k : 0;
        const MatJet aj = a.laurent(Point::at(ti), top - phi_min + poles[i].order());
        const ScalarJet phi = detail::pole_power_jet(poles[j].t, k, Point::at(ti), top + poles[i].order(), false);
        dh.g[j][static_cast<std::size_t>(k - 1)] += 2.0 * ((m * phi) * aj).coeff(-1);
      }
  }
  return dh;
}

/// H_beta = tr res_p(beta B) at pole i. B is read as the diagonal part of
/// Z^{-1} A Z = B + Z^{-1} dZ, which makes H independent of how Z is
/// normalized by diagonal jets. The two readings agree when l = 2 or Z = I;
/// for l >= 3 only this one generates the isomonodromic correction.
inline cplx hamiltonian_beta_B(const IrregularCotangent& beta, const Connection& a, std::size_t i) {
  if (beta.beta.empty()) return cplx{};
  const auto& p = a.poles().at(i);
  const int l = p.order();
  const int jmax = static_cast<int>(beta.beta.size());
  if (jmax > l - 1) throw MalformedInput("hamiltonian_beta_B: beta has orders beyond -(l-1)");
  const DiagonalJetPair d = formal_diagonalize(a, p.t, l + jmax - 1);
  const MatJet gauge = inverse(d.z) * d.z.derivative();
  cplx acc{};
  for (int j = 1; j <= jmax; ++j)
    acc += (beta.beta[static_cast<std::size_t>(j - 1)] * (d.b.coeff(j - 1) + gauge.coeff(j - 1))).trace();
  return acc;
}

namespace detail {

inline Connection perturb(const Connection& a, std::size_t j, std::size_t k, Eigen::Index r, Eigen::Index c, cplx h) {
  auto poles = a.poles();
  poles[j].c[k](r, c) += h;
  return a.with_poles(std::move(poles));
}

}  // namespace detail

/// Gradient of a function of the polar coefficients by central differences
/// with one Richardson step.
inline Cotangent numeric_cotangent(const std::function<cplx(const Connection&)>& h, const Connection& a,
                                   double step = 1e-3) {
  Cotangent dh;
  const Eigen::Index n = a.n();
  for (std::size_t j = 0; j < a.poles().size(); ++j) {
    dh.g.emplace_back(a.poles()[j].c.size(), zero_mat(n));
    for (std::size_t k = 0; k < a.poles()[j].c.size(); ++k)
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) {
          auto diff = [&](double s) {
            return (h(detail::perturb(a, j, k, r, c, s)) - h(detail::perturb(a, j, k, r, c, -s))) / (2.0 * s);
          };
          const cplx d = (4.0 * diff(step / 2) - diff(step)) / 3.0;
          // dH(E_rc) = tr(E_rc g) = g(c, r)
          dh.g[j][k](c, r) = d;
        }
  }
  return dh;
}

inline Cotangent d_hamiltonian_beta_B(const IrregularCotangent& beta, const Connection& a, std::size_t i) {
  return numeric_cotangent([&](const Connection& x) { return hamiltonian_beta_B(beta, x, i); }, a);
}

}  // namespace isomono
