#pragma once

#include <functional>
#include <string>
#include <vector>

#include "isomono/connection.hpp"
#include "isomono/core.hpp"
#include "isomono/monodromy.hpp"
#include "isomono/ode.hpp"
#include "isomono/symplectic.hpp"
#include "isomono/twist.hpp"

namespace isomono {

namespace tol {
inline constexpr double collide = 1e-4;
inline constexpr double norm_cap = 1e8;
}  // namespace tol

/// Pole positions and, per pole of order l >= 2, the diagonal formal
/// coefficients B_{-l} .. B_{-2} (types[i][k-2] is B_{-k}; empty for simple poles).
struct ModuliPoint {
  std::vector<cplx> t;
  std::vector<std::vector<Mat>> types;
};

/// Connection in the frame of the fixed reference bundle, plus twist data
/// held fixed during flows.
struct FlowState {
  Connection a;
  MatrixDivisor twist;
};

/// Tangent to moduli x irregular types: pole velocities and diagonal rates
/// of B_{-k} (rates[i][k-2]); empty inner vectors mean no irregular motion.
struct Direction {
  std::vector<cplx> dt;
  std::vector<std::vector<Mat>> rates;

  static Direction translation(std::size_t npoles, std::size_t i, cplx v = 1.0) {
    Direction d;
    d.dt.assign(npoles, cplx{});
    d.dt.at(i) = v;
    d.rates.resize(npoles);
    return d;
  }
};

/// Derivative of the D-part of a FlowState.
struct StateDerivative {
  std::vector<cplx> dt;
  std::vector<std::vector<Mat>> dc;  // per pole, dc[k-1] for the w^{-k} coefficient
};

inline ModuliPoint moduli(const FlowState& s) {
  ModuliPoint m;
  for (const auto& p : s.a.poles()) {
    m.t.push_back(p.t);
    std::vector<Mat> types;
    const int l = p.order();
    if (l >= 2) {
      const DiagonalJetPair d = formal_diagonalize(s.a, p.t, l - 2);
      for (int k = 2; k <= l; ++k) types.push_back(d.b.coeff(-k));
    }
    m.types.push_back(std::move(types));
  }
  return m;
}

namespace detail {

inline void check_direction(const Direction& d, const Connection& a) {
  const auto& p = a.poles();
  if (d.dt.size() != p.size()) throw MalformedInput("direction: one pole velocity per pole of D required");
  if (!d.rates.empty() && d.rates.size() != p.size()) throw MalformedInput("direction: rates must be given per pole");
  for (std::size_t i = 0; i < d.rates.size(); ++i) {
    if (d.rates[i].empty()) continue;
    if (static_cast<int>(d.rates[i].size()) != p[i].order() - 1)
      throw MalformedInput("direction: irregular rates must cover orders -l .. -2");
    for (const auto& r : d.rates[i])
      if (max_abs(Mat(r.diagonal().asDiagonal()) - r) != 0.0) throw MalformedInput("direction: irregular rates must be diagonal");
  }
}

inline bool has_rates(const Direction& d, std::size_t i) { return i < d.rates.size() && !d.rates[i].empty(); }

/// beta = dT with d(dT)/dw = sum_k rate_k w^{-k}: beta[j-1] multiplies w^{-j}, j = 1..l-1.
inline std::vector<Mat> beta_from_rates(const std::vector<Mat>& rates) {
  std::vector<Mat> beta;
  for (std::size_t j = 1; j <= rates.size(); ++j) beta.push_back(-rates[j - 1] / static_cast<double>(j));
  return beta;
}

/// Polar part at p of Z beta Z^{-1}; out[j-1] multiplies w^{-j}.
inline std::vector<Mat> conjugated_beta(const Connection& a, std::size_t i, const std::vector<Mat>& beta) {
  const auto& p = a.poles()[i];
  const int l = p.order();
  const DiagonalJetPair d = formal_diagonalize(a, p.t, l);
  const auto jmax = static_cast<int>(beta.size());
  std::vector<Mat> bc;
  for (int j = jmax; j >= 1; --j) bc.push_back(beta[static_cast<std::size_t>(j - 1)]);
  const MatJet bj(Point::at(p.t), -jmax, bc, false, MatJet::kExact);
  const MatJet zj = d.z.truncated(jmax);
  const MatJet prod = zj * bj * inverse(zj, tol::cancel);
  std::vector<Mat> out;
  for (int j = 1; j <= jmax; ++j) out.push_back(prod.coeff(-j));
  return out;
}

inline StateDerivative zero_derivative(const Connection& a) {
  StateDerivative d;
  for (const auto& p : a.poles()) {
    d.dt.push_back(cplx{});
    d.dc.emplace_back(p.c.size(), zero_mat(a.n()));
  }
  return d;
}

}  // namespace detail

/// Reference lift: poles move at the given rates with every Laurent
/// coefficient frozen; irregular rates move orders -l .. -2 by the derivative
/// of polar(Z beta Z^{-1}), leaving the residue fixed.
inline StateDerivative lift_I0(const Direction& dir, const FlowState& s) {
  detail::check_direction(dir, s.a);
  StateDerivative out = detail::zero_derivative(s.a);
  out.dt = dir.dt;
  for (std::size_t i = 0; i < s.a.poles().size(); ++i) {
    if (!detail::has_rates(dir, i)) continue;
    const auto omega = detail::conjugated_beta(s.a, i, detail::beta_from_rates(dir.rates[i]));
    for (std::size_t j = 1; j <= omega.size(); ++j) out.dc[i][j] = -static_cast<double>(j) * omega[j - 1];
  }
  return out;
}

/// Cotangent of the Hamiltonian whose field corrects the reference lift.
inline Cotangent correction_cotangent(const Direction& dir, const FlowState& s) {
  const Connection& a = s.a;
  DeformationCocycle mu;
  for (const auto& v : dir.dt) mu.m.push_back(v == cplx{} ? VectorGerm{} : VectorGerm{0, {v}});
  Cotangent dh = d_hamiltonian_mu_Q(mu, a);
  for (std::size_t i = 0; i < a.poles().size(); ++i) {
    if (!detail::has_rates(dir, i)) continue;
    IrregularCotangent bt{detail::beta_from_rates(dir.rates[i])};
    for (auto& b : bt.beta) b *= -2.0;
    const Cotangent di = d_hamiltonian_beta_B(bt, a, i);
    for (std::size_t j = 0; j < dh.g.size(); ++j)
      for (std::size_t k = 0; k < dh.g[j].size(); ++k) dh.g[j][k] += di.g[j][k];
  }
  return dh;
}

inline StateDerivative add_field(StateDerivative d, const TangentVec& x) {
  for (std::size_t i = 0; i < d.dc.size(); ++i)
    for (std::size_t k = 0; k < d.dc[i].size(); ++k) d.dc[i][k] += x.b[i][k];
  return d;
}

inline StateDerivative isomonodromic_rhs(const Direction& dir, const FlowState& s) {
  StateDerivative d = lift_I0(dir, s);
  return add_field(std::move(d), hamiltonian_vector_field(correction_cotangent(dir, s), s.a));
}

// ---------------------------------------------------------------------------
// Packing and integration

namespace detail {

inline Vec pack(const Connection& a) {
  Eigen::Index size = 0;
  for (const auto& p : a.poles()) size += 1 + static_cast<Eigen::Index>(p.c.size()) * a.n() * a.n();
  Vec v(size);
  Eigen::Index at = 0;
  for (const auto& p : a.poles()) v(at++) = p.t;
  for (const auto& p : a.poles())
    for (const auto& c : p.c) {
      v.segment(at, c.size()) = Eigen::Map<const Vec>(c.data(), c.size());
      at += c.size();
    }
  return v;
}

inline Connection unpack(const Connection& shape, const Vec& v) {
  auto poles = shape.poles();
  const Eigen::Index n = shape.n();
  Eigen::Index at = 0;
  for (auto& p : poles) p.t = v(at++);
  for (auto& p : poles)
    for (auto& c : p.c) {
      c = Eigen::Map<const Mat>(v.data() + at, n, n);
      at += n * n;
    }
  return shape.with_poles(std::move(poles));
}

inline Vec pack(const StateDerivative& d, Eigen::Index size) {
  Vec v(size);
  Eigen::Index at = 0;
  for (const auto& t : d.dt) v(at++) = t;
  for (const auto& pc : d.dc)
    for (const auto& c : pc) {
      v.segment(at, c.size()) = Eigen::Map<const Vec>(c.data(), c.size());
      at += c.size();
    }
  return v;
}

inline double min_separation(const Connection& a, const MatrixDivisor& twist) {
  auto pts = finite_poles(a);
  for (const auto& s : twist.sites) pts.push_back(s.p);
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::min(d, std::abs(pts[i] - pts[j]));
  return d;
}

inline double coefficient_norm(const Connection& a) {
  double m = 0.0;
  for (const auto& p : a.poles())
    for (const auto& c : p.c) m = std::max(m, max_abs(c));
  return m;
}

struct FlowAbort {
  enum class Kind { Collision, BlowUp, Singular } kind;
  std::string what;
};

}  // namespace detail

/// Curve in moduli x irregular types given by its velocity at parameter s.
struct ModuliPath {
  std::function<Direction(double)> velocity;
  double s0 = 0.0;
  double s1 = 1.0;

  /// Pole i moves on the semicircle from its position around `center`
  /// (positive orientation), sweeping angle `sweep` over [0, 1].
  static ModuliPath arc(std::size_t npoles, std::size_t i, cplx start, cplx center, double sweep) {
    const cplx r0 = start - center;
    return ModuliPath{[=](double s) {
                        return Direction::translation(npoles, i, kI * sweep * r0 * std::exp(kI * sweep * s));
                      },
                      0.0, 1.0};
  }

  /// Constant-rate motion of the irregular type at pole i.
  static ModuliPath irregular(std::size_t npoles, std::size_t i, std::vector<Mat> rates) {
    return ModuliPath{[=](double) {
                        Direction d;
                        d.dt.assign(npoles, cplx{});
                        d.rates.resize(npoles);
                        d.rates[i] = rates;
                        return d;
                      },
                      0.0, 1.0};
  }
};

struct FlowSample {
  double s = 0.0;
  FlowState state;
  ModuliPoint target;  // moduli point obtained by integrating the path alone
};

struct Trajectory {
  enum class Status { Completed, Collision, BlowUp, Singular };
  std::vector<FlowSample> samples;
  Status status = Status::Completed;
  std::string message;
};

inline const char* to_string(Trajectory::Status s) {
  switch (s) {
    case Trajectory::Status::Completed: return "completed";
    case Trajectory::Status::Collision: return "pole collision";
    case Trajectory::Status::BlowUp: return "movable singularity (norm cap exceeded)";
    case Trajectory::Status::Singular: return "non-regular leading term";
  }
  return "unknown";
}

namespace detail {

inline ModuliPoint advance_target(ModuliPoint m, const ModuliPath& path, double s0, double s1) {
  // The path alone is integrated with the same scheme on a flat vector.
  Eigen::Index size = static_cast<Eigen::Index>(m.t.size());
  for (const auto& ty : m.types) size += static_cast<Eigen::Index>(ty.size()) * (ty.empty() ? 0 : ty[0].size());
  Vec v(size);
  Eigen::Index at = 0;
  for (const auto& t : m.t) v(at++) = t;
  for (const auto& ty : m.types)
    for (const auto& c : ty) {
      v.segment(at, c.size()) = Eigen::Map<const Vec>(c.data(), c.size());
      at += c.size();
    }
  auto rhs = [&](double s, const Vec&) {
    const Direction d = path.velocity(s);
    Vec out = Vec::Zero(size);
    Eigen::Index k = 0;
    for (const auto& t : d.dt) out(k++) = t;
    for (std::size_t i = 0; i < m.types.size(); ++i)
      for (std::size_t j = 0; j < m.types[i].size(); ++j) {
        const auto sz = m.types[i][j].size();
        if (has_rates(d, i)) out.segment(k, sz) = Eigen::Map<const Vec>(d.rates[i][j].data(), sz);
        k += sz;
      }
    return out;
  };
  v = dopri5(rhs, s0, s1, v, OdeOptions{1e-13});
  at = 0;
  for (auto& t : m.t) t = v(at++);
  for (auto& ty : m.types)
    for (auto& c : ty) {
      c = Eigen::Map<const Mat>(v.data() + at, c.rows(), c.cols());
      at += c.size();
    }
  return m;
}

}  // namespace detail

/// Integrates isomonodromic_rhs along the path, sampled at `samples + 1`
/// equally spaced parameters. Aborts keep the partial trajectory.
inline Trajectory integrate_flow(const FlowState& start, const ModuliPath& path, double tol, int samples = 10) {
  if (!(tol > 0.0)) throw MalformedInput("integrate_flow: tol must be positive");
  if (samples < 1) throw MalformedInput("integrate_flow: at least one sample interval required");
  Trajectory tr;
  FlowState cur = start;
  ModuliPoint target = moduli(start);
  tr.samples.push_back({path.s0, cur, target});
  const Connection shape = start.a;
  const Vec y0 = detail::pack(start.a);
  auto rhs = [&](double s, const Vec& y) -> Vec {
    FlowState st;
    try {
      st = FlowState{detail::unpack(shape, y), start.twist};
    } catch (const PreconditionError& e) {
      throw detail::FlowAbort{detail::FlowAbort::Kind::Collision, e.what()};
    } catch (const MalformedInput& e) {  // coincident poles at an intermediate stage
      throw detail::FlowAbort{detail::FlowAbort::Kind::Collision, e.what()};
    }
    if (detail::min_separation(st.a, st.twist) < tol::collide)
      throw detail::FlowAbort{detail::FlowAbort::Kind::Collision, "poles closer than the collision threshold"};
    if (detail::coefficient_norm(st.a) > tol::norm_cap)
      throw detail::FlowAbort{detail::FlowAbort::Kind::BlowUp, "coefficient norm exceeded the cap"};
    try {
      return detail::pack(isomonodromic_rhs(path.velocity(s), st), y0.size());
    } catch (const RegularityError& e) {
      throw detail::FlowAbort{detail::FlowAbort::Kind::Singular, e.what()};
    } catch (const DegenerateError& e) {
      throw detail::FlowAbort{detail::FlowAbort::Kind::Singular, e.what()};
    }
  };
  Vec y = y0;
  for (int k = 1; k <= samples; ++k) {
    const double sa = path.s0 + (path.s1 - path.s0) * (k - 1) / samples;
    const double sb = path.s0 + (path.s1 - path.s0) * k / samples;
    try {
      y = dopri5(rhs, sa, sb, y, OdeOptions{tol});
    } catch (const detail::FlowAbort& e) {
      tr.status = e.kind == detail::FlowAbort::Kind::Collision ? Trajectory::Status::Collision
                  : e.kind == detail::FlowAbort::Kind::BlowUp  ? Trajectory::Status::BlowUp
                                                               : Trajectory::Status::Singular;
      tr.message = e.what + " near s = " + std::to_string(sa);
      return tr;
    } catch (const NumericAbort& e) {
      tr.status = Trajectory::Status::BlowUp;
      tr.message = std::string(e.what()) + " near s = " + std::to_string(sa);
      return tr;
    }
    target = detail::advance_target(target, path, sa, sb);
    tr.samples.push_back({sb, FlowState{detail::unpack(shape, y), start.twist}, target});
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Verification

struct DriftReport {
  std::vector<std::vector<cplx>> invariants;  // per sample
  double max_abs_drift = 0.0;
  double max_rel_drift = 0.0;     // |delta| / max(1, |initial|)
  double max_scaled_drift = 0.0;  // |delta| / max(1, normwise scale of the invariant)
  double max_formal_drift = 0.0;  // residues of B at irregular poles (not prescribed by the path)
  double max_type_tracking = 0.0; // |B_{-k} - prescribed| at irregular poles
  cplx base{};
  std::vector<std::size_t> order;
};

namespace detail {

/// Diagonal formal invariants B_{-l} .. B_{-1} at every irregular pole.
inline std::vector<std::vector<Mat>> formal_invariants(const Connection& a) {
  std::vector<std::vector<Mat>> out;
  for (const auto& p : a.poles()) {
    std::vector<Mat> f;
    if (p.order() >= 2) {
      const DiagonalJetPair d = formal_diagonalize(a, p.t, p.order() - 1);
      for (int k = p.order(); k >= 1; --k) f.push_back(d.b.coeff(-k));
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace detail

/// Monodromy conjugacy invariants along the trajectory: one base point for all
/// samples and loop order frozen from the first sample.
inline DriftReport verify_isomonodromy(const std::vector<FlowSample>& traj, double tol) {
  if (traj.empty()) throw MalformedInput("verify_isomonodromy: empty trajectory");
  DriftReport rep;
  std::vector<std::vector<cplx>> configs;
  for (const auto& s : traj) configs.push_back(finite_poles(s.state.a));
  rep.base = choose_base_point(configs);
  rep.order = loop_order(configs.front(), rep.base);
  const auto f0 = detail::formal_invariants(traj.front().state.a);
  std::vector<double> scales;
  for (const auto& s : traj) {
    const MonodromyRep mr = monodromy_rep(s.state.a, rep.base, tol, rep.order);
    const auto inv = conjugacy_invariants(mr);
    if (rep.invariants.empty()) {
      scales = invariant_scales(mr);
    } else {
      const auto& first = rep.invariants.front();
      for (std::size_t k = 0; k < inv.size(); ++k) {
        const double d = std::abs(inv[k] - first[k]);
        rep.max_abs_drift = std::max(rep.max_abs_drift, d);
        rep.max_rel_drift = std::max(rep.max_rel_drift, d / std::max(1.0, std::abs(first[k])));
        rep.max_scaled_drift = std::max(rep.max_scaled_drift, d / std::max(1.0, scales[k]));
      }
    }
    rep.invariants.push_back(inv);
    const auto f = detail::formal_invariants(s.state.a);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i].empty()) continue;
      rep.max_formal_drift = std::max(rep.max_formal_drift, max_abs(f[i].back() - f0[i].back()));
      const auto& types = s.target.types.at(i);
      for (std::size_t k = 0; k < types.size(); ++k)  // types[k] is B_{-(k+2)}; f[i] runs from B_{-l}
        rep.max_type_tracking =
            std::max(rep.max_type_tracking, max_abs(f[i][f[i].size() - 2 - k] - types[k]));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Section and the autonomous extended system

struct SectionValue {
  QuadraticDifferential q_hat;             // residue at t_i = H for unit translation at t_i
  std::vector<std::vector<Mat>> b_hat;     // per pole: B_0 .. B_{l-2} (empty for simple poles)
};

inline SectionValue section_S(const FlowState& s) {
  SectionValue out;
  const auto& poles = s.a.poles();
  const QuadraticDifferential q = reduced_quadratic(s.a);
  std::vector<PolarTerm<cplx>> terms;
  for (std::size_t i = 0; i < poles.size(); ++i)
    terms.push_back({poles[i].t, {hamiltonian_mu_Q(DeformationCocycle::translation(poles.size(), i), s.a, q)}});
  out.q_hat = QuadraticDifferential(terms, {}, cplx{});
  for (const auto& p : poles) {
    std::vector<Mat> b;
    const int l = p.order();
    if (l >= 2) {
      const DiagonalJetPair d = formal_diagonalize(s.a, p.t, 2 * l - 2);
      for (int k = 0; k <= l - 2; ++k) b.push_back(d.b.coeff(k));
    }
    out.b_hat.push_back(std::move(b));
  }
  return out;
}

/// FlowState plus momenta: omega pairs with pole positions (its residue at
/// t_i), h with the irregular types (h[i][k-2] pairs with B_{-k}).
struct ExtendedState {
  FlowState state;
  double s = 0.0;
  std::vector<cplx> omega;
  std::vector<std::vector<Mat>> h;
};

struct ExtendedDerivative {
  StateDerivative state;
  std::vector<cplx> omega;
  std::vector<std::vector<Mat>> h;
};

/// H_Y = F_Y(S(P(x)) - x): the section's pairing with Y minus the momenta,
/// with the irregular pairing tr res(beta~ B), beta~ = -2 dT.
inline cplx extended_hamiltonian(const Direction& y, const ExtendedState& x) {
  const SectionValue sv = section_S(x.state);
  cplx acc{};
  for (std::size_t i = 0; i < y.dt.size(); ++i) acc += y.dt[i] * (sv.q_hat.polar()[i].c[0] - x.omega.at(i));
  for (std::size_t i = 0; i < y.rates.size(); ++i) {
    if (y.rates[i].empty()) continue;
    IrregularCotangent bt{detail::beta_from_rates(y.rates[i])};
    for (auto& b : bt.beta) b *= -2.0;
    acc += hamiltonian_beta_B(bt, x.state.a, i);
    for (std::size_t k = 0; k < y.rates[i].size(); ++k) acc -= (y.rates[i][k] * x.h.at(i).at(k)).trace();
  }
  return acc;
}

/// Hamiltonian flow of H_Y on fiber x (t, omega) x (types, h). Pole positions
/// and types move by Y; the fiber moves by the reference lift plus the field
/// of H_Y differentiated numerically in the fiber chart; the momenta pick up
/// the explicit moduli dependence of H_Y.
inline ExtendedDerivative extended_autonomous_rhs(const std::function<Direction(double)>& yfield,
                                                  const ExtendedState& x) {
  const Direction y = yfield(x.s);
  ExtendedDerivative out;
  out.state = lift_I0(y, x.state);
  const Cotangent dh = numeric_cotangent(
      [&](const Connection& a) {
        ExtendedState xs = x;
        xs.state.a = a;
        return extended_hamiltonian(y, xs);
      },
      x.state.a);
  out.state = add_field(std::move(out.state), hamiltonian_vector_field(dh, x.state.a));

  // d omega_i / ds = dH_Y / dt_i at fixed chart coordinates.
  const auto& poles = x.state.a.poles();
  const double h = 1e-4;
  for (std::size_t i = 0; i < poles.size(); ++i) {
    auto at = [&](cplx shift) {
      ExtendedState xs = x;
      auto pp = poles;
      pp[i].t += shift;
      xs.state.a = x.state.a.with_poles(pp);
      return extended_hamiltonian(y, xs);
    };
    auto diff = [&](double e) { return (at(e) - at(-e)) / (2.0 * e); };
    out.omega.push_back((4.0 * diff(h / 2) - diff(h)) / 3.0);
  }
  // d h / ds = dH_Y / d(types) along unit reference lifts of each type entry.
  out.h.resize(poles.size());
  for (std::size_t i = 0; i < poles.size(); ++i) {
    const int l = poles[i].order();
    for (int k = 2; k <= l; ++k) {
      Mat g = zero_mat(x.state.a.n());
      for (Eigen::Index e = 0; e < g.rows(); ++e) {
        Direction unit;
        unit.dt.assign(poles.size(), cplx{});
        unit.rates.resize(poles.size());
        unit.rates[i].assign(static_cast<std::size_t>(l - 1), zero_mat(g.rows()));
        unit.rates[i][static_cast<std::size_t>(k - 2)](e, e) = 1.0;
        const StateDerivative lift = lift_I0(unit, x.state);
        auto at = [&](double eps) {
          ExtendedState xs = x;
          auto pp = poles;
          for (std::size_t q = 0; q < pp[i].c.size(); ++q) pp[i].c[q] += eps * lift.dc[i][q];
          xs.state.a = x.state.a.with_poles(pp);
          return extended_hamiltonian(y, xs);
        };
        auto diff = [&](double eps) { return (at(eps) - at(-eps)) / (2.0 * eps); };
        g(e, e) = (4.0 * diff(h / 2) - diff(h)) / 3.0;
      }
      out.h[i].push_back(g);
    }
  }
  return out;
}

/// Integrates the extended system over [s0, s1] and returns the samples of
/// its FlowState projection.
inline std::vector<FlowSample> integrate_extended(const ExtendedState& start, const ModuliPath& path, double tol,
                                                  int samples = 10) {
  const Connection shape = start.state.a;
  const Eigen::Index ns = detail::pack(shape).size();
  Eigen::Index nh = 0;
  for (const auto& hi : start.h) nh += static_cast<Eigen::Index>(hi.size()) * shape.n();
  const auto np = static_cast<Eigen::Index>(start.omega.size());
  auto pack_ext = [&](const ExtendedState& x) {
    Vec v(ns + np + nh);
    v.head(ns) = detail::pack(x.state.a);
    for (Eigen::Index i = 0; i < np; ++i) v(ns + i) = x.omega[static_cast<std::size_t>(i)];
    Eigen::Index at = ns + np;
    for (const auto& hi : x.h)
      for (const auto& m : hi) {
        v.segment(at, shape.n()) = m.diagonal();
        at += shape.n();
      }
    return v;
  };
  auto unpack_ext = [&](const Vec& v, double s) {
    ExtendedState x = start;
    x.s = s;
    x.state.a = detail::unpack(shape, v.head(ns));
    for (Eigen::Index i = 0; i < np; ++i) x.omega[static_cast<std::size_t>(i)] = v(ns + i);
    Eigen::Index at = ns + np;
    for (auto& hi : x.h)
      for (auto& m : hi) {
        m = Mat(v.segment(at, shape.n()).asDiagonal());
        at += shape.n();
      }
    return x;
  };
  auto rhs = [&](double s, const Vec& v) -> Vec {
    const ExtendedDerivative d = extended_autonomous_rhs(path.velocity, unpack_ext(v, s));
    Vec out(v.size());
    out.head(ns) = detail::pack(d.state, ns);
    for (Eigen::Index i = 0; i < np; ++i) out(ns + i) = d.omega[static_cast<std::size_t>(i)];
    Eigen::Index at = ns + np;
    for (const auto& hi : d.h)
      for (const auto& m : hi) {
        out.segment(at, shape.n()) = m.diagonal();
        at += shape.n();
      }
    return out;
  };
  std::vector<FlowSample> out{{path.s0, start.state, moduli(start.state)}};
  Vec v = pack_ext(start);
  for (int k = 1; k <= samples; ++k) {
    const double sa = path.s0 + (path.s1 - path.s0) * (k - 1) / samples;
    const double sb = path.s0 + (path.s1 - path.s0) * k / samples;
    v = dopri5(rhs, sa, sb, v, OdeOptions{tol});
    const ExtendedState x = unpack_ext(v, sb);
    out.push_back({sb, x.state, moduli(x.state)});
  }
  return out;
}

/// Extended state sitting on the section: omega and h chosen so S(P(x)) = x.
inline ExtendedState on_section(const FlowState& s) {
  ExtendedState x{s, 0.0, {}, {}};
  const SectionValue sv = section_S(s);
  for (const auto& t : sv.q_hat.polar()) x.omega.push_back(t.c[0]);
  for (const auto& p : s.a.poles()) x.h.emplace_back(static_cast<std::size_t>(std::max(p.order() - 1, 0)), zero_mat(s.a.n()));
  return x;
}

}  // namespace isomono
