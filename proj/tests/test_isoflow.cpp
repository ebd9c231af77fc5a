#include <gtest/gtest.h>

#include "isomono/isoflow.hpp"
#include "util.hpp"

using namespace isomono;
using isomono::testing::rand_disk;
using isomono::testing::rand_mat;
using isomono::testing::rel_err;
using isomono::testing::separated_points;

namespace {

Connection random_fuchsian(std::mt19937_64& rng, Eigen::Index n, int poles, double scale = 1.0) {
  const auto ts = separated_points(rng, poles, 2.0, 0.8);
  std::vector<PolarPart> pp;
  Mat sum = zero_mat(n);
  for (int i = 0; i < poles; ++i) {
    Mat r = (i + 1 < poles) ? rand_mat(rng, n, scale) : Mat(-sum);
    sum += r;
    pp.push_back({ts[static_cast<std::size_t>(i)], {r}});
  }
  return Connection(n, pp);
}

/// Pole of order l at the origin with diagonal regular leading term, plus simple poles.
Connection random_irregular(std::mt19937_64& rng, int l, int simple, double scale = 0.5) {
  Mat lead = zero_mat(2);
  lead(0, 0) = 0.5;
  lead(1, 1) = -0.5;
  std::vector<Mat> c;
  for (int k = 1; k < l; ++k) c.push_back(rand_mat(rng, 2, scale));
  c.push_back(lead);
  std::vector<PolarPart> pp{{0.0, c}};
  const cplx spots[] = {cplx(1.5, 0.3), cplx(-1.2, 1.0), cplx(0.4, -1.6)};
  for (int i = 0; i < simple; ++i) pp.push_back({spots[i], {rand_mat(rng, 2, scale)}});
  return Connection(2, pp);
}

Mat diag2(cplx a, cplx b) {
  Mat m = zero_mat(2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

/// Compatibility oracle: A' = d Omega + [Omega, A] with Omega = polar_p(Z beta Z^{-1}).
std::vector<std::vector<Mat>> jmu_oracle(const Connection& a, std::size_t i, const std::vector<Mat>& rates) {
  const auto& p = a.poles()[i];
  const int l = p.order();
  std::vector<Mat> beta;
  for (std::size_t j = 1; j <= rates.size(); ++j) beta.push_back(-rates[j - 1] / static_cast<double>(j));
  const DiagonalJetPair d = formal_diagonalize(a, p.t, l);
  std::vector<Mat> bc(beta.rbegin(), beta.rend());
  const MatJet bj(Point::at(p.t), -(l - 1), bc, false, MatJet::kExact);
  const MatJet zj = d.z.truncated(l - 1);
  const MatJet prod = zj * bj * inverse(zj);
  std::vector<Mat> omega;
  for (int j = 1; j < l; ++j) omega.push_back(prod.coeff(-j));
  const PFSum<Mat> om({{p.t, omega}}, {}, zero_mat(2));

  std::vector<std::vector<Mat>> out;
  for (std::size_t q = 0; q < a.poles().size(); ++q) {
    const auto& pq = a.poles()[q];
    const int lq = pq.order();
    const Point at = Point::at(pq.t);
    const int span = l + lq;
    const MatJet oj = om.laurent(at, span, false);
    const MatJet aj = a.laurent(at, span);
    const MatJet br = oj * aj - aj * oj;
    std::vector<Mat> dc;
    for (int k = 1; k <= lq; ++k) {
      Mat v = br.coeff(-k);
      if (q == i && k >= 2) v -= static_cast<double>(k - 1) * omega[static_cast<std::size_t>(k - 2)];
      dc.push_back(v);
    }
    out.push_back(dc);
  }
  return out;
}

FlowState state_of(const Connection& a) { return FlowState{a, {}}; }

}  // namespace

TEST(Lift, FuchsianTranslationFreezesCoefficients) {
  std::mt19937_64 rng(51);
  const Connection a = random_fuchsian(rng, 2, 4);
  const StateDerivative d = lift_I0(Direction::translation(4, 1), state_of(a));
  EXPECT_EQ(d.dt[1], cplx(1.0));
  EXPECT_EQ(d.dt[0], cplx{});
  for (const auto& pc : d.dc)
    for (const auto& c : pc) EXPECT_EQ(max_abs(c), 0.0);
}

TEST(Lift, IrregularRankOneRaisesLeadingTerm) {
  const Connection a(1, {{0.0, {Mat::Constant(1, 1, 0.3), Mat::Constant(1, 1, 1.2)}}, {1.0, {Mat::Constant(1, 1, -0.3)}}});
  Direction dir;
  dir.dt = {0.0, 0.0};
  dir.rates = {{Mat::Constant(1, 1, cplx(0.25, 0.1))}, {}};
  const StateDerivative d = lift_I0(dir, state_of(a));
  EXPECT_LT(std::abs(d.dc[0][1](0, 0) - cplx(0.25, 0.1)), 1e-15);
  EXPECT_EQ(d.dc[0][0](0, 0), cplx{});
}

TEST(Lift, RejectsNonDiagonalRates) {
  std::mt19937_64 rng(52);
  const Connection a = random_irregular(rng, 2, 2);
  Direction dir = Direction::translation(3, 0, 0.0);
  dir.rates[0] = {Mat::Ones(2, 2)};
  EXPECT_THROW(lift_I0(dir, state_of(a)), MalformedInput);
}

TEST(Rhs, SchlesingerEmerges) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    const Connection a = random_fuchsian(rng, 2, 4);
    const auto& p = a.poles();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const StateDerivative d = isomonodromic_rhs(Direction::translation(4, i), state_of(a));
      Mat self = zero_mat(2);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (j == i) continue;
        const Mat br = commutator(p[i].c[0], p[j].c[0]) / (p[i].t - p[j].t);
        self -= br;
        EXPECT_LT(rel_err(d.dc[j][0], br), 1e-8);
      }
      EXPECT_LT(rel_err(d.dc[i][0], self), 1e-8);
      EXPECT_EQ(d.dt[i], cplx(1.0));
    }
  }
}

TEST(Rhs, CommutingResiduesOnlyMovePoles) {
  const Connection a(2, {{0.0, {diag2(0.3, -0.1)}}, {1.0, {diag2(-0.5, 0.2)}}, {cplx(0.0, 1.0), {diag2(0.2, -0.1)}}});
  const StateDerivative d = isomonodromic_rhs(Direction::translation(3, 2), state_of(a));
  for (const auto& pc : d.dc)
    for (const auto& c : pc) EXPECT_LT(max_abs(c), 1e-12);
  EXPECT_EQ(d.dt[2], cplx(1.0));
}

TEST(Rhs, IrregularMatchesCompatibilityOracle) {
  std::mt19937_64 rng(54);
  for (int l = 2; l <= 3; ++l)
    for (int trial = 0; trial < 4; ++trial) {
      const Connection a = random_irregular(rng, l, 2);
      std::vector<Mat> rates;
      for (int k = 2; k <= l; ++k) rates.push_back(diag2(rand_disk(rng), rand_disk(rng)));
      Direction dir = Direction::translation(3, 0, 0.0);
      dir.rates[0] = rates;
      const StateDerivative d = isomonodromic_rhs(dir, state_of(a));
      const auto oracle = jmu_oracle(a, 0, rates);
      for (std::size_t q = 0; q < oracle.size(); ++q)
        for (std::size_t k = 0; k < oracle[q].size(); ++k)
          EXPECT_LT(rel_err(d.dc[q][k], oracle[q][k]), 1e-7) << "l=" << l << " pole " << q << " order " << k + 1;
    }
}

TEST(Flow, StationaryPathIsConstant) {
  std::mt19937_64 rng(55);
  const Connection a = random_fuchsian(rng, 2, 3);
  const ModuliPath still{[](double) { return Direction::translation(3, 0, 0.0); }, 0.0, 1.0};
  const Trajectory tr = integrate_flow(state_of(a), still, 1e-10, 3);
  ASSERT_EQ(tr.status, Trajectory::Status::Completed);
  for (const auto& s : tr.samples)
    for (std::size_t i = 0; i < a.poles().size(); ++i) EXPECT_EQ(max_abs(s.state.a.poles()[i].c[0] - a.poles()[i].c[0]), 0.0);
}

TEST(Flow, CommutingResiduesStayFixed) {
  const Connection a(2, {{0.0, {diag2(0.3, -0.1)}}, {1.0, {diag2(-0.5, 0.2)}}, {cplx(0.0, 1.5), {diag2(0.2, -0.1)}}});
  const Trajectory tr = integrate_flow(state_of(a), ModuliPath::arc(3, 1, 1.0, 1.25, kPi), 1e-10, 4);
  ASSERT_EQ(tr.status, Trajectory::Status::Completed) << tr.message;
  const auto& last = tr.samples.back().state.a;
  EXPECT_LT(std::abs(last.poles()[1].t - 1.5), 1e-9);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(max_abs(last.poles()[i].c[0] - a.poles()[i].c[0]), 1e-12);
  EXPECT_LT(verify_isomonodromy(tr.samples, 1e-11).max_abs_drift, 1e-9);
}

TEST(Flow, FuchsianSemicirclePreservesMonodromy) {
  std::mt19937_64 rng(56);
  const Connection a = random_fuchsian(rng, 2, 4, 0.6);
  const cplx t1 = a.poles()[1].t;
  const Trajectory tr = integrate_flow(state_of(a), ModuliPath::arc(4, 1, t1, t1 + 0.15, kPi), 1e-10, 4);
  ASSERT_EQ(tr.status, Trajectory::Status::Completed) << tr.message;
  EXPECT_LT(std::abs(tr.samples.back().state.a.poles()[1].t - (t1 + 0.3)), 1e-9);
  const DriftReport rep = verify_isomonodromy(tr.samples, 1e-11);
  EXPECT_LT(rep.max_rel_drift, 1e-6);
}

TEST(Flow, IrregularDeformationPreservesMonodromyAndTracksType) {
  std::mt19937_64 rng(57);
  const Connection a = random_irregular(rng, 2, 2, 0.4);
  const ModuliPath path = ModuliPath::irregular(3, 0, {diag2(0.3, -0.2)});
  const Trajectory tr = integrate_flow(state_of(a), path, 1e-10, 4);
  ASSERT_EQ(tr.status, Trajectory::Status::Completed) << tr.message;
  const DriftReport rep = verify_isomonodromy(tr.samples, 1e-11);
  EXPECT_LT(rep.max_rel_drift, 1e-6);
  EXPECT_LT(rep.max_type_tracking, 1e-8);
  EXPECT_LT(rep.max_formal_drift, 1e-8);
}

TEST(Flow, CollisionAbortsWithPartialTrajectory) {
  const Connection a(2, {{0.0, {diag2(0.3, -0.1)}}, {1.0, {diag2(-0.3, 0.1)}}});
  // Pole 1 heads straight for pole 0 and reaches it at s = 0.5.
  const ModuliPath path{[](double) { return Direction::translation(2, 1, -2.0); }, 0.0, 1.0};
  const Trajectory tr = integrate_flow(state_of(a), path, 1e-10, 4);
  EXPECT_EQ(tr.status, Trajectory::Status::Collision);
  EXPECT_GE(tr.samples.size(), 2u);
  EXPECT_LT(tr.samples.size(), 5u);
}

TEST(Flow, NormCapFlagsMovableSingularity) {
  const Connection a(2, {{0.0, {diag2(2e8, -2e8)}}, {1.0, {diag2(-2e8, 2e8)}}});
  const Trajectory tr = integrate_flow(state_of(a), ModuliPath::arc(2, 1, 1.0, 2.0, 0.5), 1e-10, 2);
  EXPECT_EQ(tr.status, Trajectory::Status::BlowUp);
  EXPECT_EQ(tr.samples.size(), 1u);
}

TEST(Flow, TwistEquivariance) {
  std::mt19937_64 rng(58);
  const Connection a = random_fuchsian(rng, 2, 3, 0.5);
  MatrixDivisor twist;
  twist.sites.push_back(normal_form(cplx(3.0, 2.5), {rand_disk(rng), rand_disk(rng)}));
  const cplx t0 = a.poles()[0].t;
  const Trajectory tr = integrate_flow(FlowState{a, twist}, ModuliPath::arc(3, 0, t0, t0 + 0.2, kPi), 1e-10, 3);
  ASSERT_EQ(tr.status, Trajectory::Status::Completed);
  std::vector<FlowSample> pushed = tr.samples;
  for (auto& s : pushed) s.state.a = push_connection(twist, s.state.a);
  const DriftReport r1 = verify_isomonodromy(tr.samples, 1e-11);
  const DriftReport r2 = verify_isomonodromy(pushed, 1e-11);
  EXPECT_LT(std::abs(r1.max_rel_drift - r2.max_rel_drift), 1e-8);
  // The twist point contributes identity monodromy along the flow.
  for (const auto& s : pushed) EXPECT_LT(max_abs(local_monodromy(s.state.a, twist.sites[0].p, 1e-11) - identity(2)), tol::mono);
}

TEST(Section, Examples) {
  const Connection zero(2, {{0.0, {zero_mat(2)}}, {1.0, {zero_mat(2)}}});
  const SectionValue z = section_S(state_of(zero));
  for (const auto& t : z.q_hat.polar()) EXPECT_EQ(t.c[0], cplx{});

  const cplx av(0.4, 0.3), t1(0.0), t2(1.5, 0.5);
  const Connection two(1, {{t1, {Mat::Constant(1, 1, av)}}, {t2, {Mat::Constant(1, 1, -av)}}});
  const SectionValue s = section_S(state_of(two));
  EXPECT_LT(std::abs(s.q_hat.polar()[0].c[0] - (-2.0 * av * av / (t1 - t2))), 1e-14);
  EXPECT_LT(std::abs(s.q_hat.polar()[1].c[0] - (2.0 * av * av / (t1 - t2))), 1e-14);

  const Connection irr(1, {{0.0, {Mat::Constant(1, 1, 0.3), Mat::Constant(1, 1, 1.2)}}, {1.0, {Mat::Constant(1, 1, -0.3)}}});
  const SectionValue b = section_S(state_of(irr));
  ASSERT_EQ(b.b_hat[0].size(), 1u);
  EXPECT_LT(std::abs(b.b_hat[0][0](0, 0) - irr.laurent(Point::at(0.0), 0).coeff(0)(0, 0)), 1e-14);
  EXPECT_TRUE(b.b_hat[1].empty());
}

TEST(Extended, ZeroFieldIsStationary) {
  std::mt19937_64 rng(59);
  const ExtendedState x = on_section(state_of(random_fuchsian(rng, 2, 3)));
  const ExtendedDerivative d = extended_autonomous_rhs([](double) { return Direction::translation(3, 0, 0.0); }, x);
  for (const auto& pc : d.state.dc)
    for (const auto& c : pc) EXPECT_LT(max_abs(c), 1e-12);
  for (const auto& w : d.omega) EXPECT_LT(std::abs(w), 1e-12);
}

TEST(Extended, ProjectionMatchesIsomonodromicRhs) {
  std::mt19937_64 rng(60);
  for (int trial = 0; trial < 4; ++trial) {
    const bool irregular = trial % 2;
    const Connection a = irregular ? random_irregular(rng, 2, 2) : random_fuchsian(rng, 2, 4);
    Direction dir = Direction::translation(a.poles().size(), 1, rand_disk(rng));
    if (irregular) dir.rates[0] = {diag2(rand_disk(rng), rand_disk(rng))};
    const ExtendedState x = on_section(state_of(a));
    const ExtendedDerivative e = extended_autonomous_rhs([&](double) { return dir; }, x);
    const StateDerivative d = isomonodromic_rhs(dir, state_of(a));
    for (std::size_t q = 0; q < d.dc.size(); ++q) {
      EXPECT_EQ(e.state.dt[q], d.dt[q]);
      for (std::size_t k = 0; k < d.dc[q].size(); ++k) EXPECT_LT(rel_err(e.state.dc[q][k], d.dc[q][k]), 1e-9);
    }
  }
}

TEST(Extended, MomentumRecordsModuliDependence) {
  // n = 1, two poles: H_Y = v (-2a^2/(t1-t2) - omega_1), so omega_1' = dH/dt1 = 2a^2 v/(t1-t2)^2.
  const cplx av(0.4, 0.3), t1(0.0), t2(1.5, 0.5), v(0.7, -0.2);
  const Connection two(1, {{t1, {Mat::Constant(1, 1, av)}}, {t2, {Mat::Constant(1, 1, -av)}}});
  const ExtendedState x = on_section(state_of(two));
  const ExtendedDerivative d = extended_autonomous_rhs([&](double) { return Direction::translation(2, 0, v); }, x);
  EXPECT_LT(std::abs(d.omega[0] - 2.0 * av * av * v / ((t1 - t2) * (t1 - t2))), 1e-9);
}
