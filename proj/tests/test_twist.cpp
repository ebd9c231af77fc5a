#include <gtest/gtest.h>

#include "isomono/twist.hpp"
#include "util.hpp"

using namespace isomono;
using isomono::testing::rand_disk;
using isomono::testing::rand_mat;

namespace {

cplx trace_residue_sum(const Connection& a) {
  cplx s{};
  for (const auto& p : a.all_polar()) s += p.c[0].trace();
  return s;
}

TwistSite scalar_z(Eigen::Index n, cplx p = 0.0) {
  return TwistSite{p, {zero_mat(n), identity(n)}, {}};
}

MatrixDivisor random_twist(std::mt19937_64& rng, Eigen::Index n) {
  MatrixDivisor d;
  std::vector<cplx> params;
  for (Eigen::Index k = 0; k < n; ++k) params.push_back(rand_disk(rng));
  d.sites.push_back(normal_form(cplx(2.0, 0.5), params));
  // A germ with det = c w^2: upper triangular with w on the diagonal, twisted by a constant.
  Mat c = rand_mat(rng, n) + 2.0 * identity(n);
  Mat t1 = identity(n);
  Mat t0 = zero_mat(n);
  t0.triangularView<Eigen::StrictlyUpper>() = rand_mat(rng, n).triangularView<Eigen::StrictlyUpper>();
  d.sites.push_back(TwistSite{cplx(-1.5, 1.0), {c * t0, c * t1}, {}});
  return d;
}

}  // namespace

TEST(NormalForm, RankTwo) {
  const TwistSite s = normal_form(0.0, {0.0, 5.0});
  Mat expect0(2, 2), expect1(2, 2);
  expect0 << 0, -5, 0, 1;
  expect1 << 1, 0, 0, 0;
  EXPECT_LT(max_abs(s.t[0] - expect0), 1e-15);
  EXPECT_LT(max_abs(s.t[1] - expect1), 1e-15);
  EXPECT_EQ(site_degree(s), 1);
}

TEST(NormalForm, RankOne) {
  const TwistSite s = normal_form(0.0, {0.0});
  EXPECT_EQ(s.t[0](0, 0), cplx{});
  EXPECT_EQ(s.t[1](0, 0), cplx{1.0});
}

TEST(NormalForm, RankThreeZeroData) {
  const TwistSite s = normal_form(0.0, {0.0, 0.0, 0.0});
  Mat d0 = identity(3);
  d0(0, 0) = 0.0;
  EXPECT_LT(max_abs(s.t[0] - d0), 1e-15);
  EXPECT_EQ(site_degree(s), 1);
}

TEST(Degree, Examples) {
  EXPECT_EQ(degree(MatrixDivisor{{normal_form(1.0, {0.3, 0.1})}}), 1);
  for (Eigen::Index n = 1; n <= 4; ++n) EXPECT_EQ(degree(MatrixDivisor{{scalar_z(n)}}), n);
  EXPECT_EQ(degree(MatrixDivisor{}), 0);
}

TEST(Degree, SingularGermRejected) {
  Mat t0 = zero_mat(2);
  t0(0, 0) = 1.0;
  EXPECT_THROW(degree(MatrixDivisor{{TwistSite{0.0, {t0}, {}}}}), SingularGermError);
}

TEST(Degree, InvariantUnderRightAction) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const TwistSite s = normal_form(0.0, {rand_disk(rng), rand_disk(rng), rand_disk(rng)});
    // F(w) = F0 + F1 w with F0 invertible.
    const Mat f0 = rand_mat(rng, 3) + 3.0 * identity(3), f1 = rand_mat(rng, 3);
    TwistSite sf{0.0, {s.t[0] * f0, s.t[0] * f1 + s.t[1] * f0, s.t[1] * f1}, {}};
    EXPECT_EQ(site_degree(sf), site_degree(s));
  }
}

TEST(Push, ScalarZ) {
  const Connection a0 = push_connection(MatrixDivisor{{scalar_z(1)}}, Connection(1, {}));
  ASSERT_EQ(a0.extra().size(), 1u);
  EXPECT_EQ(a0.extra()[0].order(), 1);
  EXPECT_LT(std::abs(a0.extra()[0].c[0](0, 0) - 1.0), 1e-12);
}

TEST(Push, InvertibleTwistKeepsPoleSet) {
  std::mt19937_64 rng(32);
  const Connection a(2, {{0.0, {rand_mat(rng, 2)}}, {1.0, {rand_mat(rng, 2)}}});
  const Mat g = rand_mat(rng, 2) + 2.0 * identity(2);
  const Connection b = push_connection(MatrixDivisor{{TwistSite{cplx(3, 0), {g}, {}}}}, a);
  EXPECT_EQ(b.poles().size(), 2u);
  EXPECT_TRUE(b.extra().empty());
}

TEST(Push, NormalFormRankTwo) {
  const Connection a0 = push_connection(MatrixDivisor{{normal_form(0.5, {0.2, -0.7})}}, Connection(2, {}));
  ASSERT_EQ(a0.extra().size(), 1u);
  EXPECT_EQ(a0.extra()[0].order(), 1);
  EXPECT_LT(std::abs(a0.extra()[0].c[0].trace() - 1.0), 1e-12);
}

TEST(Push, OverlapRejected) {
  const Connection a(2, {{0.0, {identity(2)}}});
  EXPECT_THROW(push_connection(MatrixDivisor{{scalar_z(2)}}, a), PreconditionError);
}

TEST(Push, GermVanishingElsewhereRejected) {
  // det = w (w - 1) vanishes at z = p + 1 as well.
  Mat t0 = zero_mat(1), t1 = zero_mat(1), t2 = zero_mat(1);
  t1(0, 0) = -1.0;
  t2(0, 0) = 1.0;
  EXPECT_THROW(push_connection(MatrixDivisor{{TwistSite{3.0, {t0, t1, t2}, {}}}}, Connection(1, {})),
               SingularGermError);
}

TEST(Pull, HolomorphicByScalarZ) {
  Mat m(1, 1);
  m(0, 0) = cplx(0.4, 0.3);
  const Connection a1 = pull_connection(MatrixDivisor{{scalar_z(1)}}, Connection(1, {}, {m}));
  ASSERT_EQ(a1.extra().size(), 1u);
  EXPECT_LT(std::abs(a1.extra()[0].c[0](0, 0) + 1.0), 1e-12);
  ASSERT_EQ(a1.tail().size(), 1u);
  EXPECT_LT(std::abs(a1.tail()[0](0, 0) - m(0, 0)), 1e-12);
}

TEST(Pull, ConstantIsSimilarity) {
  std::mt19937_64 rng(33);
  const Connection a(2, {{0.0, {rand_mat(rng, 2)}}});
  const Mat g = rand_mat(rng, 2) + 2.0 * identity(2);
  const Connection b = pull_connection(MatrixDivisor{{TwistSite{cplx(3, 0), {g}, {}}}}, a);
  const cplx z(0.5, 0.5);
  EXPECT_LT(max_abs(b(z) - g.inverse() * a(z) * g), 1e-12);
}

TEST(Properties, PushPullRoundTrip) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const Connection a(2, {{0.0, {rand_mat(rng, 2)}}, {1.0, {rand_mat(rng, 2)}}, {cplx(0, 1), {rand_mat(rng, 2)}}});
    const MatrixDivisor d = random_twist(rng, 2);
    const Connection back = pull_connection(d, push_connection(d, a));
    EXPECT_TRUE(back.extra().empty());
    for (int s = 0; s < 5; ++s) {
      const cplx z = rand_disk(rng, 1.0) + cplx(0.6, -1.5);
      EXPECT_LT(isomono::testing::rel_err(back(z), a(z)), 1e-10);
    }
  }
}

TEST(Properties, TraceResidueBookkeeping) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 2;
    const Connection a(n, {{0.0, {rand_mat(rng, n)}}, {1.0, {rand_mat(rng, n)}}});
    const MatrixDivisor d = random_twist(rng, n);
    const Connection a0 = push_connection(d, a);
    const cplx diff = trace_residue_sum(a0) - trace_residue_sum(a);
    EXPECT_LT(std::abs(diff - static_cast<double>(degree(d))), 1e-10) << trial;
  }
}
