#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ofspc/errors.hpp"
#include "ofspc/qp_solver.hpp"

namespace ofspc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QpProblem random_qp(std::mt19937_64& rng, int n, int c) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  QpProblem p;
  p.P = testing::random_spd(rng, n, 0.2);
  p.q = testing::random_vector(rng, n, 2.0);
  p.A = testing::random_matrix(rng, c, n);
  const VectorXd z0 = testing::random_vector(rng, n, 0.3);
  const VectorXd Az0 = p.A * z0;
  p.l.resize(c);
  p.u.resize(c);
  for (int i = 0; i < c; ++i) {
    p.l(i) = Az0(i) - 0.2 - unit(rng);
    p.u(i) = Az0(i) + 0.2 + unit(rng);
    const double kind = unit(rng);
    if (kind < 0.15) p.l(i) = -kInf;
    else if (kind < 0.3) p.u(i) = kInf;
    else if (kind < 0.35) p.l(i) = p.u(i) = Az0(i);
  }
  return p;
}

TEST(QpSolverTest, UnconstrainedMinimum) {
  QpProblem p;
  p.P = MatrixXd{{2.0, 0.0}, {0.0, 4.0}};
  p.q = VectorXd{{-2.0, 4.0}};
  p.A = MatrixXd::Zero(0, 2);
  p.l = p.u = VectorXd::Zero(0);
  const auto s = solve(p);
  EXPECT_EQ(s.status, QpStatus::Solved);
  EXPECT_NEAR(s.z(0), 1.0, 1e-8);
  EXPECT_NEAR(s.z(1), -1.0, 1e-8);
}

TEST(QpSolverTest, BoxConstrainedScalar) {
  QpProblem p;
  p.P = MatrixXd::Constant(1, 1, 1.0);
  p.q = VectorXd::Constant(1, -3.0);
  p.A = MatrixXd::Constant(1, 1, 1.0);
  p.l = VectorXd::Constant(1, -1.0);
  p.u = VectorXd::Constant(1, 1.0);
  const auto s = solve(p);
  EXPECT_EQ(s.status, QpStatus::Solved);
  EXPECT_NEAR(s.z(0), 1.0, 1e-8);
  EXPECT_NEAR(s.dual(0), 2.0, 1e-6);
  EXPECT_NEAR(s.objective, -2.5, 1e-8);
}

TEST(QpSolverTest, EqualityConstraint) {
  QpProblem p;
  p.P = MatrixXd::Identity(2, 2);
  p.q = VectorXd::Zero(2);
  p.A = MatrixXd{{1.0, 1.0}};
  p.l = p.u = VectorXd::Constant(1, 2.0);
  const auto s = solve(p);
  EXPECT_EQ(s.status, QpStatus::Solved);
  EXPECT_NEAR(s.z(0), 1.0, 1e-8);
  EXPECT_NEAR(s.z(1), 1.0, 1e-8);
}

TEST(QpSolverTest, DetectsPrimalInfeasibility) {
  QpProblem p;
  p.P = MatrixXd::Identity(1, 1);
  p.q = VectorXd::Zero(1);
  p.A = MatrixXd{{1.0}, {1.0}};
  p.l = VectorXd{{2.0, -kInf}};
  p.u = VectorXd{{kInf, 1.0}};
  EXPECT_EQ(solve(p).status, QpStatus::PrimalInfeasible);
}

TEST(QpSolverTest, DetectsDualInfeasibility) {
  QpProblem p;
  p.P = MatrixXd::Zero(2, 2);
  p.q = VectorXd{{-1.0, 0.0}};
  p.A = MatrixXd{{0.0, 1.0}};
  p.l = VectorXd::Constant(1, -1.0);
  p.u = VectorXd::Constant(1, 1.0);
  EXPECT_EQ(solve(p).status, QpStatus::DualInfeasible);
}

TEST(QpSolverTest, RejectsMalformedProblems) {
  QpProblem p;
  p.P = MatrixXd::Identity(2, 2);
  p.q = VectorXd::Zero(2);
  p.A = MatrixXd::Identity(2, 2);
  p.l = VectorXd::Constant(2, 1.0);
  p.u = VectorXd::Constant(2, 0.0);
  EXPECT_THROW(solve(p), InputError);
  p.u = VectorXd::Constant(2, 2.0);
  p.P(0, 1) = 0.5;
  EXPECT_THROW(solve(p), InputError);
  p.P = -MatrixXd::Identity(2, 2);
  EXPECT_THROW(solve(p), InputError);
  p.P = MatrixXd::Identity(3, 3);
  EXPECT_THROW(solve(p), InputError);
}

TEST(QpSolverTest, MatchesActiveSetEnumeration) {
  std::mt19937_64 rng(2024);
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 12;
    const int c = 1 + (trial * 7) % 20;
    const auto planted = testing::planted_qp(rng, n, c, 4);
    const auto& p = planted.p;
    const auto ref = oracle::enumerate_active_sets(p.P, p.q, p.A, p.l, p.u, planted.active);
    ASSERT_TRUE(ref.has_value()) << "trial " << trial;
    EXPECT_LE((ref->z - planted.z_star).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
    const auto s = solve(p);
    ASSERT_EQ(s.status, QpStatus::Solved) << "trial " << trial;
    EXPECT_LE((s.z - ref->z).cwiseAbs().maxCoeff(), 1e-5) << "trial " << trial << " n=" << n << " c=" << c;
    ++compared;
  }
  EXPECT_EQ(compared, 200);
}

TEST(QpSolverTest, MatchesEnumerationOnUnplantedProblems) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = random_qp(rng, 2 + trial % 5, 1 + trial % 8);
    const auto ref = oracle::enumerate_active_sets(p.P, p.q, p.A, p.l, p.u, p.num_variables());
    ASSERT_TRUE(ref.has_value()) << "trial " << trial;
    const auto s = solve(p);
    ASSERT_EQ(s.status, QpStatus::Solved);
    EXPECT_LE((s.z - ref->z).cwiseAbs().maxCoeff(), 1e-5) << "trial " << trial;
  }
}

TEST(QpSolverTest, KktResidualsAtSolution) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_qp(rng, 8, 12);
    const auto s = solve(p);
    ASSERT_EQ(s.status, QpStatus::Solved);
    const auto r = kkt_residuals(p, s.z, s.dual);
    EXPECT_LE(r.primal, 1e-6);
    EXPECT_LE(r.dual, 1e-6);
    EXPECT_LE(r.complementarity, 1e-6);
  }
}

TEST(QpSolverTest, KktResidualsOfKnownPoint) {
  QpProblem p;
  p.P = MatrixXd::Identity(1, 1);
  p.q = VectorXd::Zero(1);
  p.A = MatrixXd::Identity(1, 1);
  p.l = VectorXd::Constant(1, 0.0);
  p.u = VectorXd::Constant(1, 1.0);
  const auto r = kkt_residuals(p, VectorXd::Constant(1, 1.5), VectorXd::Constant(1, 0.0));
  EXPECT_NEAR(r.primal, 0.5, 1e-15);
  EXPECT_NEAR(r.dual, 1.5, 1e-15);
}

TEST(QpSolverTest, InvariantToProblemScaling) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_qp(rng, 6, 10);
    QpProblem scaled = p;
    scaled.P *= 250.0;
    scaled.q *= 250.0;
    scaled.A.row(0) *= 1e3;
    scaled.l(0) *= 1e3;
    scaled.u(0) *= 1e3;
    const auto a = solve(p), b = solve(scaled);
    ASSERT_EQ(a.status, QpStatus::Solved);
    ASSERT_EQ(b.status, QpStatus::Solved);
    EXPECT_LE((a.z - b.z).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(QpSolverTest, Deterministic) {
  std::mt19937_64 rng(10);
  const auto p = random_qp(rng, 10, 15);
  const auto a = solve(p), b = solve(p);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(QpSolverTest, WarmStartReachesSameSolution) {
  std::mt19937_64 rng(12);
  const auto p = random_qp(rng, 10, 15);
  const auto cold = solve(p);
  const auto warm = solve(p, {}, cold.z, cold.dual);
  ASSERT_EQ(warm.status, QpStatus::Solved);
  EXPECT_LE((warm.z - cold.z).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(warm.iterations, cold.iterations);
}

}  // namespace
}  // namespace ofspc
