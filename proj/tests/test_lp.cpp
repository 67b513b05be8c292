#include <gtest/gtest.h>

#include "lp_oracle.hpp"
#include "simgap/error.hpp"
#include "simgap/lp.hpp"

namespace simgap {
namespace {

using testing::random_scp;
using testing::vertex_enumeration;

LinearProgram make_lp(Eigen::MatrixXd A, Eigen::VectorXd b, Eigen::VectorXd c) {
  return LinearProgram{std::move(A), std::move(b), std::move(c)};
}

TEST(Simplex, SmallBoundedProgram) {
  // min -y1 - y2 s.t. y1 + 2 y2 <= 4, 3 y1 + y2 <= 6, y >= 0.
  Eigen::MatrixXd A(4, 2);
  A << 1, 2, 3, 1, -1, 0, 0, -1;
  const auto lp = make_lp(A, Eigen::Vector4d(4, 6, 0, 0), Eigen::Vector2d(-1, -1));
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.y(0), 1.6, 1e-12);
  EXPECT_NEAR(r.y(1), 1.2, 1e-12);
  EXPECT_NEAR(r.objective, -2.8, 1e-12);
  EXPECT_NEAR(*vertex_enumeration(lp), -2.8, 1e-12);
}

TEST(Simplex, InfeasibleWithCertificate) {
  // y <= 1 and -y <= -2.
  Eigen::MatrixXd A(3, 1);
  A << 1, -1, 1;
  const auto lp = make_lp(A, Eigen::Vector3d(1, -2, 5), Eigen::VectorXd::Constant(1, 1.0));
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::infeasible);
  ASSERT_EQ(r.certificate.size(), 3);
  EXPECT_GE(r.certificate.minCoeff(), 0.0);
  EXPECT_NEAR((A.transpose() * r.certificate).norm(), 0.0, 1e-12);
  EXPECT_LT(lp.b.dot(r.certificate), 0.0);
  EXPECT_TRUE(r.violated_row == 0 || r.violated_row == 1);
}

TEST(Simplex, UnboundedWithDirection) {
  Eigen::MatrixXd A(1, 2);
  A << 1, 1;
  const auto lp = make_lp(A, Eigen::VectorXd::Constant(1, 1.0), Eigen::Vector2d(1, 0));
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::unbounded);
  EXPECT_LE((A * r.direction)(0), 1e-12);
  EXPECT_LT(lp.c.dot(r.direction), 0.0);
}

TEST(Simplex, RejectsMalformedPrograms) {
  Eigen::MatrixXd A(2, 2);
  A.setIdentity();
  EXPECT_THROW(solve_lp(make_lp(A, Eigen::Vector3d(1, 1, 1), Eigen::Vector2d(1, 1))),
               InvalidArgument);
  A(0, 0) = NAN;
  EXPECT_THROW(solve_lp(make_lp(A, Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1))),
               InvalidArgument);
}

// A highly degenerate program: many identical rows through one vertex.
TEST(Simplex, DegenerateRowsTerminate) {
  const int rows = 60;
  Eigen::MatrixXd A(rows, 2);
  Eigen::VectorXd b(rows);
  for (int i = 0; i < rows; ++i) {
    A.row(i) << -1.0 - (i % 3), -1.0 + (i % 2);
    b(i) = 0.0;
  }
  A.row(0) << -1, 0;
  A.row(1) << 0, -1;
  const auto lp = make_lp(A, b, Eigen::Vector2d(1, 1));
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.objective, *vertex_enumeration(lp), 1e-9);
}

TEST(Simplex, MatchesVertexEnumerationOnScenarioPrograms) {
  Engine eng = make_engine(4242);
  std::uniform_int_distribution<std::size_t> zd(1, 3), sd(1, 25);
  std::uniform_real_distribution<double> dd(0.0, 0.05);
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t z = zd(eng);
    const std::size_t samples = std::max(z, sd(eng));
    const ScenarioLP scp = random_scp(eng, z, samples, dd(eng));
    const LpResult r = solve_lp(scp.lp);
    ASSERT_EQ(r.status, LpStatus::optimal) << "instance " << inst;
    const auto oracle = vertex_enumeration(scp.lp);
    ASSERT_TRUE(oracle.has_value());
    EXPECT_NEAR(r.objective, *oracle, 1e-7) << "instance " << inst;
    EXPECT_LE(max_violation(scp.lp, r.y), 1e-9);
  }
}

TEST(Simplex, RowGenerationMatchesDenseSolve) {
  Engine eng = make_engine(77);
  for (int inst = 0; inst < 6; ++inst) {
    const std::size_t z = 3 + inst % 4;
    const ScenarioLP scp = random_scp(eng, z, 800 + 150 * inst, 0.01);
    LpOptions dense;
    dense.working_set_threshold = 1u << 30;
    LpOptions gen;
    gen.working_set_threshold = 50;
    gen.working_set_batch = 16;
    const LpResult a = solve_lp(scp.lp, dense);
    const LpResult b = solve_lp(scp.lp, gen);
    ASSERT_EQ(a.status, LpStatus::optimal);
    ASSERT_EQ(b.status, LpStatus::optimal);
    EXPECT_NEAR(a.objective, b.objective, 1e-9 * (1 + std::abs(a.objective)));
    EXPECT_LE(max_violation(scp.lp, b.y), 1e-9);
  }
}

TEST(Simplex, RowGenerationReportsInfeasibleRowOfFullProgram) {
  // 500 feasible rows y <= 10 + i plus one contradicting row at the end.
  const int rows = 501;
  Eigen::MatrixXd A(rows, 1);
  Eigen::VectorXd b(rows);
  for (int i = 0; i < 500; ++i) {
    A(i, 0) = 1;
    b(i) = 10 + i;
  }
  A(500, 0) = -1;
  b(500) = -20;
  const auto lp = make_lp(A, b, Eigen::VectorXd::Constant(1, -1.0));
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::infeasible);
  ASSERT_EQ(r.certificate.size(), rows);
  EXPECT_NEAR((A.transpose() * r.certificate).norm(), 0.0, 1e-9);
  EXPECT_LT(b.dot(r.certificate), 0.0);
  EXPECT_GE(r.certificate.minCoeff(), 0.0);
}

}  // namespace
}  // namespace simgap
