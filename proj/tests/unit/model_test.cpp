#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ofspc/errors.hpp"
#include "ofspc/linalg.hpp"
#include "ofspc/model.hpp"

namespace ofspc {
namespace {

using testing::example_spec;

TEST(ModelTest, ExampleSystemPassesValidation) {
  const auto report = validate(example_spec());
  EXPECT_TRUE(report.all_passed());
  EXPECT_TRUE(report.failures().empty());
  EXPECT_NO_THROW(require_valid(example_spec()));
}

TEST(ModelTest, StackedPredictionMatchesRecursion) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    SystemSpec s = example_spec();
    s.A = testing::random_matrix(rng, 4, 4) * 0.5;
    s.B = testing::random_matrix(rng, 4, 2);
    s.N = 1 + trial % 6;
    s.Q.assign(s.N, MatrixXd::Identity(4, 4));
    s.R.assign(s.N, MatrixXd::Identity(2, 2));
    const auto st = build_stacked(s);

    const VectorXd x0 = testing::random_vector(rng, 4);
    std::vector<VectorXd> u, w;
    VectorXd U(2 * s.N), Wv(4 * s.N);
    for (int k = 0; k < s.N; ++k) {
      u.push_back(testing::random_vector(rng, 2));
      w.push_back(testing::random_vector(rng, 4));
      U.segment(2 * k, 2) = u.back();
      Wv.segment(4 * k, 4) = w.back();
    }
    const VectorXd stacked = st.free_response * x0 + st.input_response * U + st.noise_response * Wv;
    const VectorXd direct = oracle::simulate_states(s.A, s.B, x0, u, w);
    EXPECT_LE((stacked - direct).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ModelTest, ControlHessianIsPositiveDefinite) {
  const auto st = build_stacked(example_spec());
  EXPECT_EQ(st.control_hessian.rows(), 5);
  EXPECT_GT(linalg::min_eigenvalue(st.control_hessian), 0.0);
  const MatrixXd expect = st.input_response.transpose() * st.state_cost * st.input_response + st.input_cost;
  EXPECT_LE((expect - st.control_hessian).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ModelTest, OutputMapIsBlockDiagonal) {
  SystemSpec s = example_spec();
  s.C = MatrixXd::Identity(2, 4);
  s.Sigma_v = MatrixXd::Identity(2, 2);
  const auto st = build_stacked(s);
  ASSERT_EQ(st.output_map.rows(), 2 * 6);
  ASSERT_EQ(st.output_map.cols(), 4 * 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const MatrixXd blk = st.output_map.block(2 * i, 4 * j, 2, 4);
      if (i == j)
        EXPECT_EQ(blk, s.C);
      else
        EXPECT_EQ(blk.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(ModelTest, ReachabilityMatrixRecursion) {
  std::mt19937_64 rng(5);
  const MatrixXd A = testing::random_matrix(rng, 3, 3);
  const MatrixXd B = testing::random_matrix(rng, 3, 2);
  EXPECT_EQ(reachability_matrix(A, B, 1), B);
  for (int k = 2; k <= 5; ++k) {
    const MatrixXd R = reachability_matrix(A, B, k);
    ASSERT_EQ(R.cols(), 2 * k);
    MatrixXd expect(3, 2 * k);
    expect << A * reachability_matrix(A, B, k - 1), B;
    EXPECT_LE((R - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ModelTest, JordanBlockFailsLyapunovCheck) {
  SystemSpec s = testing::scalar_spec(1.0, 1.0, 1.0, 1.0, 1.0);
  s.A = MatrixXd{{1.0, 1.0}, {0.0, 1.0}};
  s.B = MatrixXd{{0.0}, {1.0}};
  s.C = MatrixXd::Identity(2, 2);
  s.Sigma_x0 = s.Sigma_w = s.Sigma_v = MatrixXd::Identity(2, 2);
  s.Q.assign(1, MatrixXd::Identity(2, 2));
  s.Q_N = MatrixXd::Identity(2, 2);
  const auto report = validate(s);
  EXPECT_FALSE(report.all_passed());
  EXPECT_THROW(require_valid(s), ValidationError);
}

TEST(ModelTest, UnstableModeFails) {
  SystemSpec s = testing::scalar_spec(1.2, 1.0, 1.0, 1.0, 1.0);
  EXPECT_FALSE(validate(s).all_passed());
}

TEST(ModelTest, SingularProcessNoiseFails) {
  SystemSpec s = example_spec();
  s.Sigma_w(0, 0) = 0.0;
  EXPECT_FALSE(validate(s).all_passed());
}

TEST(ModelTest, DimensionMismatchThrows) {
  SystemSpec s = example_spec();
  s.B = MatrixXd::Zero(3, 1);
  EXPECT_THROW(check_dimensions(s), ConfigError);
  s = example_spec();
  s.Q.pop_back();
  EXPECT_THROW(check_dimensions(s), ConfigError);
}

}  // namespace
}  // namespace ofspc
