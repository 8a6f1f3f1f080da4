#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ofspc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Discrete-time LTI plant with Gaussian noise, quadratic cost and an
/// infinity-norm input bound:
///
///   x_{t+1} = A x_t + B u_t + w_t,   y_t = C x_t + v_t,   ||u_t||_inf <= u_max.
struct SystemSpec {
  MatrixXd A;         ///< d x d
  MatrixXd B;         ///< d x m
  MatrixXd C;         ///< q x d
  MatrixXd Sigma_x0;  ///< prior covariance of x_0, PSD
  MatrixXd Sigma_w;   ///< process noise covariance, PD
  MatrixXd Sigma_v;   ///< measurement noise covariance, PD
  std::vector<MatrixXd> Q;  ///< stage state weights Q_0..Q_{N-1}
  MatrixXd Q_N;             ///< terminal state weight
  std::vector<MatrixXd> R;  ///< stage input weights R_0..R_{N-1}
  int N = 1;                ///< prediction horizon
  double u_max = 1.0;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  int output_dim() const { return static_cast<int>(C.rows()); }
};

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double margin = 0.0;  ///< signed distance to the failure threshold
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool all_passed() const;
  /// Names of the failed checks, in report order.
  std::vector<std::string> failures() const;
};

/// Throws ConfigError naming the first matrix with inconsistent dimensions.
void check_dimensions(const SystemSpec& spec);

/// Runs the standing-assumption checks (stabilizability/observability,
/// noise definiteness, Lyapunov stability, noise controllability) plus PSD
/// checks on the cost weights.
ValidationReport validate(const SystemSpec& spec);

/// Throws ValidationError listing the failures when validate() reports any.
void require_valid(const SystemSpec& spec);

/// Horizon matrices. State stack holds N+1 blocks x_t..x_{t+N}; input and
/// noise stacks hold N blocks.
struct StackedMatrices {
  MatrixXd free_response;    ///< (N+1)d x d, blocks A^i
  MatrixXd input_response;   ///< (N+1)d x Nm, block (i,j) = A^{i-1-j} B for i > j
  MatrixXd output_map;       ///< (N+1)q x (N+1)d, block-diagonal C
  MatrixXd noise_response;   ///< (N+1)d x Nd, block (i,j) = A^{i-1-j} for i > j
  MatrixXd state_cost;       ///< blkdiag(Q_0..Q_{N-1}, Q_N)
  MatrixXd input_cost;       ///< blkdiag(R_0..R_{N-1})
  MatrixXd control_hessian;  ///< input_response^T state_cost input_response + input_cost
};

StackedMatrices build_stacked(const SystemSpec& spec);

/// [A^{k-1} B, A^{k-2} B, ..., B].
MatrixXd reachability_matrix(const MatrixXd& A, const MatrixXd& B, int k);

}  // namespace ofspc
