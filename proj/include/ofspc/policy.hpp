#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ofspc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Bounded odd nonlinearity applied componentwise to innovations.
struct PsiSpec {
  enum class Kind { Sigmoid, Saturation };
  Kind kind = Kind::Sigmoid;
  double psi_max = 1.0;
};

/// Sigmoid: psi_max * (1 - e^{-z}) / (1 + e^{-z}); saturation: clip to
/// [-psi_max, psi_max]. Exactly odd; +-inf map to +-psi_max.
double psi_scalar(const PsiSpec& psi, double z);
VectorXd psi_apply(const PsiSpec& psi, const VectorXd& z);

/// Componentwise z * zeta / r inside [-r, r], +-zeta outside.
VectorXd sat_r_zeta(const VectorXd& z, double r, double zeta);

/// Affine saturated-innovation policy over a horizon of N stages:
///
///   u_{t+l} = eta_{t+l} + sum_{i=0}^{l} theta_{l,i} psi(y_{t+i} - C x_hat_{t+i}).
///
/// Only the lower-triangular gain blocks (0 <= i <= l <= N-1) are stored.
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(int N, int m, int q);

  int horizon() const { return N_; }
  int input_dim() const { return m_; }
  int output_dim() const { return q_; }

  VectorXd& eta() { return eta_; }
  const VectorXd& eta() const { return eta_; }

  MatrixXd& theta(int stage, int offset) { return blocks_[block_index(stage, offset)]; }
  const MatrixXd& theta(int stage, int offset) const { return blocks_[block_index(stage, offset)]; }

  static int block_count(int N) { return N * (N + 1) / 2; }
  static int block_index(int stage, int offset) { return stage * (stage + 1) / 2 + offset; }

  /// Dense Nm x q(N+1) gain; blocks above the diagonal and the last block column are zero.
  MatrixXd assemble_theta() const;

 private:
  int N_ = 0, m_ = 0, q_ = 0;
  VectorXd eta_;
  std::vector<MatrixXd> blocks_;
};

/// Control of stage `stage` from the raw innovations observed at offsets
/// 0..stage. Throws CausalityError if fewer than stage + 1 are supplied;
/// later ones are ignored.
VectorXd eval_policy(const PolicyParams& p, std::span<const VectorXd> innovations, const PsiSpec& psi, int stage);

/// Per input row: u_max - |eta_i| - psi_max * ||Theta_(i,:)||_1.
VectorXd hard_bound_margin(const PolicyParams& p, double psi_max, double u_max);

}  // namespace ofspc
