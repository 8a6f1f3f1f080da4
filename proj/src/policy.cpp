#include "ofspc/policy.hpp"

#include <cmath>

#include "ofspc/errors.hpp"

namespace ofspc {

double psi_scalar(const PsiSpec& psi, double z) {
  const double magnitude = std::abs(z);
  double value;
  if (psi.kind == PsiSpec::Kind::Sigmoid) {
    // (1 - e^{-z}) / (1 + e^{-z}) == tanh(z / 2); evaluated on |z| for exact oddness.
    value = psi.psi_max * std::tanh(0.5 * magnitude);
  } else {
    value = std::min(magnitude, psi.psi_max);
  }
  return std::copysign(value, z);
}

VectorXd psi_apply(const PsiSpec& psi, const VectorXd& z) {
  VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out(i) = psi_scalar(psi, z(i));
  return out;
}

VectorXd sat_r_zeta(const VectorXd& z, double r, double zeta) {
  if (!(r > 0.0)) throw ParameterError("sat_r_zeta: r must be positive");
  if (!(zeta > 0.0)) throw ParameterError("sat_r_zeta: zeta must be positive");
  VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (std::abs(z(i)) <= r)
      out(i) = z(i) * zeta / r;
    else
      out(i) = z(i) > 0 ? zeta : -zeta;
  }
  return out;
}

PolicyParams::PolicyParams(int N, int m, int q)
    : N_(N), m_(m), q_(q), eta_(VectorXd::Zero(N * m)), blocks_(block_count(N), MatrixXd::Zero(m, q)) {}

MatrixXd PolicyParams::assemble_theta() const {
  MatrixXd Theta = MatrixXd::Zero(N_ * m_, (N_ + 1) * q_);
  for (int l = 0; l < N_; ++l)
    for (int i = 0; i <= l; ++i) Theta.block(l * m_, i * q_, m_, q_) = theta(l, i);
  return Theta;
}

VectorXd eval_policy(const PolicyParams& p, std::span<const VectorXd> innovations, const PsiSpec& psi, int stage) {
  if (stage < 0 || stage >= p.horizon()) throw ParameterError("eval_policy: stage out of range");
  if (static_cast<int>(innovations.size()) < stage + 1)
    throw CausalityError("eval_policy: innovation for offset " + std::to_string(innovations.size()) +
                         " not yet observed");
  const int m = p.input_dim();
  VectorXd u = p.eta().segment(stage * m, m);
  for (int i = 0; i <= stage; ++i) u += p.theta(stage, i) * psi_apply(psi, innovations[i]);
  return u;
}

VectorXd hard_bound_margin(const PolicyParams& p, double psi_max, double u_max) {
  const int m = p.input_dim();
  VectorXd margin(p.horizon() * m);
  for (int l = 0; l < p.horizon(); ++l) {
    for (int a = 0; a < m; ++a) {
      double row_l1 = 0.0;
      for (int i = 0; i <= l; ++i) row_l1 += p.theta(l, i).row(a).cwiseAbs().sum();
      margin(l * m + a) = u_max - std::abs(p.eta()(l * m + a)) - row_l1 * psi_max;
    }
  }
  return margin;
}

}  // namespace ofspc
