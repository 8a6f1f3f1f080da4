#pragma once

#include "ofspc/decomp.hpp"
#include "ofspc/kalman.hpp"
#include "ofspc/moments.hpp"
#include "ofspc/policy.hpp"
#include "ofspc/qp_solver.hpp"

namespace ofspc {

struct Thresholds {
  double r = 1.0;
  double epsilon = 0.1;
  double zeta = 0.0;  ///< drift magnitude, strictly inside (0, zeta_max)
};

/// Layout of the QP decision vector:
///   [ eta (Nm) | theta entries | eta slacks (Nm) | theta slacks ].
/// Theta entries run over the stored blocks (stage l, offset i), 0 <= i <= l,
/// each block row-major.
class VariableMap {
 public:
  VariableMap() = default;
  VariableMap(int N, int m, int q);

  int size() const { return 2 * (eta_count() + theta_count()); }
  int eta_count() const { return N_ * m_; }
  int theta_count() const { return PolicyParams::block_count(N_) * m_ * q_; }

  int eta(int stage, int input) const { return stage * m_ + input; }
  int theta(int stage, int offset, int row, int col) const {
    return eta_count() + (PolicyParams::block_index(stage, offset) * m_ + row) * q_ + col;
  }
  /// Slack bounding the absolute value of variable k (k < eta_count() + theta_count()).
  int slack(int k) const { return eta_count() + theta_count() + k; }

  VectorXd pack(const PolicyParams& p) const;
  PolicyParams unpack(const VectorXd& z) const;

  int horizon() const { return N_; }

 private:
  int N_ = 0, m_ = 0, q_ = 0;
};

/// Everything the per-instant QP needs that does not depend on the current
/// estimate. Built once per (system, u_max).
struct OcpContext {
  SystemSpec spec;
  StackedMatrices stack;
  Decomposition dec;
  MomentSet moments;
  PsiSpec psi;
  Thresholds thresholds;
  double u_max = 0.0;
  VariableMap var_map;

  MatrixXd W;            ///< (A_o^kappa)^T R_kappa, d_o x kappa m
  MatrixXd H_future;     ///< quadratic form of the random-innovation gains over theta entries
  VectorXd g_future;     ///< linear term of the random-innovation gains over theta entries
  MatrixXd hard_rows;    ///< slack encoding of the input bound
  VectorXd hard_lower;
  VectorXd hard_upper;
  QpSettings qp;
};

/// Throws CacheError (Stale) when the moments were not estimated for
/// (spec, gains, psi), ParameterError when zeta is outside (0, zeta_max) or
/// kappa exceeds N.
OcpContext make_context(const SystemSpec& spec, const Decomposition& dec, const SteadyGains& gains,
                        const MomentSet& moments, const PsiSpec& psi, const Thresholds& thresholds,
                        const QpSettings& qp = {});

struct Objective {
  MatrixXd P;  ///< QP Hessian (twice the quadratic form)
  VectorXd q;
  double constant = 0.0;  ///< deterministic part x_hat^T A^T Q A x_hat; noise-only terms omitted

  double value(const VectorXd& z) const { return 0.5 * z.dot(P * z) + q.dot(z) + constant; }
};

Objective build_objective(const OcpContext& ctx, const VectorXd& x_hat, const VectorXd& psi0);

struct ConstraintRows {
  MatrixXd A;
  VectorXd l;
  VectorXd u;
  int stability_rows = 0;
};

ConstraintRows build_constraints(const OcpContext& ctx, const VectorXd& x_hat_o, const VectorXd& psi0);

/// eta_{1:kappa m} = -R_kappa^+ A_o^kappa sat_{r,zeta}(x_hat_o), everything else zero.
PolicyParams fallback_point(const OcpContext& ctx, const VectorXd& x_hat_o);
PolicyParams fallback_point(const OcpContext& ctx, const VectorXd& x_hat_o, double zeta);

struct OcpSolution {
  PolicyParams params;
  double objective_value = 0.0;
  QpStatus status = QpStatus::MaxIterations;
  bool fallback_used = false;
  double repair_weight = 0.0;  ///< blend toward a strictly feasible point applied after the solve
  int iterations = 0;
  int stability_rows = 0;
};

/// Worst violation of the hard bound and the active stability rows for
/// the given parameters (<= 0 when all hold).
double constraint_violation(const OcpContext& ctx, const PolicyParams& p, const VectorXd& x_hat_o,
                            const VectorXd& psi0);

/// Throws InternalContradiction if the solver reports primal infeasibility.
OcpSolution solve_ocp(const OcpContext& ctx, const VectorXd& x_hat, const VectorXd& y);

/// sigma_1(R_{N_r}(A_o, B_o)^+) (beta + epsilon'/2).
double prior_feasibility_threshold(const Decomposition& dec, double beta_hat, double epsilon_prime, int N_r);

}  // namespace ofspc
