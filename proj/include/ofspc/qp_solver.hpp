#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace ofspc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// minimize 1/2 z^T P z + q^T z  subject to  l <= A z <= u.
/// Infinite bounds are allowed.
struct QpProblem {
  MatrixXd P;
  VectorXd q;
  MatrixXd A;
  VectorXd l;
  VectorXd u;

  int num_variables() const { return static_cast<int>(q.size()); }
  int num_constraints() const { return static_cast<int>(A.rows()); }
  double objective(const VectorXd& z) const { return 0.5 * z.dot(P * z) + q.dot(z); }
};

struct QpSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;  ///< over-relaxation, in [1, 1.8]
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  double eps_primal_infeasible = 1e-5;
  double eps_dual_infeasible = 1e-5;
  int max_iter = 20000;
  int check_interval = 5;       ///< iterations between termination checks
  int infeasible_streak = 25;   ///< consecutive certificate iterations before declaring infeasibility
  int scaling_iterations = 10;  ///< Ruiz equilibration passes; 0 disables
  bool polish = true;
  double polish_delta = 1e-9;
  int polish_refine = 4;
};

enum class QpStatus { Solved, MaxIterations, PrimalInfeasible, DualInfeasible };

std::string to_string(QpStatus status);

struct QpSolution {
  VectorXd z;
  VectorXd dual;  ///< positive on active upper bounds, negative on active lower bounds
  QpStatus status = QpStatus::MaxIterations;
  double primal_res = 0.0;
  double dual_res = 0.0;
  int iterations = 0;
  bool polished = false;
  double objective = 0.0;
};

struct KktResiduals {
  double primal = 0.0;           ///< max violation of l <= A z <= u
  double dual = 0.0;             ///< ||P z + q + A^T dual||_inf
  double complementarity = 0.0;  ///< max |dual_i| times the gap to the bound its sign selects
};

KktResiduals kkt_residuals(const QpProblem& p, const VectorXd& z, const VectorXd& dual);

/// Throws InputError on inconsistent dimensions, l > u, asymmetric P or
/// P with an eigenvalue below -1e-7; NumericalError if the ADMM system
/// cannot be factorized. An optional warm start seeds the primal (and dual)
/// iterates.
QpSolution solve(const QpProblem& p, const QpSettings& settings = {},
                 const std::optional<VectorXd>& warm_z = std::nullopt,
                 const std::optional<VectorXd>& warm_dual = std::nullopt);

}  // namespace ofspc
