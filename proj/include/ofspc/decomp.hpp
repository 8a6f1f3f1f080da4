#pragma once

#include "ofspc/model.hpp"

namespace ofspc {

/// Real change of basis splitting a Lyapunov-stable A into an orthogonal
/// block (unit-circle eigenvalues, normalized to +-1 and plane rotations)
/// and a Schur-stable block:
///
///   T A T^{-1} = blkdiag(A_o, A_s),   T B = [B_o; B_s].
struct Decomposition {
  MatrixXd T;
  MatrixXd T_inv;
  MatrixXd A_o;
  MatrixXd A_s;
  MatrixXd B_o;
  MatrixXd B_s;
  int d_o = 0;
  int d_s = 0;
  int kappa = 0;            ///< reachability index of (A_o, B_o); 0 when d_o == 0
  MatrixXd R_kappa;         ///< R_kappa(A_o, B_o), d_o x kappa m
  MatrixXd R_kappa_pinv;    ///< kappa m x d_o
  double zeta_max = 0.0;    ///< +inf when d_o == 0
  double condition = 1.0;   ///< condition number of T

  bool has_orthogonal_part() const { return d_o > 0; }
  /// Orthogonal coordinates of a full state vector.
  VectorXd orthogonal_coordinates(const VectorXd& x) const { return T.topRows(d_o) * x; }
};

/// Throws DecompositionError when A is not Lyapunov stable,
/// ConditioningError when cond(T) > 1e10, UnreachableError when (A_o, B_o)
/// is not reachable.
Decomposition decompose(const SystemSpec& spec);

/// Smallest k with rank R_k(A_o, B_o) == d_o.
int reachability_index(const MatrixXd& A_o, const MatrixXd& B_o);

/// u_max / (sqrt(d_o) * sigma_1(R_kappa^+)). Throws NotApplicableError when d_o == 0.
double zeta_bound(const Decomposition& dec, double u_max);

}  // namespace ofspc
