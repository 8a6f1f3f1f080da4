#pragma once

// Small dense linear-algebra helpers shared by the modules.

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace ofspc::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Numerical rank with cutoff rel_tol * sigma_1. Zero matrices have rank 0.
int numerical_rank(const MatrixXd& M, double rel_tol = 1e-8);
int numerical_rank(const Eigen::MatrixXcd& M, double rel_tol = 1e-8);

/// Smallest singular value divided by the largest (0 for empty or zero input).
double relative_min_singular_value(const Eigen::MatrixXcd& M);

/// Moore-Penrose pseudo-inverse via SVD, singular values below
/// rel_cutoff * sigma_1 are treated as zero.
MatrixXd pseudo_inverse(const MatrixXd& M, double rel_cutoff = 1e-10);

double largest_singular_value(const MatrixXd& M);

/// Symmetric square root factor L with L * L^T = S for a PSD matrix S.
/// Negative round-off eigenvalues are clipped to zero.
MatrixXd psd_factor(const MatrixXd& S);

inline MatrixXd symmetrized(const MatrixXd& S) { return 0.5 * (S + S.transpose()); }

double min_eigenvalue(const MatrixXd& S);
double max_eigenvalue(const MatrixXd& S);

inline double max_abs(const MatrixXd& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

MatrixXd matrix_power(const MatrixXd& A, int k);

/// Orthonormal basis of the (complex) null space, cutoff rel_tol * sigma_1.
Eigen::MatrixXcd null_space(const Eigen::MatrixXcd& M, double rel_tol = 1e-8);
MatrixXd null_space(const MatrixXd& M, double rel_tol = 1e-8);

/// sigma_max / sigma_min, +inf when singular.
double condition_number(const MatrixXd& M);

/// Eigenvalues grouped by proximity; `count` is the algebraic multiplicity.
struct EigenCluster {
  std::complex<double> value;
  int count = 0;
};
std::vector<EigenCluster> cluster_eigenvalues(const Eigen::VectorXcd& eigenvalues, double tol = 1e-6);

}  // namespace ofspc::linalg
