#include "ofspc/decomp.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <vector>

#include "ofspc/errors.hpp"
#include "ofspc/linalg.hpp"

namespace ofspc {

namespace {

constexpr double kUnitCircleTol = 1e-8;
constexpr double kRankTol = 1e-8;
constexpr double kMaxCondition = 1e10;

using cd = std::complex<double>;

/// Flips the sign of each column so its largest-magnitude entry is positive.
void canonical_signs(MatrixXd& V) {
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    Eigen::Index k;
    V.col(j).cwiseAbs().maxCoeff(&k);
    if (V(k, j) < 0) V.col(j) *= -1.0;
  }
}

/// Real 2-column basis [a, b] of the invariant plane of the eigenvector v
/// (eigenvalue e^{i theta}, theta in (0, pi)) in which A acts as the
/// rotation [[cos, -sin], [sin, cos]]. The free complex scale of v is fixed
/// so that the first column is the normalized projection of the coordinate
/// axis closest to the plane.
Eigen::Matrix<double, Eigen::Dynamic, 2> rotation_basis(const Eigen::VectorXcd& v) {
  const Eigen::Index d = v.size();
  Eigen::Matrix<double, Eigen::Dynamic, 2> basis(d, 2);
  basis.col(0) = v.real();
  basis.col(1) = -v.imag();
  const auto qr = basis.colPivHouseholderQr();

  double best_norm = -1.0;
  Eigen::Vector2d best_coef = Eigen::Vector2d::Zero();
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::Vector2d coef = qr.solve(VectorXd::Unit(d, k));
    const double norm = (basis * coef).norm();
    if (norm > best_norm + 1e-12) {
      best_norm = norm;
      best_coef = coef;
    }
  }
  // Re(c v) = c_r a - c_i b with c = c_r + i c_i.
  const Eigen::Vector2d coef = best_coef / best_norm;
  const cd c(coef(0), coef(1));
  const Eigen::VectorXcd w = c * v;
  Eigen::Matrix<double, Eigen::Dynamic, 2> result(d, 2);
  result.col(0) = w.real();
  result.col(1) = -w.imag();
  return result;
}

struct OrthogonalBlock {
  int size;      // 1 or 2
  double value;  // +-1 for size 1, rotation angle for size 2
};

MatrixXd assemble_orthogonal(const std::vector<OrthogonalBlock>& blocks, int d_o) {
  MatrixXd A_o = MatrixXd::Zero(d_o, d_o);
  int offset = 0;
  for (const auto& b : blocks) {
    if (b.size == 1) {
      A_o(offset, offset) = b.value;
    } else {
      const double c = std::cos(b.value), s = std::sin(b.value);
      A_o.block(offset, offset, 2, 2) << c, -s, s, c;
    }
    offset += b.size;
  }
  return A_o;
}

double spectral_radius(const MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

int reachability_index(const MatrixXd& A_o, const MatrixXd& B_o) {
  const int d_o = static_cast<int>(A_o.rows());
  if (d_o == 0) return 0;
  for (int k = 1; k <= d_o; ++k)
    if (linalg::numerical_rank(reachability_matrix(A_o, B_o, k), kRankTol) == d_o) return k;
  throw UnreachableError("orthogonal part of the system is not reachable from the input");
}

double zeta_bound(const Decomposition& dec, double u_max) {
  if (dec.d_o == 0) throw NotApplicableError("zeta bound undefined: empty orthogonal part");
  return u_max / (std::sqrt(static_cast<double>(dec.d_o)) * linalg::largest_singular_value(dec.R_kappa_pinv));
}

Decomposition decompose(const SystemSpec& spec) {
  check_dimensions(spec);
  const MatrixXd& A = spec.A;
  const Eigen::Index d = A.rows();
  Eigen::EigenSolver<MatrixXd> es(A, false);
  const Eigen::VectorXcd eigenvalues = es.eigenvalues();
  if (eigenvalues.cwiseAbs().maxCoeff() > 1.0 + kUnitCircleTol)
    throw DecompositionError("A has an eigenvalue outside the unit disk");

  std::vector<VectorXd> columns;
  std::vector<OrthogonalBlock> blocks;
  std::vector<VectorXd> left_rows;  // annihilators of the Schur-stable subspace

  for (const auto& cluster : linalg::cluster_eigenvalues(eigenvalues)) {
    if (std::abs(cluster.value) < 1.0 - kUnitCircleTol) continue;
    const bool is_real = std::abs(cluster.value.imag()) <= 1e-9;
    if (!is_real && cluster.value.imag() < 0) continue;  // handled with its conjugate

    if (is_real) {
      const double lambda = cluster.value.real();
      MatrixXd shifted = A;
      shifted.diagonal().array() -= lambda;
      MatrixXd right = linalg::null_space(shifted, kRankTol);
      const MatrixXd left = linalg::null_space(MatrixXd(shifted.transpose()), kRankTol);
      if (right.cols() != cluster.count || left.cols() != cluster.count)
        throw DecompositionError("unit-circle eigenvalue " + std::to_string(lambda) + " is defective");
      canonical_signs(right);
      for (Eigen::Index j = 0; j < right.cols(); ++j) {
        columns.push_back(right.col(j));
        blocks.push_back({1, lambda > 0 ? 1.0 : -1.0});
        left_rows.push_back(left.col(j));
      }
    } else {
      const cd lambda = cluster.value;
      Eigen::MatrixXcd shifted = A.cast<cd>();
      shifted.diagonal().array() -= lambda;
      const Eigen::MatrixXcd right = linalg::null_space(shifted, kRankTol);
      const Eigen::MatrixXcd left = linalg::null_space(Eigen::MatrixXcd(shifted.transpose()), kRankTol);
      if (right.cols() != cluster.count || left.cols() != cluster.count)
        throw DecompositionError("unit-circle eigenvalue pair is defective");
      const double theta = std::arg(lambda);
      for (Eigen::Index j = 0; j < right.cols(); ++j) {
        const auto plane = rotation_basis(right.col(j));
        columns.push_back(plane.col(0));
        columns.push_back(plane.col(1));
        blocks.push_back({2, theta});
        left_rows.push_back(left.col(j).real());
        left_rows.push_back(left.col(j).imag());
      }
    }
  }

  Decomposition dec;
  dec.d_o = static_cast<int>(columns.size());
  dec.d_s = static_cast<int>(d) - dec.d_o;

  MatrixXd V(d, d);
  for (int j = 0; j < dec.d_o; ++j) V.col(j) = columns[j];
  if (dec.d_s > 0) {
    MatrixXd stable_basis;
    if (dec.d_o == 0) {
      stable_basis = MatrixXd::Identity(d, d);
    } else {
      MatrixXd constraints(left_rows.size(), d);
      for (std::size_t i = 0; i < left_rows.size(); ++i) constraints.row(i) = left_rows[i].transpose();
      stable_basis = linalg::null_space(constraints, kRankTol);
      if (stable_basis.cols() != dec.d_s)
        throw DecompositionError("could not isolate the Schur-stable invariant subspace");
    }
    V.rightCols(dec.d_s) = stable_basis;
  }

  dec.condition = linalg::condition_number(V);
  if (!(dec.condition <= kMaxCondition)) {
    std::ostringstream os;
    os << "change of basis is ill-conditioned (condition number " << dec.condition << ")";
    throw ConditioningError(os.str());
  }
  dec.T_inv = V;
  dec.T = V.fullPivLu().inverse();

  const MatrixXd similar = dec.T * A * dec.T_inv;
  const double scale = 1.0 + linalg::max_abs(A);
  dec.A_o = assemble_orthogonal(blocks, dec.d_o);
  dec.A_s = similar.bottomRightCorner(dec.d_s, dec.d_s);
  const double block_err = std::max(linalg::max_abs(similar.topLeftCorner(dec.d_o, dec.d_o) - dec.A_o),
                                    std::max(linalg::max_abs(similar.topRightCorner(dec.d_o, dec.d_s)),
                                             linalg::max_abs(similar.bottomLeftCorner(dec.d_s, dec.d_o))));
  if (block_err > 1e-8 * scale)
    throw DecompositionError("similarity transform does not block-diagonalize A (residual " +
                             std::to_string(block_err) + ")");
  if (spectral_radius(dec.A_s) > 1.0 - kUnitCircleTol)
    throw DecompositionError("Schur-stable block has spectral radius on the unit circle");

  const MatrixXd TB = dec.T * spec.B;
  dec.B_o = TB.topRows(dec.d_o);
  dec.B_s = TB.bottomRows(dec.d_s);

  if (dec.d_o == 0) {
    dec.kappa = 0;
    dec.R_kappa = MatrixXd(0, 0);
    dec.R_kappa_pinv = MatrixXd(0, 0);
    dec.zeta_max = std::numeric_limits<double>::infinity();
    return dec;
  }
  dec.kappa = reachability_index(dec.A_o, dec.B_o);
  dec.R_kappa = reachability_matrix(dec.A_o, dec.B_o, dec.kappa);
  dec.R_kappa_pinv = linalg::pseudo_inverse(dec.R_kappa, 1e-10);
  dec.zeta_max = zeta_bound(dec, spec.u_max);
  return dec;
}

}  // namespace ofspc
