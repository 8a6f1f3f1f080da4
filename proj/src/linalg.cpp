#include "ofspc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ofspc::linalg {

namespace {

template <typename Svd>
int rank_from_singular_values(const Svd& svd, double rel_tol) {
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cutoff = rel_tol * s(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++rank;
  return rank;
}

}  // namespace

int numerical_rank(const MatrixXd& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  return rank_from_singular_values(svd, rel_tol);
}

int numerical_rank(const Eigen::MatrixXcd& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  return rank_from_singular_values(svd, rel_tol);
}

double relative_min_singular_value(const Eigen::MatrixXcd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

MatrixXd pseudo_inverse(const MatrixXd& M, double rel_cutoff) {
  if (M.size() == 0) return MatrixXd::Zero(M.cols(), M.rows());
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? rel_cutoff * s(0) : 0.0;
  VectorXd inv = VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

double largest_singular_value(const MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  return svd.singularValues()(0);
}

MatrixXd psd_factor(const MatrixXd& S) {
  if (S.size() == 0) return S;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(S));
  VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

double min_eigenvalue(const MatrixXd& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const MatrixXd& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

MatrixXd matrix_power(const MatrixXd& A, int k) {
  MatrixXd result = MatrixXd::Identity(A.rows(), A.cols());
  for (int i = 0; i < k; ++i) result = A * result;
  return result;
}

Eigen::MatrixXcd null_space(const Eigen::MatrixXcd& M, double rel_tol) {
  const Eigen::Index n = M.cols();
  if (M.rows() == 0) return Eigen::MatrixXcd::Identity(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeFullV);
  const int rank = rank_from_singular_values(svd, rel_tol);
  return svd.matrixV().rightCols(n - rank);
}

MatrixXd null_space(const MatrixXd& M, double rel_tol) {
  const Eigen::Index n = M.cols();
  if (M.rows() == 0) return MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullV);
  const int rank = rank_from_singular_values(svd, rel_tol);
  return svd.matrixV().rightCols(n - rank);
}

double condition_number(const MatrixXd& M) {
  if (M.size() == 0) return 1.0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

std::vector<EigenCluster> cluster_eigenvalues(const Eigen::VectorXcd& eigenvalues, double tol) {
  std::vector<EigenCluster> clusters;
  std::vector<std::complex<double>> sums;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const std::complex<double> lambda = eigenvalues(i);
    bool merged = false;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (std::abs(clusters[c].value - lambda) <= tol) {
        sums[c] += lambda;
        ++clusters[c].count;
        clusters[c].value = sums[c] / static_cast<double>(clusters[c].count);
        merged = true;
        break;
      }
    }
    if (!merged) {
      clusters.push_back({lambda, 1});
      sums.push_back(lambda);
    }
  }
  return clusters;
}

}  // namespace ofspc::linalg
