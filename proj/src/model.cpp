#include "ofspc/model.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include "ofspc/errors.hpp"
#include "ofspc/linalg.hpp"

namespace ofspc {

namespace {

constexpr double kRankTol = 1e-8;
constexpr double kUnitCircleTol = 1e-8;

void expect_shape(const MatrixXd& M, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (M.rows() != rows || M.cols() != cols) {
    std::ostringstream os;
    os << "matrix " << name << " has shape " << M.rows() << "x" << M.cols() << ", expected " << rows << "x"
       << cols;
    throw ConfigError(os.str());
  }
}

bool is_symmetric(const MatrixXd& S) {
  return linalg::max_abs(S - S.transpose()) <= 1e-9 * (1.0 + linalg::max_abs(S));
}

ValidationCheck definiteness_check(const std::string& name, const MatrixXd& S, bool strict) {
  ValidationCheck check{name, false, 0.0, {}};
  if (!is_symmetric(S)) {
    check.margin = -linalg::max_abs(S - S.transpose());
    check.detail = "not symmetric";
    return check;
  }
  const double lo = linalg::min_eigenvalue(S);
  const double hi = linalg::max_eigenvalue(S);
  const double threshold = strict ? 1e-12 * std::max(1.0, std::abs(hi)) : -1e-9 * (1.0 + std::abs(hi));
  check.margin = lo - threshold;
  check.passed = strict ? lo > threshold : lo >= threshold;
  std::ostringstream os;
  os << "min eigenvalue " << lo;
  check.detail = os.str();
  return check;
}

Eigen::MatrixXcd shifted(const MatrixXd& A, std::complex<double> lambda) {
  Eigen::MatrixXcd M = -A.cast<std::complex<double>>();
  M.diagonal().array() += lambda;
  return M;
}

/// PBH test over the given eigenvalues: rank [lambda I - A, E] == d (or the
/// stacked version when `stack_rows`).
ValidationCheck pbh_check(const std::string& name, const MatrixXd& A, const MatrixXd& E,
                          const Eigen::VectorXcd& eigenvalues, bool stack_rows, bool only_outside_disk) {
  const Eigen::Index d = A.rows();
  ValidationCheck check{name, true, 1.0, "no eigenvalue tested"};
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const std::complex<double> lambda = eigenvalues(i);
    if (only_outside_disk && std::abs(lambda) < 1.0 - kUnitCircleTol) continue;
    Eigen::MatrixXcd M;
    const Eigen::MatrixXcd S = shifted(A, lambda);
    const Eigen::MatrixXcd Ec = E.cast<std::complex<double>>();
    if (stack_rows) {
      M.resize(d + E.rows(), d);
      M << S, Ec;
    } else {
      M.resize(d, d + E.cols());
      M << S, Ec;
    }
    const double rel = linalg::relative_min_singular_value(M);
    const int rank = linalg::numerical_rank(M, kRankTol);
    const double margin = rel - kRankTol;
    if (margin < check.margin || check.detail == "no eigenvalue tested") {
      check.margin = margin;
      std::ostringstream os;
      os << "worst eigenvalue " << lambda.real() << (lambda.imag() >= 0 ? "+" : "") << lambda.imag()
         << "i, rank " << rank << "/" << d;
      check.detail = os.str();
    }
    if (rank < d) check.passed = false;
  }
  return check;
}

ValidationCheck lyapunov_check(const MatrixXd& A, const Eigen::VectorXcd& eigenvalues) {
  ValidationCheck check{"A3 A Lyapunov stable", true, 0.0, {}};
  const double radius = eigenvalues.size() ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  check.margin = 1.0 + kUnitCircleTol - radius;
  std::ostringstream os;
  os << "spectral radius " << radius;
  if (radius > 1.0 + kUnitCircleTol) {
    check.passed = false;
    os << " exceeds 1";
  }
  const Eigen::Index d = A.rows();
  for (const auto& cluster : linalg::cluster_eigenvalues(eigenvalues)) {
    if (std::abs(std::abs(cluster.value) - 1.0) > kUnitCircleTol) continue;
    const int geometric = static_cast<int>(d) - linalg::numerical_rank(shifted(A, cluster.value), kRankTol);
    if (geometric < cluster.count) {
      check.passed = false;
      check.margin = std::min(check.margin, static_cast<double>(geometric - cluster.count));
      os << "; unit-circle eigenvalue " << cluster.value.real() << (cluster.value.imag() >= 0 ? "+" : "")
         << cluster.value.imag() << "i has algebraic multiplicity " << cluster.count << " but geometric "
         << geometric;
    }
  }
  check.detail = os.str();
  return check;
}

}  // namespace

bool ValidationReport::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

std::vector<std::string> ValidationReport::failures() const {
  std::vector<std::string> names;
  for (const auto& c : checks)
    if (!c.passed) names.push_back(c.name);
  return names;
}

void check_dimensions(const SystemSpec& spec) {
  const Eigen::Index d = spec.A.rows();
  if (d == 0) throw ConfigError("matrix A is empty");
  expect_shape(spec.A, d, d, "A");
  if (spec.B.rows() != d || spec.B.cols() == 0) expect_shape(spec.B, d, std::max<Eigen::Index>(1, spec.B.cols()), "B");
  const Eigen::Index m = spec.B.cols();
  if (spec.C.cols() != d || spec.C.rows() == 0) expect_shape(spec.C, std::max<Eigen::Index>(1, spec.C.rows()), d, "C");
  const Eigen::Index q = spec.C.rows();
  expect_shape(spec.Sigma_x0, d, d, "Sigma_x0");
  expect_shape(spec.Sigma_w, d, d, "Sigma_w");
  expect_shape(spec.Sigma_v, q, q, "Sigma_v");
  if (spec.N < 1) throw ConfigError("horizon N must be at least 1");
  if (static_cast<int>(spec.Q.size()) != spec.N)
    throw ConfigError("matrix Q: expected " + std::to_string(spec.N) + " stage weights");
  if (static_cast<int>(spec.R.size()) != spec.N)
    throw ConfigError("matrix R: expected " + std::to_string(spec.N) + " stage weights");
  for (int k = 0; k < spec.N; ++k) {
    expect_shape(spec.Q[k], d, d, "Q[" + std::to_string(k) + "]");
    expect_shape(spec.R[k], m, m, "R[" + std::to_string(k) + "]");
  }
  expect_shape(spec.Q_N, d, d, "Q_N");
  if (!(spec.u_max > 0.0) || !std::isfinite(spec.u_max)) throw ConfigError("u_max must be positive and finite");
}

ValidationReport validate(const SystemSpec& spec) {
  check_dimensions(spec);
  ValidationReport report;
  Eigen::EigenSolver<MatrixXd> es(spec.A, false);
  const Eigen::VectorXcd eigenvalues = es.eigenvalues();

  report.checks.push_back(pbh_check("A1 (A,B) stabilizable", spec.A, spec.B, eigenvalues, false, true));
  report.checks.push_back(pbh_check("A1 (A,C) observable", spec.A, spec.C, eigenvalues, true, false));
  report.checks.push_back(definiteness_check("A2 Sigma_x0 positive semidefinite", spec.Sigma_x0, false));
  report.checks.push_back(definiteness_check("A2 Sigma_w positive definite", spec.Sigma_w, true));
  report.checks.push_back(definiteness_check("A2 Sigma_v positive definite", spec.Sigma_v, true));
  report.checks.push_back(lyapunov_check(spec.A, eigenvalues));
  report.checks.push_back(pbh_check("A4 (A, Sigma_w^1/2) controllable", spec.A,
                                    linalg::psd_factor(spec.Sigma_w), eigenvalues, false, false));
  for (int k = 0; k < spec.N; ++k) {
    report.checks.push_back(definiteness_check("Q[" + std::to_string(k) + "] positive semidefinite", spec.Q[k], false));
    report.checks.push_back(definiteness_check("R[" + std::to_string(k) + "] positive semidefinite", spec.R[k], false));
  }
  report.checks.push_back(definiteness_check("Q_N positive semidefinite", spec.Q_N, false));
  return report;
}

void require_valid(const SystemSpec& spec) {
  const ValidationReport report = validate(spec);
  if (report.all_passed()) return;
  std::string msg = "system fails standing assumptions:";
  for (const auto& name : report.failures()) msg += " [" + name + "]";
  throw ValidationError(msg);
}

StackedMatrices build_stacked(const SystemSpec& spec) {
  check_dimensions(spec);
  const int d = spec.state_dim(), m = spec.input_dim(), q = spec.output_dim(), N = spec.N;
  StackedMatrices s;
  s.free_response.resize((N + 1) * d, d);
  s.input_response = MatrixXd::Zero((N + 1) * d, N * m);
  s.noise_response = MatrixXd::Zero((N + 1) * d, N * d);
  s.output_map = MatrixXd::Zero((N + 1) * q, (N + 1) * d);
  s.state_cost = MatrixXd::Zero((N + 1) * d, (N + 1) * d);
  s.input_cost = MatrixXd::Zero(N * m, N * m);

  std::vector<MatrixXd> powers(N + 1);
  powers[0] = MatrixXd::Identity(d, d);
  for (int i = 1; i <= N; ++i) powers[i] = spec.A * powers[i - 1];

  for (int i = 0; i <= N; ++i) {
    s.free_response.middleRows(i * d, d) = powers[i];
    for (int j = 0; j < i; ++j) {
      s.input_response.block(i * d, j * m, d, m) = powers[i - 1 - j] * spec.B;
      s.noise_response.block(i * d, j * d, d, d) = powers[i - 1 - j];
    }
    s.output_map.block(i * q, i * d, q, d) = spec.C;
    s.state_cost.block(i * d, i * d, d, d) = i < N ? spec.Q[i] : spec.Q_N;
  }
  for (int k = 0; k < N; ++k) s.input_cost.block(k * m, k * m, m, m) = spec.R[k];
  s.control_hessian = linalg::symmetrized(s.input_response.transpose() * s.state_cost * s.input_response +
                                          s.input_cost);
  return s;
}

MatrixXd reachability_matrix(const MatrixXd& A, const MatrixXd& B, int k) {
  if (k < 1) throw ParameterError("reachability_matrix: k must be at least 1");
  const Eigen::Index n = A.rows(), p = B.cols();
  MatrixXd R(n, k * p);
  MatrixXd block = B;
  // Filled right to left: column block k-1 is B, block k-2 is AB, ...
  for (int i = k - 1; i >= 0; --i) {
    R.middleCols(i * p, p) = block;
    block = A * block;
  }
  return R;
}

}  // namespace ofspc
