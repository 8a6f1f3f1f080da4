#include "ofspc/kalman.hpp"

#include <vector>

#include "ofspc/errors.hpp"
#include "ofspc/linalg.hpp"

namespace ofspc {

namespace {

void require_finite(const MatrixXd& M, const char* what) {
  if (!M.allFinite()) throw NumericalError(std::string("non-finite ") + what);
}

/// Solves X S = Y for symmetric PD S. Throws NumericalError when S is singular.
MatrixXd right_solve_spd(const MatrixXd& Y, const MatrixXd& S) {
  Eigen::LLT<MatrixXd> llt(linalg::symmetrized(S));
  if (llt.info() != Eigen::Success) throw NumericalError("innovation covariance is not positive definite");
  return llt.solve(Y.transpose()).transpose();
}

MatrixXd joseph_update(const MatrixXd& M, const MatrixXd& K, const SystemSpec& spec) {
  const Eigen::Index d = spec.state_dim();
  const MatrixXd Gamma = MatrixXd::Identity(d, d) - K * spec.C;
  return linalg::symmetrized(Gamma * M * Gamma.transpose() + K * spec.Sigma_v * K.transpose());
}

}  // namespace

MatrixXd kalman_gain(const SystemSpec& spec, const MatrixXd& P) {
  const MatrixXd M = spec.A * P * spec.A.transpose() + spec.Sigma_w;
  return right_solve_spd(M * spec.C.transpose(), spec.C * M * spec.C.transpose() + spec.Sigma_v);
}

FilterState init_filter(const SystemSpec& spec, const VectorXd& y0) {
  require_finite(y0, "initial measurement");
  const Eigen::Index d = spec.state_dim();
  const MatrixXd& S0 = spec.Sigma_x0;
  const MatrixXd K0 = right_solve_spd(S0 * spec.C.transpose(), spec.C * S0 * spec.C.transpose() + spec.Sigma_v);
  FilterState state;
  state.x_hat = K0 * y0;
  state.P = linalg::symmetrized((MatrixXd::Identity(d, d) - K0 * spec.C) * S0);
  state.t = 0;
  return state;
}

FilterState step(const FilterState& state, const VectorXd& u, const VectorXd& y_next, const SystemSpec& spec) {
  require_finite(u, "control input");
  require_finite(y_next, "measurement");
  require_finite(state.x_hat, "state estimate");
  const MatrixXd M = spec.A * state.P * spec.A.transpose() + spec.Sigma_w;
  const MatrixXd K = right_solve_spd(M * spec.C.transpose(), spec.C * M * spec.C.transpose() + spec.Sigma_v);
  const VectorXd x_pred = spec.A * state.x_hat + spec.B * u;
  FilterState next;
  next.x_hat = x_pred + K * (y_next - spec.C * x_pred);
  next.P = joseph_update(M, K, spec);
  next.t = state.t + 1;
  return next;
}

SteadyGains steady_state(const SystemSpec& spec, const SteadyStateOptions& options) {
  return steady_state(spec, spec.Sigma_x0, options);
}

SteadyGains steady_state(const SystemSpec& spec, const MatrixXd& P_start, const SteadyStateOptions& options) {
  const Eigen::Index d = spec.state_dim();
  MatrixXd P = linalg::symmetrized(P_start);
  double change = 0.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const MatrixXd M = spec.A * P * spec.A.transpose() + spec.Sigma_w;
    const MatrixXd K = right_solve_spd(M * spec.C.transpose(), spec.C * M * spec.C.transpose() + spec.Sigma_v);
    const MatrixXd next = joseph_update(M, K, spec);
    change = linalg::max_abs(next - P);
    P = next;
    if (!P.allFinite()) break;
    if (change < options.tolerance) {
      SteadyGains g;
      g.P = P;
      g.K = kalman_gain(spec, P);
      g.Gamma = MatrixXd::Identity(d, d) - g.K * spec.C;
      g.Phi = g.Gamma * spec.A;
      g.iterations = it;
      return g;
    }
  }
  throw DivergenceError("covariance recursion did not converge, last max-abs change " + std::to_string(change),
                        change);
}

ErrorStack error_stack(const SteadyGains& gains, const SystemSpec& spec, int N) {
  if (N < 1) throw ParameterError("error_stack: horizon must be at least 1");
  const int d = spec.state_dim(), q = spec.output_dim();
  std::vector<MatrixXd> phi_pow(N + 1);
  phi_pow[0] = MatrixXd::Identity(d, d);
  for (int i = 1; i <= N; ++i) phi_pow[i] = gains.Phi * phi_pow[i - 1];

  ErrorStack s;
  s.F.resize((N + 1) * d, d);
  s.G = MatrixXd::Zero((N + 1) * d, N * d);
  s.H = MatrixXd::Zero((N + 1) * d, (N + 1) * q);
  for (int i = 0; i <= N; ++i) {
    s.F.middleRows(i * d, d) = phi_pow[i];
    for (int j = 0; j < i; ++j) s.G.block(i * d, j * d, d, d) = phi_pow[i - 1 - j] * gains.Gamma;
    for (int j = 1; j <= i; ++j) s.H.block(i * d, j * q, d, q) = phi_pow[i - j] * gains.K;
  }
  return s;
}

}  // namespace ofspc
