#pragma once

#include "ofspc/model.hpp"

namespace ofspc {

/// Filtered estimate x_hat_{t|t} and its error covariance P_{t|t}.
struct FilterState {
  VectorXd x_hat;
  MatrixXd P;
  int t = 0;
};

/// Stationary filter quantities: gain K, Gamma = I - K C, Phi = Gamma A and
/// the fixed point of the filtered-covariance recursion.
struct SteadyGains {
  MatrixXd K;
  MatrixXd Gamma;
  MatrixXd Phi;
  MatrixXd P;
  int iterations = 0;
};

/// Estimation-error propagation over one horizon at stationarity:
///   e_{t:N+1} = F e_t + G w_{t:N} - H v_{t:N+1}.
struct ErrorStack {
  MatrixXd F;  ///< (N+1)d x d
  MatrixXd G;  ///< (N+1)d x Nd
  MatrixXd H;  ///< (N+1)d x (N+1)q
};

/// Gain K = M C^T (C M C^T + Sigma_v)^{-1} with M = A P A^T + Sigma_w.
MatrixXd kalman_gain(const SystemSpec& spec, const MatrixXd& P);

/// Conditions the prior x_0 ~ N(0, Sigma_x0) on the first measurement.
FilterState init_filter(const SystemSpec& spec, const VectorXd& y0);

/// One predict/update cycle with the Joseph-form covariance update.
FilterState step(const FilterState& state, const VectorXd& u, const VectorXd& y_next, const SystemSpec& spec);

struct SteadyStateOptions {
  double tolerance = 1e-12;
  int max_iterations = 100000;
};

/// Iterates the covariance recursion from Sigma_x0 to its fixed point.
SteadyGains steady_state(const SystemSpec& spec, const SteadyStateOptions& options = {});
/// Same, from an arbitrary PSD starting covariance.
SteadyGains steady_state(const SystemSpec& spec, const MatrixXd& P_start, const SteadyStateOptions& options = {});

ErrorStack error_stack(const SteadyGains& gains, const SystemSpec& spec, int N);

}  // namespace ofspc
