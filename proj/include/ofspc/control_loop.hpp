#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ofspc/decomp.hpp"
#include "ofspc/kalman.hpp"
#include "ofspc/moments.hpp"
#include "ofspc/ocp.hpp"

namespace ofspc {

enum class ControllerKind { Qp, FallbackOnly };

struct SimConfig {
  SystemSpec spec;
  PsiSpec psi;
  double r = 1.0;
  double epsilon = 0.1;
  double zeta_fraction = 0.9;  ///< zeta = zeta_fraction * zeta_max
  int N_r = 0;                 ///< 0 selects the reachability index
  int steps = 90;
  int paths = 100;
  std::uint64_t seed = 1;
  std::vector<double> u_max_sweep;
  ControllerKind controller = ControllerKind::Qp;
  bool noiseless_plant = false;  ///< plant runs without w and v; the filter is unchanged
  QpSettings qp;

  /// Steps excluded when checking stationary filter statistics.
  int warmup_steps() const { return 5 * spec.state_dim(); }
};

/// Offline quantities shared by every path and sweep point.
struct Experiment {
  SimConfig cfg;
  SteadyGains gains;
  Decomposition dec;
  MomentSet moments;
  int N_r = 0;

  double zeta_max(double u_max) const;
  /// QP context for one input bound, with zeta = zeta_fraction * zeta_max(u_max).
  OcpContext context(double u_max) const;
};

/// Validates the system, decomposes it and resolves N_r (kappa <= N_r <= N).
/// Throws CacheError (Stale) if the moments do not match the system.
Experiment make_experiment(const SimConfig& cfg, const MomentSet& moments);

/// Steady gains for cfg and the matching horizon error stack, the inputs of
/// estimate_moments.
std::pair<SteadyGains, ErrorStack> filter_setup(const SimConfig& cfg);

struct PathResult {
  std::vector<double> state_sq_norms;  ///< ||x_t||^2, t = 0..steps-1
  std::vector<VectorXd> states;
  std::vector<VectorXd> estimates;
  std::vector<VectorXd> controls;
  std::vector<double> trace_P;
  int solves = 0;
  int fallback_count = 0;
  int repair_count = 0;
  long long qp_iterations_total = 0;
  double max_abs_control = 0.0;
  std::uint64_t seed = 0;
};

PathResult run_path(const Experiment& ex, const OcpContext& ctx, int path_index);

/// Paths 0..paths-1 at one input bound, in path order.
std::vector<PathResult> run_paths(const Experiment& ex, double u_max, int paths);

/// max over t of the path-averaged ||x_t||^2. Throws ParameterError on empty input.
double empirical_ms_bound(const std::vector<PathResult>& results);

/// Path-averaged ||x_t||^2 per step.
std::vector<double> mean_sq_norm_series(const std::vector<PathResult>& results);

struct SweepRow {
  double u_max = 0.0;
  double ms_bound = 0.0;
  double fallback_rate = 0.0;
  double mean_qp_iters = 0.0;
  int paths = 0;
  int steps = 0;
  std::uint64_t seed = 0;
  int solves = 0;
  int fallbacks = 0;
  double max_abs_control = 0.0;
};

std::vector<SweepRow> sweep(const Experiment& ex);

struct DriftSide {
  int events = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  enum class Verdict { Pass, Fail, InsufficientData } verdict = Verdict::InsufficientData;
};

struct DriftComponent {
  DriftSide above;  ///< events with z_j > r + epsilon; mean should be <= -zeta
  DriftSide below;  ///< events with z_j < -(r + epsilon); mean should be >= zeta
};

struct DriftReport {
  double zeta = 0.0;
  std::vector<DriftComponent> components;

  int total_events() const;
  /// No side failed and at least one side had enough events.
  bool passed() const;
};

/// Audits the kappa-subsampled drift of z = (A_o^T)^{kappa t} x_hat^o.
/// Requires N_r == kappa.
DriftReport drift_audit(const std::vector<PathResult>& results, const Experiment& ex, double u_max);

std::string to_string(DriftSide::Verdict v);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void write_path_csv(const PathResult& result, const std::filesystem::path& path);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace ofspc
