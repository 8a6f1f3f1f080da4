#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ofspc/kalman.hpp"
#include "ofspc/model.hpp"
#include "ofspc/policy.hpp"

namespace ofspc {

/// Stationary second moments of the saturated future innovations
/// psi' = psi(innovations at offsets 1..N), coupled with the process noise
/// stack w_{t:N} and the current estimation error e_t.
struct MomentSet {
  MatrixXd Sigma_psi;    ///< E[psi' psi'^T], qN x qN
  MatrixXd Sigma_psi_w;  ///< E[psi' w^T], qN x dN
  MatrixXd Sigma_e_psi;  ///< E[psi' e^T], qN x d
  MatrixXd se_psi;       ///< per-entry standard errors
  MatrixXd se_psi_w;
  MatrixXd se_e_psi;
  VectorXd psi_mean;     ///< sample mean of psi'
  VectorXd psi_mean_se;
  double beta_hat = 0.0;
  double beta_se = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::string spec_digest;
};

struct BetaEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// SHA-256 (hex) over the plant, noise covariances, horizon, nonlinearity
/// and stationary gains. Cost weights and u_max are excluded: they do not
/// enter the moments.
std::string moment_digest(const SystemSpec& spec, int N, const PsiSpec& psi, const SteadyGains& gains);

/// Monte-Carlo estimate with stationary gains. Deterministic in
/// (seed, samples) whatever the worker count. Leaves beta at zero.
MomentSet estimate_moments(const SystemSpec& spec, const SteadyGains& gains, const ErrorStack& stack,
                           const PsiSpec& psi, std::uint64_t samples, std::uint64_t seed);

/// Mean of ||Xi_{t+N_r-1}||, the accumulated filter correction over one
/// recalculation interval.
BetaEstimate estimate_beta(const SystemSpec& spec, const SteadyGains& gains, int N_r, std::uint64_t samples,
                           std::uint64_t seed);

/// Binary cache: magic line, little-endian u64 header length, JSON header,
/// then row-major little-endian float64 matrices.
void write_moments(const MomentSet& ms, const std::filesystem::path& path);

/// Throws CacheError: Io, Format (bad magic/header), Checksum (payload hash
/// mismatch) or Stale (digest differs from expected_digest).
MomentSet read_moments(const std::filesystem::path& path,
                       const std::optional<std::string>& expected_digest = std::nullopt);

MomentSet cache_roundtrip(const MomentSet& ms, const std::filesystem::path& path);

}  // namespace ofspc
