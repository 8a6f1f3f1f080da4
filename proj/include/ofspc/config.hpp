#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "ofspc/control_loop.hpp"

namespace ofspc {

struct RunConfig {
  SimConfig sim;
  std::uint64_t moment_samples = 100000;
  std::uint64_t moment_seed = 0;
  std::filesystem::path source;
};

/// Parses a configuration document. Matrices are row-major nested arrays;
/// a single Q or R matrix is broadcast across the N stages, a list of N
/// matrices gives per-stage weights. Throws ConfigError with the offending
/// field (or parse location) on malformed input.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Every resolved value needed to reproduce a run.
struct RunManifest {
  std::string command;
  std::filesystem::path config_path;
  int N = 0;
  int N_r = 0;
  int kappa = 0;
  int d_o = 0;
  int d_s = 0;
  double r = 0.0;
  double epsilon = 0.0;
  double zeta_fraction = 0.0;
  std::string psi_kind;
  double psi_max = 0.0;
  int paths = 0;
  int steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t moment_samples = 0;
  std::uint64_t moment_seed = 0;
  std::string moments_digest;
  std::string ms_statistic = "max over t of the path-mean of ||x_t||^2, t = 0..steps-1";
  int warmup_steps = 0;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
};

RunManifest make_manifest(const std::string& command, const RunConfig& cfg, const Experiment* ex);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

std::string version_string();

}  // namespace ofspc
