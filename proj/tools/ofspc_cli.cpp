#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ofspc/config.hpp"
#include "ofspc/control_loop.hpp"
#include "ofspc/decomp.hpp"
#include "ofspc/errors.hpp"
#include "ofspc/linalg.hpp"
#include "ofspc/moments.hpp"
#include "ofspc/ocp.hpp"

namespace fs = std::filesystem;
using namespace ofspc;

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsageFailure = 2;

struct Options {
  std::string config;
  std::string moments;
  std::string out;
  std::string out_dir = ".";
  std::optional<std::uint64_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<int> steps;
  std::optional<double> u_max;
  double epsilon_prime = 0.1;
  std::uint64_t beta_samples = 20000;
};

MomentSet obtain_moments(const RunConfig& cfg, const Options& opt) {
  const auto [gains, stack] = filter_setup(cfg.sim);
  const std::string digest = moment_digest(cfg.sim.spec, cfg.sim.spec.N, cfg.sim.psi, gains);
  if (!opt.moments.empty()) return read_moments(opt.moments, digest);
  std::cerr << "note: no --moments cache given; estimating " << cfg.moment_samples << " samples in memory\n";
  return estimate_moments(cfg.sim.spec, gains, stack, cfg.sim.psi, cfg.moment_samples, cfg.moment_seed);
}

void apply_overrides(RunConfig& cfg, const Options& opt) {
  if (opt.seed) cfg.sim.seed = *opt.seed;
  if (opt.paths) cfg.sim.paths = *opt.paths;
  if (opt.steps) cfg.sim.steps = *opt.steps;
  if (cfg.sim.paths < 1 || cfg.sim.steps < 1) throw ConfigError("--paths and --steps must be positive");
}

int cmd_validate(const Options& opt) {
  const RunConfig cfg = load_config(opt.config);
  const ValidationReport report = validate(cfg.sim.spec);
  for (const auto& c : report.checks)
    std::cout << (c.passed ? "ok    " : "FAIL  ") << c.name << "  (margin " << c.margin << ")"
              << (c.detail.empty() ? "" : "  " + c.detail) << '\n';
  if (!report.all_passed()) {
    std::cout << "validation failed\n";
    return kDomainFailure;
  }
  const Decomposition dec = decompose(cfg.sim.spec);
  std::cout << "d_o = " << dec.d_o << ", d_s = " << dec.d_s << ", kappa = " << dec.kappa
            << ", cond(T) = " << dec.condition << '\n';
  if (dec.has_orthogonal_part()) {
    const int N_r = cfg.sim.N_r > 0 ? cfg.sim.N_r : dec.kappa;
    const SteadyGains gains = steady_state(cfg.sim.spec);
    const BetaEstimate beta = estimate_beta(cfg.sim.spec, gains, N_r, opt.beta_samples, cfg.moment_seed);
    const double threshold = prior_feasibility_threshold(dec, beta.value, opt.epsilon_prime, N_r);
    std::cout << "beta_hat = " << beta.value << " (se " << beta.standard_error << ", " << opt.beta_samples
              << " samples)\n";
    std::cout << "prior-controller feasibility threshold (epsilon' = " << opt.epsilon_prime << "): u_max >= " << threshold
              << '\n';
    for (double u : cfg.sim.u_max_sweep)
      std::cout << "u_max = " << u << ": zeta_max = " << zeta_bound(dec, u)
                << ", prior constraint " << (u >= threshold ? "feasible" : "infeasible") << '\n';
    if (N_r < dec.kappa || N_r > cfg.sim.spec.N) {
      std::cout << "N_r = " << N_r << " violates kappa <= N_r <= N\n";
      return kDomainFailure;
    }
  } else {
    std::cout << "no orthogonal part: stability constraints are vacuous\n";
  }
  return kOk;
}

int cmd_moments(const Options& opt) {
  RunConfig cfg = load_config(opt.config);
  if (opt.out.empty()) throw ConfigError("--out is required");
  const std::uint64_t samples = opt.samples.value_or(cfg.moment_samples);
  const std::uint64_t seed = opt.seed.value_or(cfg.moment_seed);
  if (samples < 2) throw ConfigError("--samples must be at least 2");
  if (samples < 10000)
    std::cerr << "warning: " << samples << " samples give large standard errors; 1e5 is recommended\n";
  require_valid(cfg.sim.spec);
  const auto [gains, stack] = filter_setup(cfg.sim);
  MomentSet ms = estimate_moments(cfg.sim.spec, gains, stack, cfg.sim.psi, samples, seed);
  const Decomposition dec = decompose(cfg.sim.spec);
  const int N_r = cfg.sim.N_r > 0 ? cfg.sim.N_r : std::max(dec.kappa, 1);
  const BetaEstimate beta = estimate_beta(cfg.sim.spec, gains, N_r, samples, seed);
  ms.beta_hat = beta.value;
  ms.beta_se = beta.standard_error;
  write_moments(ms, opt.out);
  std::cout << "wrote " << opt.out << " (" << samples << " samples, seed " << seed << ")\n"
            << "digest " << ms.spec_digest << '\n'
            << "max standard error: Sigma_psi " << ms.se_psi.maxCoeff() << ", Sigma_psi_w " << ms.se_psi_w.maxCoeff()
            << ", Sigma_e_psi " << ms.se_e_psi.maxCoeff() << '\n'
            << "min eigenvalue of Sigma_psi " << linalg::min_eigenvalue(ms.Sigma_psi) << '\n'
            << "beta_hat = " << ms.beta_hat << " (se " << ms.beta_se << ")\n";
  return kOk;
}

int cmd_simulate(const Options& opt) {
  RunConfig cfg = load_config(opt.config);
  apply_overrides(cfg, opt);
  const double u_max = opt.u_max.value_or(cfg.sim.u_max_sweep.front());
  if (!(u_max > 0.0)) throw ConfigError("--u-max must be positive");
  const MomentSet ms = obtain_moments(cfg, opt);
  const Experiment ex = make_experiment(cfg.sim, ms);
  const std::vector<PathResult> results = run_paths(ex, u_max, cfg.sim.paths);

  fs::create_directories(opt.out_dir);
  int solves = 0, fallbacks = 0;
  double max_u = 0.0;
  for (std::size_t k = 0; k < results.size(); ++k) {
    write_path_csv(results[k], fs::path(opt.out_dir) / ("path_" + std::to_string(k) + ".csv"));
    solves += results[k].solves;
    fallbacks += results[k].fallback_count;
    max_u = std::max(max_u, results[k].max_abs_control);
  }
  RunManifest manifest = make_manifest("simulate", cfg, &ex);
  manifest.extra["u_max"] = u_max;
  manifest.extra["ms_bound"] = empirical_ms_bound(results);
  write_manifest(manifest, fs::path(opt.out_dir) / "manifest.json");
  std::cout << "u_max = " << u_max << ": ms_bound = " << empirical_ms_bound(results) << ", solves = " << solves
            << ", fallbacks = " << fallbacks << ", max |u| = " << max_u << '\n';
  return kOk;
}

int cmd_sweep(const Options& opt) {
  RunConfig cfg = load_config(opt.config);
  apply_overrides(cfg, opt);
  const MomentSet ms = obtain_moments(cfg, opt);
  const Experiment ex = make_experiment(cfg.sim, ms);
  const std::vector<SweepRow> rows = sweep(ex);
  fs::create_directories(opt.out_dir);
  write_sweep_csv(rows, fs::path(opt.out_dir) / "sweep.csv");
  RunManifest manifest = make_manifest("sweep", cfg, &ex);
  manifest.extra["u_max_sweep"] = cfg.sim.u_max_sweep;
  write_manifest(manifest, fs::path(opt.out_dir) / "manifest.json");
  std::cout << sweep_csv(rows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Output-feedback stochastic predictive control with hard input bounds"};
  app.require_subcommand(1);
  Options opt;

  auto* validate_cmd = app.add_subcommand("validate", "Check assumptions and print the decomposition");
  validate_cmd->add_option("config", opt.config, "JSON configuration")->required();
  validate_cmd->add_option("--epsilon-prime", opt.epsilon_prime, "Margin used for the prior-controller threshold");
  validate_cmd->add_option("--beta-samples", opt.beta_samples, "Samples for the beta estimate");

  auto* moments_cmd = app.add_subcommand("moments", "Estimate the moment matrices and write a cache file");
  moments_cmd->add_option("config", opt.config, "JSON configuration")->required();
  moments_cmd->add_option("--samples", opt.samples, "Monte-Carlo samples");
  moments_cmd->add_option("--seed", opt.seed, "Random seed");
  moments_cmd->add_option("--out", opt.out, "Cache file to write")->required();

  auto* simulate_cmd = app.add_subcommand("simulate", "Closed-loop paths at one input bound");
  simulate_cmd->add_option("config", opt.config, "JSON configuration")->required();
  simulate_cmd->add_option("--moments", opt.moments, "Moments cache");
  simulate_cmd->add_option("--u-max", opt.u_max, "Input bound (default: first configured value)");
  simulate_cmd->add_option("--paths", opt.paths, "Number of paths");
  simulate_cmd->add_option("--steps", opt.steps, "Steps per path");
  simulate_cmd->add_option("--seed", opt.seed, "Base seed");
  simulate_cmd->add_option("--out-dir", opt.out_dir, "Output directory");

  auto* sweep_cmd = app.add_subcommand("sweep", "Mean-square bound over the configured u_max values");
  sweep_cmd->add_option("config", opt.config, "JSON configuration")->required();
  sweep_cmd->add_option("--moments", opt.moments, "Moments cache");
  sweep_cmd->add_option("--paths", opt.paths, "Number of paths");
  sweep_cmd->add_option("--steps", opt.steps, "Steps per path");
  sweep_cmd->add_option("--seed", opt.seed, "Base seed");
  sweep_cmd->add_option("--out-dir", opt.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageFailure;
  }

  try {
    if (*validate_cmd) return cmd_validate(opt);
    if (*moments_cmd) return cmd_moments(opt);
    if (*simulate_cmd) return cmd_simulate(opt);
    if (*sweep_cmd) return cmd_sweep(opt);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kUsageFailure;
  } catch (const CacheError& e) {
    std::cerr << "moments cache: " << e.what() << '\n';
    return kDomainFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainFailure;
  }
  return kUsageFailure;
}
