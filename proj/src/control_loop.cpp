#include "ofspc/control_loop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ofspc/errors.hpp"
#include "ofspc/linalg.hpp"
#include "ofspc/parallel.hpp"
#include "ofspc/rng.hpp"

namespace ofspc {
namespace {

enum StreamRole : std::uint64_t { kRoleX0 = 0, kRoleW = 1, kRoleV = 2 };

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

DriftSide summarize(const std::vector<double>& increments, double zeta, int sign) {
  DriftSide side;
  side.events = static_cast<int>(increments.size());
  if (increments.empty()) return side;
  double sum = 0.0;
  for (double v : increments) sum += v;
  side.mean = sum / side.events;
  if (side.events > 1) {
    double ss = 0.0;
    for (double v : increments) ss += (v - side.mean) * (v - side.mean);
    side.standard_error = std::sqrt(ss / (side.events - 1) / side.events);
  }
  if (side.events < 30) return side;
  const bool flagged = sign > 0 ? side.mean > -zeta + 4.0 * side.standard_error
                                : side.mean < zeta - 4.0 * side.standard_error;
  side.verdict = flagged ? DriftSide::Verdict::Fail : DriftSide::Verdict::Pass;
  return side;
}

}  // namespace

double Experiment::zeta_max(double u_max) const { return zeta_bound(dec, u_max); }

OcpContext Experiment::context(double u_max) const {
  SystemSpec spec = cfg.spec;
  spec.u_max = u_max;
  Thresholds th;
  th.r = cfg.r;
  th.epsilon = cfg.epsilon;
  Decomposition d = dec;
  if (d.has_orthogonal_part()) {
    d.zeta_max = zeta_bound(dec, u_max);
    th.zeta = cfg.zeta_fraction * d.zeta_max;
  }
  return make_context(spec, d, gains, moments, cfg.psi, th, cfg.qp);
}

std::pair<SteadyGains, ErrorStack> filter_setup(const SimConfig& cfg) {
  SteadyGains gains = steady_state(cfg.spec);
  ErrorStack stack = error_stack(gains, cfg.spec, cfg.spec.N);
  return {std::move(gains), std::move(stack)};
}

Experiment make_experiment(const SimConfig& cfg, const MomentSet& moments) {
  require_valid(cfg.spec);
  if (cfg.steps < 1) throw ParameterError("steps must be positive");
  if (cfg.paths < 1) throw ParameterError("paths must be positive");
  if (!(cfg.zeta_fraction > 0.0 && cfg.zeta_fraction < 1.0)) throw ParameterError("zeta_fraction must lie in (0, 1)");
  Experiment ex;
  ex.cfg = cfg;
  ex.gains = steady_state(cfg.spec);
  ex.dec = decompose(cfg.spec);
  ex.moments = moments;
  ex.N_r = cfg.N_r > 0 ? cfg.N_r : std::max(ex.dec.kappa, 1);
  if (ex.N_r < ex.dec.kappa || ex.N_r > cfg.spec.N)
    throw ParameterError("N_r = " + std::to_string(ex.N_r) + " must satisfy kappa (" + std::to_string(ex.dec.kappa) +
                         ") <= N_r <= N (" + std::to_string(cfg.spec.N) + ")");
  if (moments.spec_digest != moment_digest(cfg.spec, cfg.spec.N, cfg.psi, ex.gains))
    throw CacheError(CacheError::Kind::Stale, "moments were estimated for a different configuration");
  return ex;
}

PathResult run_path(const Experiment& ex, const OcpContext& ctx, int path_index) {
  const SimConfig& cfg = ex.cfg;
  const SystemSpec& spec = cfg.spec;
  const auto path = static_cast<std::uint64_t>(path_index);
  GaussianStream x0_stream(stream_seed(cfg.seed, {path, kRoleX0}));
  GaussianStream w_stream(stream_seed(cfg.seed, {path, kRoleW}));
  GaussianStream v_stream(stream_seed(cfg.seed, {path, kRoleV}));
  const MatrixXd Lx0 = linalg::psd_factor(spec.Sigma_x0);
  const MatrixXd Lw = linalg::psd_factor(spec.Sigma_w);
  const MatrixXd Lv = linalg::psd_factor(spec.Sigma_v);
  const double noise = cfg.noiseless_plant ? 0.0 : 1.0;

  PathResult res;
  res.seed = stream_seed(cfg.seed, {path});
  res.state_sq_norms.reserve(cfg.steps);

  VectorXd x = x0_stream.next_correlated(Lx0);
  VectorXd y = spec.C * x + noise * v_stream.next_correlated(Lv);
  FilterState filter = init_filter(spec, y);

  PolicyParams params;
  std::vector<VectorXd> innovations;
  int stage = 0;
  for (int t = 0; t < cfg.steps; ++t) {
    if (t % ex.N_r == 0) {
      innovations.assign(1, y - spec.C * filter.x_hat);
      stage = 0;
      if (cfg.controller == ControllerKind::FallbackOnly) {
        params = fallback_point(ctx, ctx.dec.orthogonal_coordinates(filter.x_hat));
      } else {
        const OcpSolution sol = solve_ocp(ctx, filter.x_hat, y);
        params = sol.params;
        ++res.solves;
        res.qp_iterations_total += sol.iterations;
        if (sol.fallback_used) ++res.fallback_count;
        if (sol.repair_weight > 0.0) ++res.repair_count;
      }
    }
    const VectorXd u = eval_policy(params, innovations, cfg.psi, stage);

    res.state_sq_norms.push_back(x.squaredNorm());
    res.states.push_back(x);
    res.estimates.push_back(filter.x_hat);
    res.controls.push_back(u);
    res.trace_P.push_back(filter.P.trace());
    res.max_abs_control = std::max(res.max_abs_control, u.cwiseAbs().maxCoeff());

    x = spec.A * x + spec.B * u + noise * w_stream.next_correlated(Lw);
    y = spec.C * x + noise * v_stream.next_correlated(Lv);
    filter = step(filter, u, y, spec);
    innovations.push_back(y - spec.C * filter.x_hat);
    ++stage;
  }
  return res;
}

std::vector<PathResult> run_paths(const Experiment& ex, double u_max, int paths) {
  const OcpContext ctx = ex.context(u_max);
  std::vector<PathResult> results(paths);
  parallel_for(static_cast<std::size_t>(paths),
               [&](std::size_t p) { results[p] = run_path(ex, ctx, static_cast<int>(p)); });
  return results;
}

std::vector<double> mean_sq_norm_series(const std::vector<PathResult>& results) {
  if (results.empty()) throw ParameterError("no paths to summarize");
  std::size_t steps = results.front().state_sq_norms.size();
  for (const auto& r : results) steps = std::min(steps, r.state_sq_norms.size());
  std::vector<double> mean(steps, 0.0);
  for (const auto& r : results)
    for (std::size_t t = 0; t < steps; ++t) mean[t] += r.state_sq_norms[t];
  for (double& v : mean) v /= static_cast<double>(results.size());
  return mean;
}

double empirical_ms_bound(const std::vector<PathResult>& results) {
  const std::vector<double> mean = mean_sq_norm_series(results);
  if (mean.empty()) throw ParameterError("paths have no recorded steps");
  return *std::max_element(mean.begin(), mean.end());
}

std::vector<SweepRow> sweep(const Experiment& ex) {
  const auto& bounds = ex.cfg.u_max_sweep;
  if (bounds.empty()) throw ParameterError("sweep needs at least one u_max");
  const int paths = ex.cfg.paths;

  std::vector<OcpContext> contexts;
  contexts.reserve(bounds.size());
  for (double u : bounds) contexts.push_back(ex.context(u));

  std::vector<PathResult> results(bounds.size() * static_cast<std::size_t>(paths));
  parallel_for(results.size(), [&](std::size_t k) {
    const std::size_t b = k / static_cast<std::size_t>(paths);
    results[k] = run_path(ex, contexts[b], static_cast<int>(k % static_cast<std::size_t>(paths)));
  });

  std::vector<SweepRow> rows;
  for (std::size_t b = 0; b < bounds.size(); ++b) {
    const std::vector<PathResult> slice(results.begin() + static_cast<std::ptrdiff_t>(b * paths),
                                        results.begin() + static_cast<std::ptrdiff_t>((b + 1) * paths));
    SweepRow row;
    row.u_max = bounds[b];
    row.ms_bound = empirical_ms_bound(slice);
    long long iterations = 0;
    for (const auto& r : slice) {
      row.solves += r.solves;
      row.fallbacks += r.fallback_count;
      iterations += r.qp_iterations_total;
      row.max_abs_control = std::max(row.max_abs_control, r.max_abs_control);
    }
    row.fallback_rate = row.solves > 0 ? static_cast<double>(row.fallbacks) / row.solves : 0.0;
    row.mean_qp_iters = row.solves > 0 ? static_cast<double>(iterations) / row.solves : 0.0;
    row.paths = paths;
    row.steps = ex.cfg.steps;
    row.seed = ex.cfg.seed;
    rows.push_back(row);
  }
  return rows;
}

int DriftReport::total_events() const {
  int n = 0;
  for (const auto& c : components) n += c.above.events + c.below.events;
  return n;
}

bool DriftReport::passed() const {
  bool any = false;
  for (const auto& c : components)
    for (const DriftSide* s : {&c.above, &c.below}) {
      if (s->verdict == DriftSide::Verdict::Fail) return false;
      if (s->verdict == DriftSide::Verdict::Pass) any = true;
    }
  return any;
}

DriftReport drift_audit(const std::vector<PathResult>& results, const Experiment& ex, double u_max) {
  const Decomposition& dec = ex.dec;
  if (!dec.has_orthogonal_part()) throw NotApplicableError("drift audit needs an orthogonal part");
  if (ex.N_r != dec.kappa) throw ParameterError("drift audit requires N_r == kappa");
  const int kappa = dec.kappa;
  const double level = ex.cfg.r + ex.cfg.epsilon;
  DriftReport report;
  report.zeta = ex.cfg.zeta_fraction * ex.zeta_max(u_max);

  const MatrixXd step_back = linalg::matrix_power(dec.A_o, kappa).transpose();
  std::vector<std::vector<double>> above(dec.d_o), below(dec.d_o);
  for (const auto& r : results) {
    MatrixXd rot = MatrixXd::Identity(dec.d_o, dec.d_o);  // (A_o^T)^{kappa t}
    for (std::size_t t = 0; t + kappa < r.estimates.size(); t += kappa) {
      const MatrixXd rot_next = step_back * rot;
      const VectorXd z = rot * dec.orthogonal_coordinates(r.estimates[t]);
      const VectorXd z_next = rot_next * dec.orthogonal_coordinates(r.estimates[t + kappa]);
      for (int j = 0; j < dec.d_o; ++j) {
        if (z(j) > level) above[j].push_back(z_next(j) - z(j));
        else if (z(j) < -level) below[j].push_back(z_next(j) - z(j));
      }
      rot = rot_next;
    }
  }
  for (int j = 0; j < dec.d_o; ++j)
    report.components.push_back({summarize(above[j], report.zeta, +1), summarize(below[j], report.zeta, -1)});
  return report;
}

std::string to_string(DriftSide::Verdict v) {
  switch (v) {
    case DriftSide::Verdict::Pass: return "pass";
    case DriftSide::Verdict::Fail: return "fail";
    case DriftSide::Verdict::InsufficientData: return "insufficient data";
  }
  return "unknown";
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "u_max,ms_bound,fallback_rate,mean_qp_iters,paths,steps,seed\n";
  for (const auto& r : rows)
    out << fmt(r.u_max) << ',' << fmt(r.ms_bound) << ',' << fmt(r.fallback_rate) << ',' << fmt(r.mean_qp_iters) << ','
        << r.paths << ',' << r.steps << ',' << r.seed << '\n';
  return out.str();
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  write_text(sweep_csv(rows), path);
}

void write_path_csv(const PathResult& result, const std::filesystem::path& path) {
  std::ostringstream out;
  const Eigen::Index d = result.states.empty() ? 0 : result.states.front().size();
  const Eigen::Index m = result.controls.empty() ? 0 : result.controls.front().size();
  out << "t";
  for (Eigen::Index i = 1; i <= d; ++i) out << ",x" << i;
  for (Eigen::Index i = 1; i <= m; ++i) out << ",u" << i;
  for (Eigen::Index i = 1; i <= d; ++i) out << ",xhat" << i;
  out << ",trP\n";
  for (std::size_t t = 0; t < result.states.size(); ++t) {
    out << t;
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << fmt(result.states[t](i));
    for (Eigen::Index i = 0; i < m; ++i) out << ',' << fmt(result.controls[t](i));
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << fmt(result.estimates[t](i));
    out << ',' << fmt(result.trace_P[t]) << '\n';
  }
  write_text(out.str(), path);
}

}  // namespace ofspc
