// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ofspc/control_loop.hpp"
#include "ofspc/decomp.hpp"
#include "ofspc/kalman.hpp"
#include "ofspc/linalg.hpp"
#include "ofspc/moments.hpp"
#include "ofspc/qp_solver.hpp"

using namespace ofspc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome ac1_riccati() {
  const auto g = steady_state(testing::scalar_spec(1.0, 0.0, 1.0, 1.0, 1.0));
  const double root = oracle::bisect([](double p) { return p - (p + 1.0) / (p + 2.0); }, 0.0, 2.0);
  const double err = std::abs(g.P(0, 0) - root);
  return {err <= 1e-9, fmt("P_inf=%.12f oracle=%.12f err=%.2e", g.P(0, 0), root, err)};
}

Outcome ac2_reachability() {
  const auto dec = decompose(testing::example_spec());
  return {dec.d_o == 3 && dec.d_s == 1 && dec.kappa == 3, fmt("d_o=%d d_s=%d kappa=%d", dec.d_o, dec.d_s, dec.kappa)};
}

Outcome ac3_qp_oracle() {
  std::mt19937_64 rng(31337);
  double worst = 0.0;
  int solved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 12;
    const int c = 1 + (trial * 7) % 20;
    const auto planted = testing::planted_qp(rng, n, c, 4);
    const auto& p = planted.p;
    const auto ref = oracle::enumerate_active_sets(p.P, p.q, p.A, p.l, p.u, planted.active);
    if (!ref) return {false, fmt("oracle found no active set on trial %d", trial)};
    const auto s = solve(p);
    if (s.status == QpStatus::Solved) ++solved;
    worst = std::max(worst, (s.z - ref->z).cwiseAbs().maxCoeff());
  }
  return {solved == 200 && worst <= 1e-5, fmt("200 QPs, solved=%d, max |z - z_oracle|=%.2e", solved, worst)};
}

Outcome ac6_drift(const Experiment& ex) {
  const auto qp = drift_audit(run_paths(ex, 1.0, ex.cfg.paths), ex, 1.0);
  std::string detail = fmt("qp: events=%d zeta=%.4f", qp.total_events(), qp.zeta);
  bool ok = qp.passed() && qp.total_events() >= 30;
  for (std::size_t j = 0; j < qp.components.size(); ++j) {
    const auto& c = qp.components[j];
    detail += fmt(" [%zu: above n=%d mean=%.3f %s, below n=%d mean=%.3f %s]", j, c.above.events, c.above.mean,
                  to_string(c.above.verdict).c_str(), c.below.events, c.below.mean, to_string(c.below.verdict).c_str());
  }

  SimConfig fb_cfg = ex.cfg;
  fb_cfg.controller = ControllerKind::FallbackOnly;
  Experiment fb = ex;
  fb.cfg = fb_cfg;
  const auto report = drift_audit(run_paths(fb, 1.0, ex.cfg.paths), fb, 1.0);
  int checked = 0;
  for (std::size_t j = 0; j < report.components.size(); ++j) {
    const auto& above = report.components[j].above;
    if (above.events < 30) continue;
    ++checked;
    const bool close = std::abs(above.mean + report.zeta) <= 4.0 * above.standard_error;
    ok = ok && close;
    detail += fmt("; fallback[%zu] above n=%d mean=%.4f se=%.4f vs -zeta=%.4f", j, above.events, above.mean,
                  above.standard_error, -report.zeta);
  }
  ok = ok && checked > 0;
  return {ok, detail};
}

Outcome ac7_shape(const std::vector<SweepRow>& rows) {
  bool monotone = true;
  std::string series;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    series += fmt("%s%g:%.1f", i ? " " : "", rows[i].u_max, rows[i].ms_bound);
    if (i > 0 && rows[i].ms_bound > 1.05 * rows[i - 1].ms_bound) monotone = false;
  }
  const double first = rows.front().ms_bound, last = rows.back().ms_bound;
  const double ratio = first / last;
  const bool band = last >= 300.0 && last <= 700.0;
  return {monotone && ratio >= 3.0 && band,
          fmt("non-increasing(5%%)=%s ratio=%.2f (>=3) bound(20)=%.1f (in [300,700]: %s); ", monotone ? "yes" : "no",
              ratio, last, band ? "yes" : "no") +
              series};
}

Outcome ac8_boundedness(const Experiment& base, int paths) {
  Experiment ex = base;
  ex.cfg.steps = 1000;
  const auto series = mean_sq_norm_series(run_paths(ex, 1.0, paths));
  auto window = [&](int a, int b) {
    double s = 0.0;
    for (int t = a; t < b; ++t) s += series[t];
    return s / (b - a);
  };
  const double mid = window(400, 600), tail = window(800, 1000);
  const double ratio = tail / mid;
  return {ratio <= 2.0 && ratio >= 0.5,
          fmt("%d paths x 1000 steps: mean ||x||^2 steps 400-600 = %.2f, last 200 = %.2f, ratio %.3f", paths, mid, tail,
              ratio)};
}

Outcome ac9_moments() {
  const auto& ms = testing::example_moments();
  const double min_eig = linalg::min_eigenvalue(ms.Sigma_psi);
  double worst_mean = 0.0;
  for (Eigen::Index i = 0; i < ms.psi_mean.size(); ++i)
    worst_mean = std::max(worst_mean, std::abs(ms.psi_mean(i)) / ms.psi_mean_se(i));

  // Scalar plant: stationary innovation ~ N(0, Sv^2 / (M + Sv)), M = A^2 P + Sw.
  const double a = 1.0, sw = 1.0, sv = 0.5;
  const auto spec = testing::scalar_spec(a, 1.0, 1.0, sw, sv, 1.0, 2);
  const auto gains = steady_state(spec);
  const PsiSpec psi{PsiSpec::Kind::Saturation, 0.6};
  const auto scalar = estimate_moments(spec, gains, error_stack(gains, spec, 2), psi, 100000, 7);
  const double M = a * a * gains.P(0, 0) + sw;
  const double sigma = std::sqrt(sv * sv / (M + sv));
  const double oracle_value = oracle::gaussian_expectation(
      [&](double z) { return std::pow(psi_scalar(psi, z), 2); }, sigma, {-0.6, 0.6});
  const double z = std::abs(scalar.Sigma_psi(0, 0) - oracle_value) / scalar.se_psi(0, 0);

  return {min_eig >= -1e-9 && worst_mean <= 4.0 && z <= 3.0,
          fmt("min eig Sigma_psi=%.3e, max |mean|/se=%.2f, scalar E[psi^2]=%.6f oracle=%.6f (%.2f se)", min_eig,
              worst_mean, scalar.Sigma_psi(0, 0), oracle_value, z)};
}

Outcome ac10_determinism(const MomentSet& moments) {
  auto cfg = testing::example_sim_config(6, 30, 99);
  cfg.u_max_sweep = {0.1, 1.0, 5.0};
  const auto ex = make_experiment(cfg, moments);
  std::vector<std::string> outputs;
  for (const char* threads : {"1", "2", "4"}) {
    setenv("OFSPC_THREADS", threads, 1);
    outputs.push_back(sweep_csv(sweep(ex)));
  }
  unsetenv("OFSPC_THREADS");
  const bool same = outputs[0] == outputs[1] && outputs[1] == outputs[2];
  return {same, fmt("OFSPC_THREADS=1,2,4 -> %s CSV (%zu bytes)", same ? "identical" : "differing", outputs[0].size())};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* id, const std::function<Outcome()>& run) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s %s (%.1fs) %s\n", id, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
  };

  report("AC1", ac1_riccati);
  report("AC2", ac2_reachability);
  report("AC3", ac3_qp_oracle);

  const auto cfg = testing::example_sim_config(100, 90, 2024);
  const auto& moments = testing::example_moments();
  const Experiment ex = make_experiment(cfg, moments);

  std::vector<SweepRow> rows;
  std::string sweep_error;
  const auto start = std::chrono::steady_clock::now();
  try {
    rows = sweep(ex);
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }
  const double sweep_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("# sweep of %zu bounds x %d paths x %d steps took %.1fs\n", cfg.u_max_sweep.size(), cfg.paths, cfg.steps,
              sweep_secs);

  const SweepRow* small = nullptr;
  for (const auto& r : rows)
    if (r.u_max == 0.1) small = &r;
  report("AC4", [&]() -> Outcome {
    if (!small) return {false, "sweep failed: " + sweep_error};
    return {small->fallbacks == 0, fmt("u_max=0.1: %d solves, %d fallbacks, 0 infeasible", small->solves, small->fallbacks)};
  });
  report("AC5", [&]() -> Outcome {
    if (!small) return {false, "sweep failed: " + sweep_error};
    return {small->max_abs_control <= 0.1 + 1e-9, fmt("max |u| = %.12f (bound 0.1)", small->max_abs_control)};
  });
  report("AC6", [&] { return ac6_drift(ex); });
  report("AC7", [&]() -> Outcome {
    if (rows.empty()) return {false, "sweep failed: " + sweep_error};
    return ac7_shape(rows);
  });
  report("AC8", [&] { return ac8_boundedness(ex, 100); });
  report("AC9", ac9_moments);
  report("AC10", [&] { return ac10_determinism(moments); });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
