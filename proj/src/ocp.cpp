#include "ofspc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ofspc/errors.hpp"
#include "ofspc/linalg.hpp"

namespace ofspc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Rows of the map z -> eta + Theta^{(:,t)} psi0 (the part of the control
/// stack known at solve time).
MatrixXd known_control_map(const OcpContext& ctx, const VectorXd& psi0) {
  const VariableMap& vm = ctx.var_map;
  const int N = ctx.spec.N, m = ctx.spec.input_dim(), q = ctx.spec.output_dim();
  MatrixXd L = MatrixXd::Zero(N * m, vm.size());
  for (int l = 0; l < N; ++l)
    for (int a = 0; a < m; ++a) {
      L(l * m + a, vm.eta(l, a)) = 1.0;
      for (int b = 0; b < q; ++b) L(l * m + a, vm.theta(l, 0, a, b)) = psi0(b);
    }
  return L;
}

/// Signed stability requirements: +1 row means v_j <= -zeta, -1 means v_j >= zeta.
std::vector<std::pair<int, int>> triggered_rows(const OcpContext& ctx, const VectorXd& x_hat_o) {
  std::vector<std::pair<int, int>> rows;
  const double level = ctx.thresholds.r + ctx.thresholds.epsilon;
  for (int j = 0; j < ctx.dec.d_o; ++j) {
    if (x_hat_o(j) >= level) rows.emplace_back(j, +1);
    else if (x_hat_o(j) <= -level) rows.emplace_back(j, -1);
  }
  return rows;
}

/// Per-row margins (>= 0 when satisfied): hard bound rows first, then the
/// triggered stability rows.
VectorXd margins(const OcpContext& ctx, const PolicyParams& p, const VectorXd& x_hat_o, const VectorXd& psi0) {
  const VectorXd hard = hard_bound_margin(p, ctx.psi.psi_max, ctx.u_max);
  const auto rows = triggered_rows(ctx, x_hat_o);
  VectorXd out(hard.size() + static_cast<Eigen::Index>(rows.size()));
  out.head(hard.size()) = hard;
  if (!rows.empty()) {
    const int m = ctx.spec.input_dim(), km = ctx.dec.kappa * m;
    VectorXd known = p.eta().head(km);
    for (int l = 0; l < ctx.dec.kappa; ++l) known.segment(l * m, m) += p.theta(l, 0) * psi0;
    const VectorXd v = ctx.W * known;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto [j, sign] = rows[k];
      out(hard.size() + static_cast<Eigen::Index>(k)) =
          sign > 0 ? -ctx.thresholds.zeta - v(j) : v(j) - ctx.thresholds.zeta;
    }
  }
  return out;
}

PolicyParams blend(const PolicyParams& a, const PolicyParams& b, double weight) {
  PolicyParams out = a;
  out.eta() = (1.0 - weight) * a.eta() + weight * b.eta();
  for (int l = 0; l < a.horizon(); ++l)
    for (int i = 0; i <= l; ++i) out.theta(l, i) = (1.0 - weight) * a.theta(l, i) + weight * b.theta(l, i);
  return out;
}

}  // namespace

VariableMap::VariableMap(int N, int m, int q) : N_(N), m_(m), q_(q) {}

VectorXd VariableMap::pack(const PolicyParams& p) const {
  VectorXd z = VectorXd::Zero(size());
  z.head(eta_count()) = p.eta();
  for (int l = 0; l < N_; ++l)
    for (int i = 0; i <= l; ++i)
      for (int a = 0; a < m_; ++a)
        for (int b = 0; b < q_; ++b) z(theta(l, i, a, b)) = p.theta(l, i)(a, b);
  const int k = eta_count() + theta_count();
  z.tail(k) = z.head(k).cwiseAbs();
  return z;
}

PolicyParams VariableMap::unpack(const VectorXd& z) const {
  PolicyParams p(N_, m_, q_);
  p.eta() = z.head(eta_count());
  for (int l = 0; l < N_; ++l)
    for (int i = 0; i <= l; ++i)
      for (int a = 0; a < m_; ++a)
        for (int b = 0; b < q_; ++b) p.theta(l, i)(a, b) = z(theta(l, i, a, b));
  return p;
}

OcpContext make_context(const SystemSpec& spec, const Decomposition& dec, const SteadyGains& gains,
                        const MomentSet& moments, const PsiSpec& psi, const Thresholds& thresholds,
                        const QpSettings& qp) {
  const int N = spec.N, m = spec.input_dim(), q = spec.output_dim(), d = spec.state_dim();
  if (moments.spec_digest != moment_digest(spec, N, psi, gains))
    throw CacheError(CacheError::Kind::Stale, "moments were estimated for a different system, horizon or psi");
  if (moments.Sigma_psi.rows() != q * N || moments.Sigma_psi_w.cols() != d * N || moments.Sigma_e_psi.cols() != d)
    throw CacheError(CacheError::Kind::Format, "moment matrices have unexpected dimensions");

  OcpContext ctx;
  ctx.spec = spec;
  ctx.stack = build_stacked(spec);
  ctx.dec = dec;
  ctx.moments = moments;
  ctx.psi = psi;
  ctx.thresholds = thresholds;
  ctx.u_max = spec.u_max;
  ctx.var_map = VariableMap(N, m, q);
  ctx.qp = qp;

  if (dec.has_orthogonal_part()) {
    if (dec.kappa > N) throw ParameterError("reachability index exceeds the horizon N");
    const double zeta_max = zeta_bound(dec, spec.u_max);
    if (!(thresholds.zeta > 0.0 && thresholds.zeta < zeta_max)) {
      std::ostringstream msg;
      msg << "zeta = " << thresholds.zeta << " must lie strictly inside (0, " << zeta_max << ")";
      throw ParameterError(msg.str());
    }
    if (!(thresholds.r > 0.0) || thresholds.epsilon < 0.0) throw ParameterError("need r > 0 and epsilon >= 0");
    ctx.W = linalg::matrix_power(dec.A_o, dec.kappa).transpose() * dec.R_kappa;
  }

  // tr(alpha Theta' Sigma_psi Theta'^T) + 2 <G', Theta'> over the entries of
  // Theta' (blocks with offset >= 1; column block i-1 of Theta').
  const VariableMap& vm = ctx.var_map;
  const MatrixXd& alpha = ctx.stack.control_hessian;
  const MatrixXd BtQ = ctx.stack.input_response.transpose() * ctx.stack.state_cost;
  const MatrixXd Gp = BtQ * (ctx.stack.free_response * moments.Sigma_e_psi.transpose() +
                             ctx.stack.noise_response * moments.Sigma_psi_w.transpose());
  struct Entry {
    int index, row, col;
  };
  std::vector<Entry> entries;
  for (int l = 1; l < N; ++l)
    for (int i = 1; i <= l; ++i)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < q; ++b) entries.push_back({vm.theta(l, i, a, b) - vm.eta_count(), l * m + a, (i - 1) * q + b});

  ctx.H_future = MatrixXd::Zero(vm.theta_count(), vm.theta_count());
  ctx.g_future = VectorXd::Zero(vm.theta_count());
  for (const Entry& e1 : entries) {
    ctx.g_future(e1.index) = Gp(e1.row, e1.col);
    for (const Entry& e2 : entries)
      ctx.H_future(e1.index, e2.index) = alpha(e1.row, e2.row) * moments.Sigma_psi(e1.col, e2.col);
  }

  // |x_k| <= s_k as two rows each, then s_eta + psi_max * sum s_theta <= u_max per control row.
  const int k_vars = vm.eta_count() + vm.theta_count();
  const int rows = 2 * k_vars + N * m;
  ctx.hard_rows = MatrixXd::Zero(rows, vm.size());
  ctx.hard_lower = VectorXd::Zero(rows);
  ctx.hard_upper = VectorXd::Constant(rows, kInf);
  for (int k = 0; k < k_vars; ++k) {
    ctx.hard_rows(2 * k, vm.slack(k)) = 1.0;
    ctx.hard_rows(2 * k, k) = -1.0;
    ctx.hard_rows(2 * k + 1, vm.slack(k)) = 1.0;
    ctx.hard_rows(2 * k + 1, k) = 1.0;
  }
  for (int l = 0; l < N; ++l)
    for (int a = 0; a < m; ++a) {
      const int row = 2 * k_vars + l * m + a;
      ctx.hard_rows(row, vm.slack(vm.eta(l, a))) = 1.0;
      for (int i = 0; i <= l; ++i)
        for (int b = 0; b < q; ++b) ctx.hard_rows(row, vm.slack(vm.theta(l, i, a, b))) = psi.psi_max;
      ctx.hard_lower(row) = -kInf;
      ctx.hard_upper(row) = spec.u_max;
    }
  return ctx;
}

Objective build_objective(const OcpContext& ctx, const VectorXd& x_hat, const VectorXd& psi0) {
  const VariableMap& vm = ctx.var_map;
  const MatrixXd L = known_control_map(ctx, psi0);
  const VectorXd ax = ctx.stack.free_response * x_hat;
  const VectorXd g = ctx.stack.input_response.transpose() * (ctx.stack.state_cost * ax);

  MatrixXd H = L.transpose() * ctx.stack.control_hessian * L;
  VectorXd h = L.transpose() * g;
  H.block(vm.eta_count(), vm.eta_count(), vm.theta_count(), vm.theta_count()) += ctx.H_future;
  h.segment(vm.eta_count(), vm.theta_count()) += ctx.g_future;

  Objective obj;
  obj.P = 2.0 * linalg::symmetrized(H);
  obj.q = 2.0 * h;
  obj.constant = ax.dot(ctx.stack.state_cost * ax);
  return obj;
}

ConstraintRows build_constraints(const OcpContext& ctx, const VectorXd& x_hat_o, const VectorXd& psi0) {
  const auto rows = triggered_rows(ctx, x_hat_o);
  const auto hard = ctx.hard_rows.rows();
  ConstraintRows out;
  out.stability_rows = static_cast<int>(rows.size());
  out.A.resize(hard + out.stability_rows, ctx.var_map.size());
  out.l.resize(out.A.rows());
  out.u.resize(out.A.rows());
  out.A.topRows(hard) = ctx.hard_rows;
  out.l.head(hard) = ctx.hard_lower;
  out.u.head(hard) = ctx.hard_upper;
  if (!rows.empty()) {
    const int km = ctx.dec.kappa * ctx.spec.input_dim();
    const MatrixXd Wl = ctx.W * known_control_map(ctx, psi0).topRows(km);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto [j, sign] = rows[k];
      const auto r = hard + static_cast<Eigen::Index>(k);
      out.A.row(r) = Wl.row(j);
      out.l(r) = sign > 0 ? -kInf : ctx.thresholds.zeta;
      out.u(r) = sign > 0 ? -ctx.thresholds.zeta : kInf;
    }
  }
  return out;
}

PolicyParams fallback_point(const OcpContext& ctx, const VectorXd& x_hat_o) {
  return fallback_point(ctx, x_hat_o, ctx.thresholds.zeta);
}

PolicyParams fallback_point(const OcpContext& ctx, const VectorXd& x_hat_o, double zeta) {
  PolicyParams p(ctx.spec.N, ctx.spec.input_dim(), ctx.spec.output_dim());
  if (!ctx.dec.has_orthogonal_part()) return p;
  const int km = ctx.dec.kappa * ctx.spec.input_dim();
  p.eta().head(km) = -ctx.dec.R_kappa_pinv * linalg::matrix_power(ctx.dec.A_o, ctx.dec.kappa) *
                     sat_r_zeta(x_hat_o, ctx.thresholds.r, zeta);
  return p;
}

double constraint_violation(const OcpContext& ctx, const PolicyParams& p, const VectorXd& x_hat_o,
                            const VectorXd& psi0) {
  return -margins(ctx, p, x_hat_o, psi0).minCoeff();
}

OcpSolution solve_ocp(const OcpContext& ctx, const VectorXd& x_hat, const VectorXd& y) {
  const VectorXd psi0 = psi_apply(ctx.psi, y - ctx.spec.C * x_hat);
  const VectorXd x_hat_o = ctx.dec.orthogonal_coordinates(x_hat);

  const Objective obj = build_objective(ctx, x_hat, psi0);
  const ConstraintRows cons = build_constraints(ctx, x_hat_o, psi0);
  const PolicyParams fallback = fallback_point(ctx, x_hat_o);

  QpProblem qp{obj.P, obj.q, cons.A, cons.l, cons.u};
  const QpSolution sol = solve(qp, ctx.qp, ctx.var_map.pack(fallback));

  OcpSolution out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  out.stability_rows = cons.stability_rows;
  if (sol.status == QpStatus::PrimalInfeasible)
    throw InternalContradiction("control QP reported primal infeasibility although the fallback point is feasible");
  if (sol.status != QpStatus::Solved) {
    out.params = fallback;
    out.fallback_used = true;
    out.objective_value = obj.value(ctx.var_map.pack(fallback));
    return out;
  }

  out.params = ctx.var_map.unpack(sol.z);
  // ADMM tolerances leave violations of order eps; pull the iterate toward
  // a strictly feasible point just far enough to restore every row.
  const VectorXd m_sol = margins(ctx, out.params, x_hat_o, psi0);
  if (m_sol.minCoeff() < 0.0) {
    const double zeta_inner =
        ctx.dec.has_orthogonal_part() ? 0.5 * (ctx.thresholds.zeta + zeta_bound(ctx.dec, ctx.u_max)) : 0.0;
    const PolicyParams inner = fallback_point(ctx, x_hat_o, zeta_inner);
    const VectorXd m_in = margins(ctx, inner, x_hat_o, psi0);
    double weight = 0.0;
    for (Eigen::Index i = 0; i < m_sol.size(); ++i)
      if (m_sol(i) < 0.0) weight = std::max(weight, -m_sol(i) / (m_in(i) - m_sol(i)));
    weight = std::min(1.0, weight * (1.0 + 1e-6) + 1e-15);
    PolicyParams repaired = blend(out.params, inner, weight);
    while (margins(ctx, repaired, x_hat_o, psi0).minCoeff() < 0.0 && weight < 1.0) {
      weight = std::min(1.0, 2.0 * weight);
      repaired = blend(out.params, inner, weight);
    }
    out.params = repaired;
    out.repair_weight = weight;
  }
  out.objective_value = obj.value(ctx.var_map.pack(out.params));
  return out;
}

double prior_feasibility_threshold(const Decomposition& dec, double beta_hat, double epsilon_prime, int N_r) {
  if (!dec.has_orthogonal_part()) throw NotApplicableError("no orthogonal part: the prior constraint is vacuous");
  const MatrixXd R = reachability_matrix(dec.A_o, dec.B_o, N_r);
  return linalg::largest_singular_value(linalg::pseudo_inverse(R)) * (beta_hat + 0.5 * epsilon_prime);
}

}  // namespace ofspc
