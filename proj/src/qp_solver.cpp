#include "ofspc/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Sparse>

#include "ofspc/errors.hpp"

namespace ofspc {
namespace {

using SparseRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinScale = 1e-4;
constexpr double kMaxScale = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoEqFactor = 1e3;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double clip_scale(double v) {
  if (v < kMinScale) return 1.0;
  return std::min(v, kMaxScale);
}

VectorXd project(const VectorXd& v, const VectorXd& l, const VectorXd& u) { return v.cwiseMax(l).cwiseMin(u); }

void check_problem(const QpProblem& p) {
  const auto n = p.q.size();
  const auto c = p.A.rows();
  if (p.P.rows() != n || p.P.cols() != n) throw InputError("qp: P must be n x n with n = size(q)");
  if (p.A.cols() != n && c > 0) throw InputError("qp: A must have n columns");
  if (p.l.size() != c || p.u.size() != c) throw InputError("qp: l and u must have one entry per row of A");
  if (!p.P.allFinite() || !p.q.allFinite() || !p.A.allFinite()) throw InputError("qp: non-finite problem data");
  for (Eigen::Index i = 0; i < c; ++i) {
    if (std::isnan(p.l(i)) || std::isnan(p.u(i)) || p.l(i) > p.u(i))
      throw InputError("qp: l > u in row " + std::to_string(i));
  }
  const double scale = 1.0 + (n > 0 ? p.P.cwiseAbs().maxCoeff() : 0.0);
  if (n > 0 && (p.P - p.P.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw InputError("qp: P is not symmetric");
  if (n > 0) {
    const MatrixXd shifted = p.P + 1e-7 * MatrixXd::Identity(n, n);
    if (shifted.llt().info() != Eigen::Success) throw InputError("qp: P is not positive semidefinite");
  }
}

/// Problem data after Ruiz equilibration:
///   P_s = c D P D, q_s = c D q, A_s = E A D, bounds E l, E u.
struct Scaled {
  MatrixXd P;
  VectorXd q;
  SparseRow A;
  SparseRow At;
  VectorXd l, u;
  VectorXd D, E;
  double c = 1.0;
};

Scaled scale_problem(const QpProblem& p, int iterations) {
  const auto n = p.q.size();
  const auto m = p.A.rows();
  Scaled s;
  s.P = p.P;
  s.q = p.q;
  MatrixXd A = p.A;
  s.D = VectorXd::Ones(n);
  s.E = VectorXd::Ones(m);

  for (int it = 0; it < iterations; ++it) {
    VectorXd dD(n), dE(m);
    for (Eigen::Index j = 0; j < n; ++j) {
      double norm = s.P.col(j).cwiseAbs().maxCoeff();
      if (m > 0) norm = std::max(norm, A.col(j).cwiseAbs().maxCoeff());
      dD(j) = 1.0 / std::sqrt(clip_scale(norm));
    }
    for (Eigen::Index i = 0; i < m; ++i) dE(i) = 1.0 / std::sqrt(clip_scale(A.row(i).cwiseAbs().maxCoeff()));
    s.P = dD.asDiagonal() * s.P * dD.asDiagonal();
    A = dE.asDiagonal() * A * dD.asDiagonal();
    s.D = s.D.cwiseProduct(dD);
    s.E = s.E.cwiseProduct(dE);
  }
  s.q = s.D.cwiseProduct(p.q);

  if (iterations > 0 && n > 0) {
    double mean_col = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) mean_col += s.P.col(j).cwiseAbs().maxCoeff();
    mean_col /= static_cast<double>(n);
    const double norm = std::max(clip_scale(mean_col), clip_scale(inf_norm(s.q)));
    s.c = 1.0 / norm;
  }
  s.P *= s.c;
  s.q *= s.c;

  s.A = A.sparseView();
  s.At = SparseRow(s.A.transpose());
  s.l = s.E.cwiseProduct(p.l);
  s.u = s.E.cwiseProduct(p.u);
  return s;
}

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
  bool converged() const { return primal <= eps_primal && dual <= eps_dual; }
};

/// Unscaled residuals and tolerances from scaled iterates.
Residuals residuals(const Scaled& s, const VectorXd& x, const VectorXd& z, const VectorXd& y, const QpSettings& st) {
  Residuals r;
  const VectorXd Ax = s.A * x;
  const VectorXd Einv = s.E.cwiseInverse();
  const VectorXd Dinv = s.D.cwiseInverse();
  r.primal = inf_norm(Einv.cwiseProduct(Ax - z));
  r.eps_primal = st.eps_abs + st.eps_rel * std::max(inf_norm(Einv.cwiseProduct(Ax)), inf_norm(Einv.cwiseProduct(z)));

  const VectorXd Px = s.P * x;
  const VectorXd Aty = s.At * y;
  r.dual = inf_norm(Dinv.cwiseProduct(Px + s.q + Aty)) / s.c;
  r.eps_dual = st.eps_abs + st.eps_rel / s.c *
                                std::max({inf_norm(Dinv.cwiseProduct(Px)), inf_norm(Dinv.cwiseProduct(Aty)),
                                          inf_norm(Dinv.cwiseProduct(s.q))});
  return r;
}

bool primal_infeasibility_certificate(const Scaled& s, const VectorXd& dy, double eps) {
  const VectorXd dy_un = s.E.cwiseProduct(dy);
  const double norm = inf_norm(dy_un);
  if (norm <= 0.0) return false;
  const VectorXd Atdy = s.D.cwiseInverse().cwiseProduct(s.At * dy);
  if (inf_norm(Atdy) > eps * norm) return false;
  const VectorXd Einv = s.E.cwiseInverse();
  double support = 0.0;
  for (Eigen::Index i = 0; i < dy.size(); ++i) {
    const double u = s.u(i) * Einv(i), l = s.l(i) * Einv(i);
    if (dy_un(i) > 0) {
      if (std::isinf(u)) {
        if (dy_un(i) > eps * norm) return false;
      } else {
        support += u * dy_un(i);
      }
    } else if (dy_un(i) < 0) {
      if (std::isinf(l)) {
        if (-dy_un(i) > eps * norm) return false;
      } else {
        support += l * dy_un(i);
      }
    }
  }
  return support < -eps * norm;
}

bool dual_infeasibility_certificate(const Scaled& s, const VectorXd& dx, double eps) {
  const VectorXd dx_un = s.D.cwiseProduct(dx);
  const double norm = inf_norm(dx_un);
  if (norm <= 0.0) return false;
  if (s.q.dot(dx) / s.c >= -eps * norm) return false;
  const VectorXd Adx = s.E.cwiseInverse().cwiseProduct(s.A * dx);
  for (Eigen::Index i = 0; i < Adx.size(); ++i) {
    if (!std::isinf(s.u(i)) && Adx(i) > eps * norm) return false;
    if (!std::isinf(s.l(i)) && Adx(i) < -eps * norm) return false;
  }
  const VectorXd Pdx = s.D.cwiseInverse().cwiseProduct(s.P * dx) / s.c;
  return inf_norm(Pdx) <= eps * norm;
}

struct ActiveSet {
  std::vector<int> rows;
  std::vector<signed char> side;  // -1 lower, +1 upper, 0 equality
  bool operator==(const ActiveSet& o) const { return rows == o.rows && side == o.side; }
};

ActiveSet detect_active(const Scaled& s, const VectorXd& z, const VectorXd& y) {
  ActiveSet act;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const bool lower = z(i) - s.l(i) < -y(i);
    const bool upper = s.u(i) - z(i) < y(i);
    if (s.l(i) == s.u(i)) {
      act.rows.push_back(static_cast<int>(i));
      act.side.push_back(0);
    } else if (lower) {
      act.rows.push_back(static_cast<int>(i));
      act.side.push_back(-1);
    } else if (upper) {
      act.rows.push_back(static_cast<int>(i));
      act.side.push_back(1);
    }
  }
  return act;
}

struct Candidate {
  VectorXd x, z, y;  // scaled
};

/// Solves the equality-constrained KKT system on a guessed active set,
/// regularized and refined against the exact system.
std::optional<Candidate> polish(const Scaled& s, const ActiveSet& act, const QpSettings& st) {
  const auto n = s.q.size();
  const auto k = static_cast<Eigen::Index>(act.rows.size());
  MatrixXd Aact(k, n);
  VectorXd b(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const int i = act.rows[r];
    Aact.row(r) = s.A.row(i);
    b(r) = act.side[r] > 0 ? s.u(i) : s.l(i);
  }
  MatrixXd K = MatrixXd::Zero(n + k, n + k);
  K.topLeftCorner(n, n) = s.P;
  K.topRightCorner(n, k) = Aact.transpose();
  K.bottomLeftCorner(k, n) = Aact;
  MatrixXd Kreg = K;
  Kreg.topLeftCorner(n, n).diagonal().array() += st.polish_delta;
  Kreg.bottomRightCorner(k, k).diagonal().array() -= st.polish_delta;

  const Eigen::LDLT<MatrixXd> ldlt(Kreg);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  VectorXd rhs(n + k);
  rhs << -s.q, b;
  VectorXd sol = ldlt.solve(rhs);
  for (int it = 0; it < st.polish_refine; ++it) sol += ldlt.solve(rhs - K * sol);
  if (!sol.allFinite()) return std::nullopt;

  Candidate cand;
  cand.x = sol.head(n);
  cand.y = VectorXd::Zero(s.A.rows());
  for (Eigen::Index r = 0; r < k; ++r) {
    const double yi = sol(n + r);
    // wrong-signed multipliers mean the active-set guess is not optimal
    if (act.side[r] < 0 && yi > st.eps_abs) return std::nullopt;
    if (act.side[r] > 0 && yi < -st.eps_abs) return std::nullopt;
    cand.y(act.rows[r]) = yi;
  }
  for (Eigen::Index r = 0; r < k; ++r) {
    const int i = act.rows[r];
    if (act.side[r] < 0) cand.y(i) = std::min(cand.y(i), 0.0);
    if (act.side[r] > 0) cand.y(i) = std::max(cand.y(i), 0.0);
  }
  cand.z = project(s.A * cand.x, s.l, s.u);
  return cand;
}

}  // namespace

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Solved: return "solved";
    case QpStatus::MaxIterations: return "max_iterations";
    case QpStatus::PrimalInfeasible: return "primal_infeasible";
    case QpStatus::DualInfeasible: return "dual_infeasible";
  }
  return "unknown";
}

KktResiduals kkt_residuals(const QpProblem& p, const VectorXd& z, const VectorXd& dual) {
  KktResiduals r;
  const VectorXd Az = p.A * z;
  for (Eigen::Index i = 0; i < Az.size(); ++i) {
    r.primal = std::max({r.primal, p.l(i) - Az(i), Az(i) - p.u(i)});
    double gap = 0.0;
    if (dual(i) > 0) gap = std::isinf(p.u(i)) ? kInf : std::abs(p.u(i) - Az(i));
    if (dual(i) < 0) gap = std::isinf(p.l(i)) ? kInf : std::abs(Az(i) - p.l(i));
    if (dual(i) != 0) r.complementarity = std::max(r.complementarity, std::abs(dual(i)) * gap);
  }
  r.dual = inf_norm(p.P * z + p.q + p.A.transpose() * dual);
  return r;
}

QpSolution solve(const QpProblem& p, const QpSettings& st, const std::optional<VectorXd>& warm_z,
                 const std::optional<VectorXd>& warm_dual) {
  check_problem(p);
  const auto n = p.q.size();
  const auto m = p.A.rows();
  const Scaled s = scale_problem(p, st.scaling_iterations);

  VectorXd rho(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isinf(p.l(i)) && std::isinf(p.u(i)))
      rho(i) = kRhoMin;
    else if (std::isfinite(p.l(i)) && std::isfinite(p.u(i)) && p.u(i) - p.l(i) <= 1e-9 * (1.0 + std::abs(p.l(i))))
      rho(i) = kRhoEqFactor * st.rho;
    else
      rho(i) = st.rho;
  }
  const VectorXd rho_inv = rho.cwiseInverse();

  MatrixXd M = s.P;
  M.diagonal().array() += st.sigma;
  M += MatrixXd(s.At * rho.asDiagonal() * s.A);
  const Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw NumericalError("qp: ADMM system factorization failed");

  VectorXd x = VectorXd::Zero(n), y = VectorXd::Zero(m);
  if (warm_z) {
    if (warm_z->size() != n) throw InputError("qp: warm start has wrong size");
    x = warm_z->cwiseQuotient(s.D);
  }
  if (warm_dual) {
    if (warm_dual->size() != m) throw InputError("qp: dual warm start has wrong size");
    y = s.c * warm_dual->cwiseQuotient(s.E);
  }
  VectorXd z = project(s.A * x, s.l, s.u);

  auto finish = [&](const VectorXd& xs, const VectorXd& ys, QpStatus status, int iterations, bool polished) {
    QpSolution sol;
    sol.z = s.D.cwiseProduct(xs);
    sol.dual = s.E.cwiseProduct(ys) / s.c;
    sol.status = status;
    sol.iterations = iterations;
    sol.polished = polished;
    const KktResiduals r = kkt_residuals(p, sol.z, sol.dual);
    sol.primal_res = r.primal;
    sol.dual_res = r.dual;
    sol.objective = p.objective(sol.z);
    return sol;
  };

  ActiveSet previous_active, last_polished;
  bool have_previous = false;
  int primal_streak = 0, dual_streak = 0;
  VectorXd x_tilde(n), z_tilde(m), z_relaxed(m), x_prev(n), y_prev(m);

  for (int iter = 1; iter <= st.max_iter; ++iter) {
    x_prev = x;
    y_prev = y;
    x_tilde = llt.solve(st.sigma * x - s.q + s.At * (rho.cwiseProduct(z) - y));
    z_tilde = s.A * x_tilde;
    x = st.alpha * x_tilde + (1.0 - st.alpha) * x;
    z_relaxed = st.alpha * z_tilde + (1.0 - st.alpha) * z;
    const VectorXd z_new = project(z_relaxed + rho_inv.cwiseProduct(y), s.l, s.u);
    y += rho.cwiseProduct(z_relaxed - z_new);
    z = z_new;

    primal_streak = primal_infeasibility_certificate(s, y - y_prev, st.eps_primal_infeasible) ? primal_streak + 1 : 0;
    if (primal_streak >= st.infeasible_streak) {
      QpSolution sol = finish(x, VectorXd::Zero(m), QpStatus::PrimalInfeasible, iter, false);
      sol.dual = s.E.cwiseProduct(y - y_prev) / s.c;
      return sol;
    }
    dual_streak = dual_infeasibility_certificate(s, x - x_prev, st.eps_dual_infeasible) ? dual_streak + 1 : 0;
    if (dual_streak >= st.infeasible_streak) return finish(x - x_prev, VectorXd::Zero(m), QpStatus::DualInfeasible, iter, false);

    if (iter % st.check_interval != 0 && iter != st.max_iter) continue;

    const Residuals r = residuals(s, x, z, y, st);
    if (r.converged()) {
      if (st.polish) {
        if (auto cand = polish(s, detect_active(s, z, y), st)) {
          const Residuals rp = residuals(s, cand->x, cand->z, cand->y, st);
          if (rp.primal <= r.primal + 1e-12 && rp.dual <= r.dual + 1e-12)
            return finish(cand->x, cand->y, QpStatus::Solved, iter, true);
        }
      }
      return finish(x, y, QpStatus::Solved, iter, false);
    }

    // A stable active-set guess is tried directly; it terminates the run
    // when the resulting point already meets the tolerances.
    if (st.polish) {
      ActiveSet active = detect_active(s, z, y);
      if (have_previous && active == previous_active && !(active == last_polished)) {
        last_polished = active;
        if (auto cand = polish(s, active, st)) {
          const Residuals rp = residuals(s, cand->x, cand->z, cand->y, st);
          if (rp.converged()) return finish(cand->x, cand->y, QpStatus::Solved, iter, true);
        }
      }
      previous_active = std::move(active);
      have_previous = true;
    }
  }
  return finish(x, y, QpStatus::MaxIterations, st.max_iter, false);
}

}  // namespace ofspc
