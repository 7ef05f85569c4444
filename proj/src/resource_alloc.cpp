#include "capshare/resource_alloc.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace capshare {

namespace {

// One smooth convex constraint f(z) <= 0 of the shape
//   f(z) = c0 + sum_k inv_coef_k / z[inv_var_k] + sum_k lin_coef_k * z[lin_var_k]
// with all inv coefficients positive, so the inverse terms are convex on z > 0.
struct Row {
  std::vector<std::pair<int, double>> inv;
  std::vector<std::pair<int, double>> lin;
  double c0 = 0;

  double eval(const Eigen::VectorXd& z) const {
    double f = c0;
    for (auto [v, a] : inv) {
      if (z[v] <= 0) return std::numeric_limits<double>::infinity();
      f += a / z[v];
    }
    for (auto [v, a] : lin) f += a * z[v];
    return f;
  }
};

struct BarrierOutcome {
  Eigen::VectorXd z;
  double tau = 0;
  // Certified suboptimality of obj.z: barrier gap plus the Newton-decrement
  // correction for an approximately centered point.
  double gap_abs = 0;
  bool ok = false;
};

// Log-barrier interior point with damped Newton centering and backtracking
// line search. obj is linear; z0 must be strictly feasible. Runs until the
// barrier gap m/tau drops below tol_rel * (1 + |obj.z + obj_offset|), or
// stop_when(z) fires (used by the feasibility phase to exit early once a
// strictly interior point is certified).
BarrierOutcome barrier_minimize(const std::vector<Row>& rows,
                                const Eigen::VectorXd& obj, double obj_offset,
                                Eigen::VectorXd z0, double tol_rel,
                                const std::function<bool(const Eigen::VectorXd&)>&
                                    stop_when = nullptr) {
  const int n = static_cast<int>(z0.size());
  const int m = static_cast<int>(rows.size());
  const double mu = 50.0;
  const int max_outer = 40;
  const int max_newton = 60;

  Eigen::VectorXd z = std::move(z0);
  Eigen::VectorXd fval(m), ftrial(m), g(n), d(n), ztrial(n);
  Eigen::MatrixXd H(n, n);
  std::vector<double> ge;
  std::vector<int> gi;

  auto eval_all = [&](const Eigen::VectorXd& p, Eigen::VectorXd& out) {
    for (int j = 0; j < m; ++j) {
      out[j] = rows[j].eval(p);
      if (!(out[j] < 0)) return false;
    }
    return true;
  };

  if (!eval_all(z, fval)) return {};  // caller bug: start not interior

  // One damped Newton step on tau*obj.z + phi(z). Returns the decrement^2
  // or -1 when no progress was possible.
  auto newton_step = [&](double tau) -> double {
    g = tau * obj;
    H.setZero();
    for (int j = 0; j < m; ++j) {
      const Row& r = rows[j];
      const double inv_s = 1.0 / (-fval[j]);
      const double inv_s2 = inv_s * inv_s;
      ge.clear();
      gi.clear();
      for (auto [v, a] : r.inv) {
        gi.push_back(v);
        ge.push_back(-a / (z[v] * z[v]));
        H(v, v) += (2 * a / (z[v] * z[v] * z[v])) * inv_s;
      }
      for (auto [v, a] : r.lin) {
        gi.push_back(v);
        ge.push_back(a);
      }
      const int cnt = static_cast<int>(gi.size());
      for (int p = 0; p < cnt; ++p) {
        g[gi[p]] += ge[p] * inv_s;
        for (int q = 0; q <= p; ++q) {
          const double w = ge[p] * ge[q] * inv_s2;
          H(gi[p], gi[q]) += w;
          if (gi[p] != gi[q]) H(gi[q], gi[p]) += w;
        }
      }
    }
    d = H.ldlt().solve(-g);
    const double lambda2 = -g.dot(d);
    if (!(lambda2 > 2e-13))  // at the center (or its floating-point floor)
      return lambda2 > 0 ? lambda2 : 0.0;

    double psi = tau * obj.dot(z);
    for (int j = 0; j < m; ++j) psi -= std::log(-fval[j]);
    double alpha = 1.0;
    for (int ls = 0; ls < 60; ++ls) {
      ztrial = z + alpha * d;
      if (eval_all(ztrial, ftrial)) {
        double psit = tau * obj.dot(ztrial);
        for (int j = 0; j < m; ++j) psit -= std::log(-ftrial[j]);
        if (psit <= psi - 0.01 * alpha * lambda2) {
          z = ztrial;
          fval.swap(ftrial);
          return lambda2;
        }
      }
      alpha *= 0.5;
    }
    return -1;
  };

  double tau = 1.0;
  BarrierOutcome res;
  // With the barrier multipliers 1/(tau*slack), a lambda-centered point has
  // exact stationarity of the Lagrangian up to the decrement and
  // complementarity products of exactly 1/tau, so (m + 2 sqrt(m))/tau bounds
  // the suboptimality once lambda <= 1/2.
  const double gap_factor = m + 2 * std::sqrt(static_cast<double>(m));
  for (int outer = 0; outer < max_outer; ++outer) {
    // Center until the decrement is tiny; the gap certificate below only
    // needs lambda <= 1/2, which survives the floating-point floor that the
    // tight threshold can hit at large tau.
    double lambda2 = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_newton; ++it) {
      const double l2 = newton_step(tau);
      if (l2 < 0) break;  // stalled line search
      lambda2 = l2;
      if (lambda2 * 0.5 <= 1e-13) break;
    }
    const bool centered = lambda2 <= 0.25;

    if (stop_when && stop_when(z)) {
      res.z = z;
      res.tau = tau;
      res.ok = true;
      return res;
    }

    const double scale = 1.0 + std::abs(obj.dot(z) + obj_offset);
    if (centered && gap_factor / tau <= 0.5 * tol_rel * scale) {
      res.z = z;
      res.tau = tau;
      res.gap_abs = gap_factor / tau;
      res.ok = true;
      return res;
    }
    tau *= mu;
  }
  return res;  // ok = false: tolerance not met
}

// Scaled view of the resource problem for one fixed decision. Resource
// variables are budget shares in (0,1); each offloaded user's delay is
// fixed + sum of seconds-coefficients over its shares.
struct ReducedProblem {
  int n_vars = 0;
  int t_offset = 0;  // == n_vars; t variables appended after resources
  std::vector<int> var_user;
  std::vector<int> var_kind;       // 0 = cu, 1 = cd, 2 = fa
  std::vector<double> var_budget;  // unscale factor

  struct UserTerms {
    int user = -1;
    double fixed = 0;  // s, resource-independent delay part
    std::vector<std::pair<int, double>> inv;
  };
  std::vector<UserTerms> offloaded;

  double local_max = 0;
  double local_sum = 0;
  bool has_local = false;
  double energy = 0;
};

ReducedProblem build_reduced(const Instance& inst, const DecisionVector& dec) {
  ReducedProblem rp;
  rp.energy = energy_term(inst, dec);
  const auto& sh = inst.shared;
  for (int i = 0; i < inst.size(); ++i) {
    const User& u = inst.users[i];
    if (dec[i] == Placement::Local) {
      rp.has_local = true;
      rp.local_max = std::max(rp.local_max, u.params.t_local);
      rp.local_sum += u.params.t_local;
      continue;
    }
    ReducedProblem::UserTerms ut;
    ut.user = i;
    auto add_var = [&](int kind, double budget, double seconds) {
      const int v = rp.n_vars++;
      rp.var_user.push_back(i);
      rp.var_kind.push_back(kind);
      rp.var_budget.push_back(budget);
      ut.inv.emplace_back(v, seconds);
    };
    add_var(0, sh.c_ul, u.task.d_in_bits / (u.params.eta_up * sh.c_ul));
    if (u.task.d_out_bits > 0)
      add_var(1, sh.c_dl, u.task.d_out_bits / (u.params.eta_down * sh.c_dl));
    if (dec[i] == Placement::Cap) {
      add_var(2, sh.f_cap, u.task.cycles / sh.f_cap);
    } else {
      const DerivedTask dc = derived_constants(u.task, u.params, sh);
      ut.fixed = dc.t_ac + dc.t_cloud;
    }
    rp.offloaded.push_back(std::move(ut));
  }
  rp.t_offset = rp.n_vars;
  return rp;
}

void add_budget_rows(const ReducedProblem& rp, const Instance& inst,
                     std::vector<Row>& rows) {
  const auto& sh = inst.shared;
  Row ul, dl, tot, fa;
  for (int v = 0; v < rp.t_offset; ++v) {
    switch (rp.var_kind[v]) {
      case 0:
        ul.lin.emplace_back(v, 1.0);
        tot.lin.emplace_back(v, sh.c_ul / sh.c_total);
        break;
      case 1:
        dl.lin.emplace_back(v, 1.0);
        tot.lin.emplace_back(v, sh.c_dl / sh.c_total);
        break;
      case 2:
        fa.lin.emplace_back(v, 1.0);
        break;
    }
  }
  for (Row* r : {&ul, &dl, &tot, &fa}) {
    if (r->lin.empty()) continue;
    r->c0 = -1.0;
    rows.push_back(std::move(*r));
  }
  for (int v = 0; v < rp.t_offset; ++v) {
    Row r;
    r.lin.emplace_back(v, -1.0);
    rows.push_back(std::move(r));
  }
}

// Strictly interior shares: equal splits at 90% of each budget, shrunk if
// the total-bandwidth row would come too close.
Eigen::VectorXd initial_shares(const ReducedProblem& rp, const Instance& inst,
                               int extra_vars) {
  int n_u = 0, n_d = 0, n_f = 0;
  for (int k : rp.var_kind) (k == 0 ? n_u : k == 1 ? n_d : n_f)++;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(rp.t_offset + extra_vars);
  double tot_used = 0;
  const auto& sh = inst.shared;
  for (int v = 0; v < rp.t_offset; ++v) {
    const int cnt = rp.var_kind[v] == 0 ? n_u : rp.var_kind[v] == 1 ? n_d : n_f;
    z[v] = 0.9 / cnt;
    if (rp.var_kind[v] == 0) tot_used += z[v] * sh.c_ul / sh.c_total;
    if (rp.var_kind[v] == 1) tot_used += z[v] * sh.c_dl / sh.c_total;
  }
  if (tot_used > 0.9) {
    const double shrink = 0.9 / tot_used;
    for (int v = 0; v < rp.t_offset; ++v)
      if (rp.var_kind[v] != 2) z[v] *= shrink;
  }
  return z;
}

double user_delay_at(const ReducedProblem::UserTerms& ut,
                     const Eigen::VectorXd& z) {
  double d = ut.fixed;
  for (auto [v, a] : ut.inv) d += a / z[v];
  return d;
}

Allocation unscale(const ReducedProblem& rp, const Eigen::VectorXd& z, int n) {
  Allocation a = Allocation::zero(n);
  for (int v = 0; v < rp.t_offset; ++v) {
    const double val = z[v] * rp.var_budget[v];
    switch (rp.var_kind[v]) {
      case 0: a.cu[rp.var_user[v]] = val; break;
      case 1: a.cd[rp.var_user[v]] = val; break;
      case 2: a.fa[rp.var_user[v]] = val; break;
    }
  }
  return a;
}

// Cheapest possible delay for one offloaded user: sole claimant of every
// budget it can touch. Any allocation does at least this badly.
double sole_user_delay_floor(const ReducedProblem::UserTerms& ut,
                             const ReducedProblem& rp, const Instance& inst) {
  double d = ut.fixed;
  const auto& sh = inst.shared;
  for (auto [v, a] : ut.inv) {
    double cap = 1.0;
    if (rp.var_kind[v] != 2)
      cap = std::min(1.0, sh.c_total / (rp.var_kind[v] == 0 ? sh.c_ul : sh.c_dl));
    d += a / cap;
  }
  return d;
}

}  // namespace

AllocationResult solve_allocation(const Instance& inst,
                                  const DecisionVector& dec,
                                  bool deadlines_active, double tol) {
  AllocationResult out;
  const int n = inst.size();
  const bool max_mode = inst.objective == ObjectiveMode::MaxDelay;
  ReducedProblem rp = build_reduced(inst, dec);

  if (deadlines_active) {
    for (int i = 0; i < n; ++i) {
      if (!inst.users[i].params.deadline)
        throw MissingDeadline("user " + std::to_string(i + 1) +
                              " has no deadline");
      if (dec[i] == Placement::Local &&
          inst.users[i].params.t_local >
              *inst.users[i].params.deadline * (1 + kDeadlineRelTol)) {
        out.status = AllocationResult::Status::Infeasible;
        return out;
      }
    }
    for (const auto& ut : rp.offloaded) {
      const double T = *inst.users[ut.user].params.deadline;
      if (sole_user_delay_floor(ut, rp, inst) > T * (1 + kDeadlineRelTol)) {
        out.status = AllocationResult::Status::Infeasible;
        return out;
      }
    }
  }

  if (rp.offloaded.empty()) {
    out.alloc = Allocation::zero(n);
    out.objective = total_cost(inst, dec, out.alloc).total;
    out.kkt_residual = 0;
    return out;
  }

  Eigen::VectorXd start;
  std::vector<double> t_eff(rp.offloaded.size(), 0.0);

  if (deadlines_active) {
    // Phase I: minimize the worst relative deadline violation s over the
    // budget region. Early exit once s < -1e-6 certifies an interior point.
    std::vector<Row> rows;
    const int s_var = rp.t_offset;
    for (const auto& ut : rp.offloaded) {
      Row r;
      const double T = *inst.users[ut.user].params.deadline;
      r.inv.reserve(ut.inv.size());
      for (auto [v, a] : ut.inv) r.inv.emplace_back(v, a / T);
      r.lin.emplace_back(s_var, -1.0);
      r.c0 = ut.fixed / T - 1.0;
      rows.push_back(std::move(r));
    }
    add_budget_rows(rp, inst, rows);

    Eigen::VectorXd z0 = initial_shares(rp, inst, 1);
    double worst = 0;
    for (const auto& ut : rp.offloaded) {
      const double T = *inst.users[ut.user].params.deadline;
      worst = std::max(worst, (user_delay_at(ut, z0) - T) / T);
    }
    z0[s_var] = worst + 1.0;
    Eigen::VectorXd obj = Eigen::VectorXd::Zero(rp.t_offset + 1);
    obj[s_var] = 1.0;
    auto interior = [&](const Eigen::VectorXd& z) { return z[s_var] < -1e-6; };
    BarrierOutcome ph1 = barrier_minimize(rows, obj, 0.0, z0, 1e-11, interior);
    if (!ph1.ok) throw NumericalFailure("deadline feasibility phase stalled");
    const double s_final = ph1.z[s_var];
    if (s_final > kDeadlineRelTol) {
      out.status = AllocationResult::Status::Infeasible;
      return out;
    }
    for (std::size_t k = 0; k < rp.offloaded.size(); ++k) {
      const double T = *inst.users[rp.offloaded[k].user].params.deadline;
      t_eff[k] = T * (1 + std::max(s_final, 0.0) + kDeadlineRelTol);
    }
    start = ph1.z.head(rp.t_offset);
  } else {
    start = initial_shares(rp, inst, 0);
  }

  // Phase II: the objective problem in epigraph form. MaxDelay bounds every
  // delay by one shared t; SumDelay gives each offloaded user its own t_i.
  const int n_off = static_cast<int>(rp.offloaded.size());
  const int n_t = max_mode ? 1 : n_off;
  std::vector<Row> rows;
  for (int k = 0; k < n_off; ++k) {
    Row r;
    r.inv = rp.offloaded[k].inv;
    r.lin.emplace_back(rp.t_offset + (max_mode ? 0 : k), -1.0);
    r.c0 = rp.offloaded[k].fixed;
    rows.push_back(std::move(r));
    if (deadlines_active) {
      Row rd;
      rd.inv = rp.offloaded[k].inv;
      rd.c0 = rp.offloaded[k].fixed - t_eff[k];
      rows.push_back(std::move(rd));
    }
  }
  if (max_mode && rp.has_local) {
    Row r;  // t >= max local processing time
    r.lin.emplace_back(rp.t_offset, -1.0);
    r.c0 = rp.local_max;
    rows.push_back(std::move(r));
  }
  add_budget_rows(rp, inst, rows);

  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(rp.t_offset + n_t);
  z0.head(rp.t_offset) = start;
  for (int k = 0; k < n_off; ++k) {
    const double dl = user_delay_at(rp.offloaded[k], z0);
    const int tv = rp.t_offset + (max_mode ? 0 : k);
    z0[tv] = std::max(z0[tv], 1.5 * std::max(dl, rp.local_max) + 1.0);
  }
  Eigen::VectorXd obj = Eigen::VectorXd::Zero(rp.t_offset + n_t);
  for (int k = 0; k < n_t; ++k) obj[rp.t_offset + k] = 1.0;
  const double obj_offset = rp.energy + (max_mode ? 0.0 : rp.local_sum);

  BarrierOutcome ph2 = barrier_minimize(rows, obj, obj_offset, z0, tol);
  if (!ph2.ok) throw NumericalFailure("resource allocation solve stalled");

  out.alloc = unscale(rp, ph2.z, n);
  out.objective = total_cost(inst, dec, out.alloc).total;
  out.kkt_residual = ph2.gap_abs / (1.0 + std::abs(out.objective));
  return out;
}

FeasibilityResult feasibility_check(const Instance& inst,
                                    const DecisionVector& dec) {
  for (int i = 0; i < inst.size(); ++i)
    if (!inst.users[i].params.deadline)
      throw MissingDeadline("user " + std::to_string(i + 1) +
                            " has no deadline");
  AllocationResult r = solve_allocation(inst, dec, /*deadlines_active=*/true);
  FeasibilityResult fr;
  fr.feasible = r.status == AllocationResult::Status::Optimal;
  if (fr.feasible) fr.alloc = std::move(r.alloc);
  return fr;
}

}  // namespace capshare
