#include "capshare/qcqp_sdp.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace capshare {

namespace {

constexpr double kHz = 1e-6;      // Hz -> MHz
constexpr double kBits = 1e-6;    // bits -> megabits
constexpr double kCycles = 1e-9;  // cycles -> gigacycles

// Appends the nonzero upper triangle of a symmetric matrix as block entries,
// remapping indices (entries on dropped indices vanish).
void append_entries(const Mat10& g, int block, const std::array<int, kZDim>& map,
                    std::vector<BlockEntry>& out) {
  for (int r = 0; r < kZDim; ++r) {
    for (int c = r; c < kZDim; ++c) {
      if (g(r, c) == 0.0) continue;
      if (map[r] < 0 || map[c] < 0) continue;
      out.push_back({block, map[r], map[c], g(r, c)});
    }
  }
}

std::array<int, kZDim> index_map(bool cap_allowed) {
  std::array<int, kZDim> map{};
  if (cap_allowed) {
    for (int i = 0; i < kZDim; ++i) map[i] = i;
    return map;
  }
  map.fill(-1);
  int next = 0;
  for (int i : {ZIndex::XL, ZIndex::XC, ZIndex::CU, ZIndex::DU, ZIndex::CD,
                ZIndex::DD, ZIndex::HOM})
    map[i] = next++;
  return map;
}

int reduced_dim(bool cap_allowed) { return cap_allowed ? kZDim : 7; }

void set_sym(Mat10& g, int r, int c, double v) {
  g(r, c) = v;
  g(c, r) = v;
}

}  // namespace

SdpProblem build_qcqp(const Instance& inst, bool deadlines_active,
                      bool allow_cap) {
  SdpProblem p;
  p.mode = inst.objective;
  p.deadlines = deadlines_active;
  p.cap_allowed = allow_cap;
  p.rhs_ul = inst.shared.c_ul * kHz;
  p.rhs_dl = inst.shared.c_dl * kHz;
  p.rhs_total = inst.shared.c_total * kHz;
  p.rhs_cap = inst.shared.f_cap * kCycles;

  // All-local objective value: no optimal delay variable can exceed it.
  double local_cost = 0, local_max = 0, local_sum = 0;
  for (const User& u : inst.users) {
    local_cost += u.params.rho * u.params.e_local;
    local_max = std::max(local_max, u.params.t_local);
    local_sum += u.params.t_local;
  }
  local_cost += inst.objective == ObjectiveMode::MaxDelay ? local_max : local_sum;
  p.time_cap = local_cost;

  for (int i = 0; i < inst.size(); ++i) {
    const User& u = inst.users[i];
    const DerivedTask dc = derived_constants(u.task, u.params, inst.shared);
    const double din = u.task.d_in_bits * kBits;
    const double dout = u.task.d_out_bits * kBits;
    const double cycles = u.task.cycles * kCycles;
    const double t_fix = dc.t_ac + dc.t_cloud;

    UserMatrices um;
    um.objective.setZero();
    um.delay_self.setZero();
    um.bilinear_up.setZero();
    um.bilinear_down.setZero();
    um.bilinear_cap.setZero();
    um.placement.setZero();
    um.uplink.setZero();
    um.downlink.setZero();
    um.total_bw.setZero();
    um.cap_rate.setZero();
    for (auto& g : um.integrality) g.setZero();
    um.deadline.setZero();

    set_sym(um.objective, ZIndex::XL, ZIndex::HOM, u.params.rho * u.params.e_local / 2);
    set_sym(um.objective, ZIndex::XA, ZIndex::HOM, u.params.rho * dc.e_cap_weighted / 2);
    set_sym(um.objective, ZIndex::XC, ZIndex::HOM, u.params.rho * dc.e_cloud_weighted / 2);

    set_sym(um.delay_self, ZIndex::XL, ZIndex::HOM, u.params.t_local / 2);
    set_sym(um.delay_self, ZIndex::XC, ZIndex::HOM, t_fix / 2);
    set_sym(um.delay_self, ZIndex::DU, ZIndex::HOM, 0.5);
    set_sym(um.delay_self, ZIndex::DD, ZIndex::HOM, 0.5);
    set_sym(um.delay_self, ZIndex::DA, ZIndex::HOM, 0.5);

    if (p.mode == ObjectiveMode::SumDelay) um.objective += um.delay_self;

    set_sym(um.bilinear_up, ZIndex::XA, ZIndex::HOM, din / 2);
    set_sym(um.bilinear_up, ZIndex::XC, ZIndex::HOM, din / 2);
    set_sym(um.bilinear_up, ZIndex::CU, ZIndex::DU, -u.params.eta_up / 2);

    set_sym(um.bilinear_down, ZIndex::XA, ZIndex::HOM, dout / 2);
    set_sym(um.bilinear_down, ZIndex::XC, ZIndex::HOM, dout / 2);
    set_sym(um.bilinear_down, ZIndex::CD, ZIndex::DD, -u.params.eta_down / 2);

    set_sym(um.bilinear_cap, ZIndex::XA, ZIndex::HOM, cycles / 2);
    set_sym(um.bilinear_cap, ZIndex::FA, ZIndex::DA, -0.5);

    set_sym(um.placement, ZIndex::XL, ZIndex::HOM, 0.5);
    set_sym(um.placement, ZIndex::XA, ZIndex::HOM, 0.5);
    set_sym(um.placement, ZIndex::XC, ZIndex::HOM, 0.5);

    set_sym(um.uplink, ZIndex::CU, ZIndex::HOM, 0.5);
    set_sym(um.downlink, ZIndex::CD, ZIndex::HOM, 0.5);
    set_sym(um.total_bw, ZIndex::CU, ZIndex::HOM, 0.5);
    set_sym(um.total_bw, ZIndex::CD, ZIndex::HOM, 0.5);
    set_sym(um.cap_rate, ZIndex::FA, ZIndex::HOM, 0.5);

    for (int j = 0; j < 3; ++j) {
      um.integrality[j](j, j) = 1.0;
      set_sym(um.integrality[j], j, ZIndex::HOM, -0.5);
    }

    um.deadline = um.delay_self;

    p.users.push_back(std::move(um));
    if (deadlines_active) {
      if (!u.params.deadline)
        throw MissingDeadline("user " + std::to_string(i + 1) +
                              " has no deadline");
      p.rhs_deadline.push_back(*u.params.deadline);
    }
  }
  return p;
}

SdpData lower_sdp(const SdpProblem& p) {
  SdpData d;
  const auto map = index_map(p.cap_allowed);
  const int dim = reduced_dim(p.cap_allowed);
  const int n = p.n();
  d.dims.assign(n, dim);
  d.has_t = p.mode == ObjectiveMode::MaxDelay;
  d.obj_t_coef = d.has_t ? 1.0 : 0.0;

  auto add_row = [&](std::string label, std::vector<BlockEntry> entries,
                     double t_coef, double rhs, bool inequality) {
    if (entries.empty() && t_coef == 0.0) return;  // vanished with the CAP slots
    SdpRow r;
    r.label = std::move(label);
    r.entries = std::move(entries);
    r.t_coef = t_coef;
    r.rhs = rhs;
    r.inequality = inequality;
    d.rows.push_back(std::move(r));
  };

  for (int i = 0; i < n; ++i) {
    const UserMatrices& um = p.users[i];
    const std::string tag = "u" + std::to_string(i + 1);
    std::vector<BlockEntry> es;

    append_entries(um.objective, i, map, d.objective);

    if (d.has_t) {
      es.clear();
      append_entries(um.delay_self, i, map, es);
      add_row("epigraph " + tag, std::move(es), -1.0, 0.0, true);
    }
    es.clear();
    append_entries(um.bilinear_up, i, map, es);
    add_row("uplink-time " + tag, std::move(es), 0, 0.0, true);
    es.clear();
    append_entries(um.bilinear_down, i, map, es);
    add_row("downlink-time " + tag, std::move(es), 0, 0.0, true);
    es.clear();
    append_entries(um.bilinear_cap, i, map, es);
    add_row("cap-time " + tag, std::move(es), 0, 0.0, true);
    es.clear();
    append_entries(um.placement, i, map, es);
    add_row("placement " + tag, std::move(es), 0, 1.0, false);
    for (int j = 0; j < 3; ++j) {
      es.clear();
      append_entries(um.integrality[j], i, map, es);
      add_row("integrality" + std::to_string(j) + " " + tag, std::move(es), 0,
              0.0, false);
    }
    add_row("homogeneous " + tag,
            {{i, map[ZIndex::HOM], map[ZIndex::HOM], 1.0}}, 0, 1.0, false);
    for (int j = 0; j < kZDim - 1; ++j) {
      if (map[j] < 0) continue;
      add_row("nonneg" + std::to_string(j) + " " + tag,
              {{i, std::min(map[j], map[ZIndex::HOM]),
                std::max(map[j], map[ZIndex::HOM]), -0.5}},
              0, 0.0, true);
    }
    // Caps on the lifted diagonal entries that no other row touches. Valid
    // at every rank-1 feasible point and slack at an optimal solution, so
    // the relaxation value is unchanged, but the dual becomes attained and
    // the interior-point iteration stays well conditioned.
    const double b_time = (2 * p.time_cap + 10) * (2 * p.time_cap + 10);
    const std::array<std::pair<int, double>, 6> diag_caps = {{
        {ZIndex::CU, 4 * p.rhs_ul * p.rhs_ul + 1},
        {ZIndex::DU, b_time},
        {ZIndex::CD, 4 * p.rhs_dl * p.rhs_dl + 1},
        {ZIndex::DD, b_time},
        {ZIndex::FA, 4 * p.rhs_cap * p.rhs_cap + 1},
        {ZIndex::DA, b_time},
    }};
    for (auto [j, cap] : diag_caps) {
      if (map[j] < 0) continue;
      add_row("diag-cap" + std::to_string(j) + " " + tag,
              {{i, map[j], map[j], 1.0}}, 0, cap, true);
    }
    if (p.deadlines) {
      es.clear();
      append_entries(um.deadline, i, map, es);
      add_row("deadline " + tag, std::move(es), 0, p.rhs_deadline[i], true);
    }
  }

  std::vector<BlockEntry> ul, dl, tot, fa;
  for (int i = 0; i < n; ++i) {
    append_entries(p.users[i].uplink, i, map, ul);
    append_entries(p.users[i].downlink, i, map, dl);
    append_entries(p.users[i].total_bw, i, map, tot);
    append_entries(p.users[i].cap_rate, i, map, fa);
  }
  add_row("budget uplink", std::move(ul), 0, p.rhs_ul, true);
  add_row("budget downlink", std::move(dl), 0, p.rhs_dl, true);
  add_row("budget total", std::move(tot), 0, p.rhs_total, true);
  add_row("budget cap-rate", std::move(fa), 0, p.rhs_cap, true);

  if (d.has_t) add_row("nonneg t", {}, -1.0, 0.0, true);
  return d;
}

SdpSolution solve_sdp(const SdpProblem& p, double tol) {
  if (tol <= 0) throw Error("tol must be > 0");
  const SdpData data = lower_sdp(p);
  SdpIpmOptions opts;
  opts.tol = tol;
  SdpIpmResult r = solve_block_sdp(data, opts);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "sdp did not reach tol " << tol << " after " << r.iterations
        << " iterations (gap " << r.rel_gap << ", pinf " << r.primal_infeas
        << ", dinf " << r.dual_infeas << ")";
    throw NumericalFailure(msg.str());
  }

  const int n = p.n();
  const auto map = index_map(p.cap_allowed);
  SdpSolution sol;
  sol.blocks.resize(n + 1);
  sol.blocks[0] = Eigen::MatrixXd::Zero(kZDim, kZDim);
  if (p.mode == ObjectiveMode::MaxDelay) {
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(kZDim);
    z0[0] = r.t_value;
    z0[kZDim - 1] = 1.0;
    sol.blocks[0] = z0 * z0.transpose();
  } else {
    sol.blocks[0](kZDim - 1, kZDim - 1) = 1.0;
  }
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(kZDim, kZDim);
    for (int rr = 0; rr < kZDim; ++rr)
      for (int cc = 0; cc < kZDim; ++cc)
        if (map[rr] >= 0 && map[cc] >= 0) Z(rr, cc) = r.blocks[i](map[rr], map[cc]);
    sol.blocks[i + 1] = std::move(Z);
  }
  sol.marginals.reserve(n);
  for (int i = 0; i < n; ++i)
    sol.marginals.push_back(extract_marginals(sol.blocks[i + 1]));
  sol.lower_bound = std::min(r.primal_obj, r.dual_obj);
  sol.gap = std::abs(r.primal_obj - r.dual_obj);
  sol.iterations = r.iterations;

  sol.residuals.reserve(data.rows.size());
  for (const SdpRow& row : data.rows) {
    double ax = row.t_coef * r.t_value;
    for (const BlockEntry& e : row.entries)
      ax += (e.r == e.c ? e.v * r.blocks[e.block](e.r, e.r)
                        : 2 * e.v * r.blocks[e.block](e.r, e.c));
    const double viol = row.inequality ? std::max(0.0, ax - row.rhs)
                                       : std::abs(ax - row.rhs);
    sol.residuals.push_back(viol);
  }
  return sol;
}

std::array<double, 3> extract_marginals(const Eigen::MatrixXd& Z, double tol,
                                        double* clamp_out) {
  std::array<double, 3> raw = {Z(ZIndex::HOM, ZIndex::XL),
                               Z(ZIndex::HOM, ZIndex::XA),
                               Z(ZIndex::HOM, ZIndex::XC)};
  std::array<double, 3> p = raw;
  double clamp_move = 0;
  double sum = 0;
  for (double& v : p) {
    const double c = std::min(1.0, std::max(0.0, v));
    clamp_move = std::max(clamp_move, std::abs(c - v));
    v = c;
    sum += v;
  }
  if (clamp_out) *clamp_out = clamp_move;
  if (sum <= 1e-15)
    throw ClampExceedsTolerance("marginals sum to zero after clamping");
  for (int s = 0; s < 3; ++s) {
    const double renormed = p[s] / sum;
    if (std::abs(renormed - p[s]) > 1e-4)
      throw ClampExceedsTolerance(
          "marginal renormalization moved an entry by more than 1e-4");
    p[s] = renormed;
  }
  (void)tol;
  return p;
}

void dump_sdp(const SdpProblem& p, std::ostream& os) {
  const SdpData d = lower_sdp(p);
  os << "sdp-dump v1\n";
  os << "mode " << (p.mode == ObjectiveMode::MaxDelay ? "max" : "sum")
     << " deadlines " << (p.deadlines ? 1 : 0) << " cap "
     << (p.cap_allowed ? 1 : 0) << " blocks " << d.dims.size() << " dim "
     << (d.dims.empty() ? 0 : d.dims[0]) << "\n";
  os << "units bandwidth=MHz cycles=Gc time=s energy=J\n";
  os << "objective t " << d.obj_t_coef << "\n";
  for (const BlockEntry& e : d.objective)
    os << "  " << e.block << " " << e.r << " " << e.c << " " << e.v << "\n";
  for (const SdpRow& r : d.rows) {
    os << "row \"" << r.label << "\" " << (r.inequality ? "le" : "eq") << " "
       << r.rhs << " t " << r.t_coef << "\n";
    for (const BlockEntry& e : r.entries)
      os << "  " << e.block << " " << e.r << " " << e.c << " " << e.v << "\n";
  }
}

}  // namespace capshare
