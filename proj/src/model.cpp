#include "capshare/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace capshare {

namespace {

constexpr double kBudgetRelTol = 1e-9;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInstance(what);
}

}  // namespace

char placement_char(Placement p) {
  switch (p) {
    case Placement::Local: return 'l';
    case Placement::Cap: return 'a';
    case Placement::Cloud: return 'c';
  }
  return '?';
}

Placement placement_from_char(char c) {
  switch (c) {
    case 'l': return Placement::Local;
    case 'a': return Placement::Cap;
    case 'c': return Placement::Cloud;
  }
  throw Error(std::string("unknown placement character '") + c + "'");
}

const char* placement_name(Placement p) {
  switch (p) {
    case Placement::Local: return "local";
    case Placement::Cap: return "cap";
    case Placement::Cloud: return "cloud";
  }
  return "?";
}

bool Instance::deadlines_set() const {
  return !users.empty() &&
         std::all_of(users.begin(), users.end(),
                     [](const User& u) { return u.params.deadline.has_value(); });
}

void Instance::validate() const {
  require(!users.empty(), "instance has no users");
  require(shared.c_ul > 0, "c_ul must be > 0");
  require(shared.c_dl > 0, "c_dl must be > 0");
  require(shared.c_total > 0, "c_total must be > 0");
  require(shared.f_cap > 0, "f_a must be > 0");
  require(shared.f_cloud > 0, "f_c must be > 0");
  require(shared.r_ac > 0, "r_ac must be > 0");
  require(shared.alpha >= 0, "alpha must be >= 0");
  require(shared.beta >= 0, "beta must be >= 0");
  for (int i = 0; i < size(); ++i) {
    const auto& u = users[i];
    const std::string at = " (user " + std::to_string(i + 1) + ")";
    require(u.task.d_in_bits > 0, "d_in must be > 0" + at);
    require(u.task.d_out_bits >= 0, "d_out must be >= 0" + at);
    require(u.task.cycles > 0, "y must be > 0" + at);
    require(u.params.e_local > 0, "e_l must be > 0" + at);
    require(u.params.t_local > 0, "t_l must be > 0" + at);
    require(u.params.e_tx > 0, "e_t must be > 0" + at);
    require(u.params.e_rx > 0, "e_r must be > 0" + at);
    require(u.params.eta_up > 0, "eta_u must be > 0" + at);
    require(u.params.eta_down > 0, "eta_d must be > 0" + at);
    require(u.params.cost_cap > 0, "c_a must be > 0" + at);
    require(u.params.cost_cloud > 0, "c_c must be > 0" + at);
    require(u.params.rho >= 0, "rho must be >= 0" + at);
    if (u.params.deadline) {
      require(*u.params.deadline > 0, "deadline must be > 0" + at);
      require(u.params.t_local <= *u.params.deadline * (1 + kBudgetRelTol),
              "t_l exceeds the deadline" + at);
    }
  }
}

DecisionVector DecisionVector::uniform(int n, Placement p) {
  DecisionVector d;
  d.placement.assign(static_cast<std::size_t>(n), p);
  return d;
}

std::string DecisionVector::to_string() const {
  std::string s;
  s.reserve(placement.size());
  for (Placement p : placement) s.push_back(placement_char(p));
  return s;
}

DecisionVector DecisionVector::from_string(const std::string& s) {
  DecisionVector d;
  d.placement.reserve(s.size());
  for (char c : s) d.placement.push_back(placement_from_char(c));
  return d;
}

Allocation Allocation::zero(int n) {
  Allocation a;
  a.cu.assign(static_cast<std::size_t>(n), 0.0);
  a.cd.assign(static_cast<std::size_t>(n), 0.0);
  a.fa.assign(static_cast<std::size_t>(n), 0.0);
  return a;
}

DerivedTask derived_constants(const TaskProfile& task, const UserParams& user,
                              const SharedParams& shared) {
  DerivedTask d;
  d.t_ac = (task.d_in_bits + task.d_out_bits) / shared.r_ac;
  d.t_cloud = task.cycles / shared.f_cloud;
  d.e_cap_weighted = user.e_tx + user.e_rx + shared.alpha * user.cost_cap;
  d.e_cloud_weighted = user.e_tx + user.e_rx + shared.beta * user.cost_cloud;
  return d;
}

double user_delay(int i, const DecisionVector& decision, const Allocation& alloc,
                  const Instance& instance) {
  const User& u = instance.users[i];
  switch (decision[i]) {
    case Placement::Local:
      return u.params.t_local;
    case Placement::Cap: {
      if (alloc.cu[i] <= 0)
        throw DivisionByZeroResource("cap user " + std::to_string(i + 1) +
                                     " has cu = 0");
      if (alloc.fa[i] <= 0)
        throw DivisionByZeroResource("cap user " + std::to_string(i + 1) +
                                     " has fa = 0");
      double d = u.task.d_in_bits / (u.params.eta_up * alloc.cu[i]) +
                 u.task.cycles / alloc.fa[i];
      if (u.task.d_out_bits > 0) {
        if (alloc.cd[i] <= 0)
          throw DivisionByZeroResource("cap user " + std::to_string(i + 1) +
                                       " has cd = 0");
        d += u.task.d_out_bits / (u.params.eta_down * alloc.cd[i]);
      }
      return d;
    }
    case Placement::Cloud: {
      if (alloc.cu[i] <= 0)
        throw DivisionByZeroResource("cloud user " + std::to_string(i + 1) +
                                     " has cu = 0");
      const DerivedTask dc = derived_constants(u.task, u.params, instance.shared);
      double d = u.task.d_in_bits / (u.params.eta_up * alloc.cu[i]) + dc.t_ac +
                 dc.t_cloud;
      if (u.task.d_out_bits > 0) {
        if (alloc.cd[i] <= 0)
          throw DivisionByZeroResource("cloud user " + std::to_string(i + 1) +
                                       " has cd = 0");
        d += u.task.d_out_bits / (u.params.eta_down * alloc.cd[i]);
      }
      return d;
    }
  }
  throw Error("unreachable placement");
}

double energy_term(const Instance& instance, const DecisionVector& decision) {
  double e = 0;
  for (int i = 0; i < instance.size(); ++i) {
    const User& u = instance.users[i];
    switch (decision[i]) {
      case Placement::Local:
        e += u.params.rho * u.params.e_local;
        break;
      case Placement::Cap: {
        const DerivedTask dc = derived_constants(u.task, u.params, instance.shared);
        e += u.params.rho * dc.e_cap_weighted;
        break;
      }
      case Placement::Cloud: {
        const DerivedTask dc = derived_constants(u.task, u.params, instance.shared);
        e += u.params.rho * dc.e_cloud_weighted;
        break;
      }
    }
  }
  return e;
}

CostBreakdown total_cost(const Instance& instance, const DecisionVector& decision,
                         const Allocation& alloc) {
  const int n = instance.size();
  if (decision.size() != n || alloc.size() != n)
    throw InfeasibleAllocation("decision/allocation size mismatch");

  double sum_cu = 0, sum_cd = 0, sum_fa = 0;
  for (int i = 0; i < n; ++i) {
    if (alloc.cu[i] < 0 || alloc.cd[i] < 0 || alloc.fa[i] < 0)
      throw InfeasibleAllocation("negative resource for user " +
                                 std::to_string(i + 1));
    if (decision[i] != Placement::Cap && alloc.fa[i] != 0)
      throw InfeasibleAllocation("fa > 0 for non-cap user " +
                                 std::to_string(i + 1));
    if (decision[i] == Placement::Local && (alloc.cu[i] != 0 || alloc.cd[i] != 0))
      throw InfeasibleAllocation("bandwidth > 0 for local user " +
                                 std::to_string(i + 1));
    sum_cu += alloc.cu[i];
    sum_cd += alloc.cd[i];
    sum_fa += alloc.fa[i];
  }
  const auto& sh = instance.shared;
  auto within = [](double used, double budget) {
    return used <= budget * (1 + kBudgetRelTol);
  };
  if (!within(sum_cu, sh.c_ul)) throw InfeasibleAllocation("uplink budget exceeded");
  if (!within(sum_cd, sh.c_dl)) throw InfeasibleAllocation("downlink budget exceeded");
  if (!within(sum_cu + sum_cd, sh.c_total))
    throw InfeasibleAllocation("total bandwidth budget exceeded");
  if (!within(sum_fa, sh.f_cap)) throw InfeasibleAllocation("CAP rate budget exceeded");

  CostBreakdown cb;
  cb.per_user_delay.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    cb.per_user_delay[i] = user_delay(i, decision, alloc, instance);
  cb.energy_term = energy_term(instance, decision);
  if (instance.objective == ObjectiveMode::MaxDelay) {
    cb.delay_term = *std::max_element(cb.per_user_delay.begin(),
                                      cb.per_user_delay.end());
  } else {
    cb.delay_term = 0;
    for (double d : cb.per_user_delay) cb.delay_term += d;
  }
  cb.total = cb.energy_term + cb.delay_term;
  return cb;
}

}  // namespace capshare
