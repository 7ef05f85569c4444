#pragma once

#include <optional>
#include <string>
#include <vector>

#include "capshare/errors.hpp"

namespace capshare {

// Task placement, one per user. Exactly one of the three holds, which is the
// one-hot constraint x^l + x^a + x^c = 1 by construction.
enum class Placement : int { Local = 0, Cap = 1, Cloud = 2 };

char placement_char(Placement p);
Placement placement_from_char(char c);
const char* placement_name(Placement p);

// Sizes in bits, demand in CPU cycles.
struct TaskProfile {
  double d_in_bits = 0;
  double d_out_bits = 0;
  double cycles = 0;
};

struct UserParams {
  double e_local = 0;    // J, local processing energy
  double t_local = 0;    // s, local processing time
  double e_tx = 0;       // J, uplink transmission energy
  double e_rx = 0;       // J, downlink reception energy
  double eta_up = 0;     // b/s/Hz
  double eta_down = 0;   // b/s/Hz
  double cost_cap = 0;   // CAP usage cost, cost units
  double cost_cloud = 0; // cloud usage cost, cost units
  double rho = 0;        // s/J, weight of energy vs. delay
  std::optional<double> deadline;  // s
};

struct SharedParams {
  double c_ul = 0;      // Hz
  double c_dl = 0;      // Hz
  double c_total = 0;   // Hz, may bind or not relative to c_ul + c_dl
  double f_cap = 0;     // cycles/s, total CAP rate
  double f_cloud = 0;   // cycles/s, per-user cloud rate
  double r_ac = 0;      // b/s, CAP-cloud link rate per user
  double alpha = 0;     // J per cost unit, CAP usage weight
  double beta = 0;      // J per cost unit, cloud usage weight
};

enum class ObjectiveMode { MaxDelay, SumDelay };

struct User {
  TaskProfile task;
  UserParams params;
};

struct Instance {
  std::vector<User> users;
  SharedParams shared;
  ObjectiveMode objective = ObjectiveMode::MaxDelay;

  int size() const { return static_cast<int>(users.size()); }
  // True when every user carries a deadline.
  bool deadlines_set() const;
  // Throws InvalidInstance on any violated member invariant.
  void validate() const;
};

struct DecisionVector {
  std::vector<Placement> placement;

  int size() const { return static_cast<int>(placement.size()); }
  Placement operator[](int i) const { return placement[i]; }

  static DecisionVector uniform(int n, Placement p);
  static DecisionVector all_local(int n) { return uniform(n, Placement::Local); }
  static DecisionVector all_cloud(int n) { return uniform(n, Placement::Cloud); }

  // Compact form, one of {l,a,c} per user, e.g. "laac".
  std::string to_string() const;
  static DecisionVector from_string(const std::string& s);

  bool operator==(const DecisionVector&) const = default;
};

// Per-user resource shares; zero where a placement needs none.
struct Allocation {
  std::vector<double> cu;  // Hz
  std::vector<double> cd;  // Hz
  std::vector<double> fa;  // cycles/s

  static Allocation zero(int n);
  int size() const { return static_cast<int>(cu.size()); }
};

struct CostBreakdown {
  double energy_term = 0;  // sum_i rho_i * (placement-dependent energy)
  double delay_term = 0;   // max or sum of per-user delays
  double total = 0;        // energy_term + delay_term
  std::vector<double> per_user_delay;
};

// Constants that only depend on the task and fixed system rates.
struct DerivedTask {
  double t_ac = 0;             // s, CAP-cloud transfer time
  double t_cloud = 0;          // s, cloud processing time
  double e_cap_weighted = 0;   // E^A: e_tx + e_rx + alpha*cost_cap
  double e_cloud_weighted = 0; // E^C: e_tx + e_rx + beta*cost_cloud
};

DerivedTask derived_constants(const TaskProfile& task, const UserParams& user,
                              const SharedParams& shared);

// Delay of user i under the given decision and allocation. d_out == 0
// contributes no downlink time regardless of cd.
double user_delay(int i, const DecisionVector& decision, const Allocation& alloc,
                  const Instance& instance);

// Total system cost. Validates the allocation against budgets and
// placement-consistency and throws InfeasibleAllocation on violation.
CostBreakdown total_cost(const Instance& instance, const DecisionVector& decision,
                         const Allocation& alloc);

// Energy term alone (the E constant of the reduced resource problem).
double energy_term(const Instance& instance, const DecisionVector& decision);

}  // namespace capshare
