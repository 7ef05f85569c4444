#pragma once

#include "capshare/model.hpp"

namespace capshare {

struct AllocationResult {
  enum class Status { Optimal, Infeasible };
  Status status = Status::Optimal;
  Allocation alloc;        // meaningful when Optimal
  double objective = 0;    // E + delay term, recomputed from alloc
  double kkt_residual = 0; // max of stationarity and scaled duality gap
};

// Optimal resource allocation for a fixed offloading decision: the reduced
// convex problem, with per-task deadline rows when deadlines_active.
// Infeasible can only be returned when deadlines_active; without deadlines
// the problem is always feasible.
AllocationResult solve_allocation(const Instance& instance,
                                  const DecisionVector& decision,
                                  bool deadlines_active, double tol = 1e-8);

struct FeasibilityResult {
  bool feasible = false;
  Allocation alloc;  // witnessing allocation when feasible
};

// Deadline feasibility of a decision. Requires every user to carry a
// deadline; throws MissingDeadline otherwise.
FeasibilityResult feasibility_check(const Instance& instance,
                                    const DecisionVector& decision);

// Relative slack used for deadline satisfaction checks (1e-9 of T_i).
inline constexpr double kDeadlineRelTol = 1e-9;

}  // namespace capshare
