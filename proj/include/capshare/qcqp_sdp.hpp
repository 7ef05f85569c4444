#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <vector>

#include "capshare/model.hpp"
#include "capshare/sdp_ipm.hpp"

namespace capshare {

// Layout of the per-user homogenized variable z_i (0-based):
// [x_local, x_cap, x_cloud, c_up, d_up, c_down, d_down, f_cap, d_cap, hom].
struct ZIndex {
  enum : int {
    XL = 0,
    XA = 1,
    XC = 2,
    CU = 3,
    DU = 4,
    CD = 5,
    DD = 6,
    FA = 7,
    DA = 8,
    HOM = 9
  };
};

inline constexpr int kZDim = 10;
using Mat10 = Eigen::Matrix<double, kZDim, kZDim>;

// Symmetric 10x10 constraint matrices for one user, in scaled units
// (megabits, MHz, gigacycles) so entries are O(1).
struct UserMatrices {
  Mat10 objective;       // energy row; in SumDelay mode also the delay row
  Mat10 delay_self;      // per-user part of the epigraph row (MaxDelay)
  Mat10 bilinear_up;     // couples (c_up, d_up) with the uplink data size
  Mat10 bilinear_down;
  Mat10 bilinear_cap;
  Mat10 placement;       // x_l + x_a + x_c
  Mat10 uplink, downlink, total_bw, cap_rate;  // budget row contributions
  std::array<Mat10, 3> integrality;            // x(x-1) = 0 lifted
  Mat10 deadline;        // strict per-task delay row
};

struct SdpProblem {
  std::vector<UserMatrices> users;
  double rhs_ul = 0, rhs_dl = 0, rhs_total = 0, rhs_cap = 0;  // scaled
  std::vector<double> rhs_deadline;  // seconds; empty when deadlines off
  ObjectiveMode mode = ObjectiveMode::MaxDelay;
  bool deadlines = false;
  bool cap_allowed = true;  // false: local-cloud variant (CAP slots dropped)
  double hz_unscale = 1e6;       // multiply scaled bandwidth entries by this
  double cycles_unscale = 1e9;   // multiply scaled cycle-rate entries by this
  // Upper bound on any delay value at an optimum (the all-local objective);
  // the lowering uses it to cap the otherwise-unconstrained diagonal entries
  // of the lifted blocks, which keeps the dual problem attained.
  double time_cap = 0;

  int n() const { return static_cast<int>(users.size()); }
};

// Builds the homogeneous separable QCQP matrices (and the deadline rows when
// requested). allow_cap = false pins every x_cap to zero by removing the CAP
// columns and the CAP budget row.
SdpProblem build_qcqp(const Instance& instance, bool deadlines_active,
                      bool allow_cap = true);

// Standard-form lowering consumed by the interior-point solver.
SdpData lower_sdp(const SdpProblem& p);

struct SdpSolution {
  std::vector<Eigen::MatrixXd> blocks;  // n+1 psd blocks; [0] is the t block
  double lower_bound = 0;
  std::vector<std::array<double, 3>> marginals;  // clamped and renormalized
  std::vector<double> residuals;  // per-constraint violations, scaled units
  double gap = 0;
  int iterations = 0;
};

// Solves the relaxation. Throws NumericalFailure when the interior-point
// iteration cannot reach tol (callers fall back to the benchmark policies).
SdpSolution solve_sdp(const SdpProblem& problem, double tol = 1e-9);

// Reads the placement marginals from the homogenization row of one block,
// clamps them to [0,1] and renormalizes to sum one. clamp_out (optional)
// receives the largest clamp applied. Throws ClampExceedsTolerance when
// renormalization moves any entry by more than 1e-4.
std::array<double, 3> extract_marginals(const Eigen::MatrixXd& Z,
                                        double tol = 1e-6,
                                        double* clamp_out = nullptr);

// Plain-text dump of the lowered problem (one triplet per line) for
// cross-checking against external solvers.
void dump_sdp(const SdpProblem& p, std::ostream& os);

}  // namespace capshare
