#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace capshare {

// Coefficient of a symmetric block matrix: value v at (r,c) and (c,r), so a
// row's pairing with X contributes v*X(r,r) when r == c and 2*v*X(r,c)
// otherwise.
struct BlockEntry {
  int block = 0;
  int r = 0;
  int c = 0;
  double v = 0;
};

struct SdpRow {
  std::string label;
  std::vector<BlockEntry> entries;
  double t_coef = 0;  // coefficient of the single free scalar, if present
  double rhs = 0;
  bool inequality = false;  // true: <A,X> (+ t term) <= rhs
};

// Standard-form block SDP with optional free scalar t:
//   min  sum_b <C_b, X_b> + c_t * t + const
//   s.t. per row: <A_k, X> [+ slack_k] + a_k * t = rhs_k,  X_b psd.
struct SdpData {
  std::vector<int> dims;
  std::vector<SdpRow> rows;
  std::vector<BlockEntry> objective;
  double obj_t_coef = 0;
  double obj_const = 0;
  bool has_t = false;
};

struct SdpIpmOptions {
  double tol = 1e-9;
  int max_iter = 200;
};

struct SdpIpmResult {
  std::vector<Eigen::MatrixXd> blocks;  // primal X
  std::vector<double> y;                // dual multipliers per row
  double t_value = 0;
  double primal_obj = 0;
  double dual_obj = 0;
  double rel_gap = 0;
  double primal_infeas = 0;
  double dual_infeas = 0;
  int iterations = 0;
  bool converged = false;
};

// Infeasible-start primal-dual interior point with Nesterov-Todd scaling,
// specialized to many small dense blocks coupled by a modest number of rows.
SdpIpmResult solve_block_sdp(const SdpData& data, const SdpIpmOptions& opts = {});

}  // namespace capshare
