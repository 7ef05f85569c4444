#include "capshare/qcqp_sdp.hpp"

#include <cmath>

#include "capshare/resource_alloc.hpp"
#include "capshare/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace capshare;
using namespace capshare::test;

namespace {

// Homogenized z for user i at an integral point with tight auxiliary values,
// in the scaled units of the matrices (MHz, megabits, gigacycles).
Eigen::Matrix<double, 10, 1> integral_point(const Instance& inst, int i,
                                            Placement x, double cu_hz,
                                            double cd_hz, double fa_cps) {
  const User& u = inst.users[i];
  Eigen::Matrix<double, 10, 1> z = Eigen::Matrix<double, 10, 1>::Zero();
  z[ZIndex::XL] = x == Placement::Local;
  z[ZIndex::XA] = x == Placement::Cap;
  z[ZIndex::XC] = x == Placement::Cloud;
  z[ZIndex::HOM] = 1.0;
  const bool off = x != Placement::Local;
  if (off) {
    z[ZIndex::CU] = cu_hz * 1e-6;
    z[ZIndex::DU] = u.task.d_in_bits / (u.params.eta_up * cu_hz);
    if (u.task.d_out_bits > 0) {
      z[ZIndex::CD] = cd_hz * 1e-6;
      z[ZIndex::DD] = u.task.d_out_bits / (u.params.eta_down * cd_hz);
    }
  }
  if (x == Placement::Cap) {
    z[ZIndex::FA] = fa_cps * 1e-9;
    z[ZIndex::DA] = u.task.cycles / fa_cps;
  }
  return z;
}

double quad(const Mat10& g, const Eigen::Matrix<double, 10, 1>& z) {
  return z.dot(g * z);
}

// Best decision by direct enumeration, for relaxation-dominance checks.
double enumerate_optimum(const Instance& inst, bool deadlines) {
  const int n = inst.size();
  double best = std::numeric_limits<double>::infinity();
  const int total = static_cast<int>(std::pow(3, n));
  for (int code = 0; code < total; ++code) {
    int c = code;
    DecisionVector d = DecisionVector::all_local(n);
    for (int i = 0; i < n; ++i) {
      d.placement[i] = static_cast<Placement>(c % 3);
      c /= 3;
    }
    AllocationResult r = solve_allocation(inst, d, deadlines);
    if (r.status == AllocationResult::Status::Optimal)
      best = std::min(best, r.objective);
  }
  return best;
}

}  // namespace

TEST_CASE("auxiliary rows are tight at integral points") {
  Instance inst = basic_instance(2);
  SdpProblem p = build_qcqp(inst, false);

  for (Placement x : {Placement::Cap, Placement::Cloud}) {
    auto z = integral_point(inst, 0, x, 4e6, 2e6, 1.5e9);
    CHECK(quad(p.users[0].bilinear_up, z) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(quad(p.users[0].bilinear_down, z) == doctest::Approx(0.0).epsilon(1e-12));
    if (x == Placement::Cap)
      CHECK(quad(p.users[0].bilinear_cap, z) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("integrality and placement rows vanish at one-hot points") {
  Instance inst = basic_instance(1);
  SdpProblem p = build_qcqp(inst, false);
  for (Placement x : {Placement::Local, Placement::Cap, Placement::Cloud}) {
    auto z = integral_point(inst, 0, x, 1e6, 1e6, 1e9);
    for (int j = 0; j < 3; ++j)
      CHECK(quad(p.users[0].integrality[j], z) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(quad(p.users[0].placement, z) == doctest::Approx(1.0));
  }
}

TEST_CASE("epigraph row evaluates the user delay at integral points") {
  Instance inst = basic_instance(1);
  SdpProblem p = build_qcqp(inst, false);
  auto z = integral_point(inst, 0, Placement::Cap, 4e6, 2e6, 1.5e9);
  Allocation a = Allocation::zero(1);
  a.cu[0] = 4e6;
  a.cd[0] = 2e6;
  a.fa[0] = 1.5e9;
  const double want =
      user_delay(0, DecisionVector::from_string("a"), a, inst);
  CHECK(quad(p.users[0].delay_self, z) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("marginal extraction clamps and renormalizes") {
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(10, 10);
  auto set_row = [&](double l, double a, double c) {
    Z(ZIndex::HOM, ZIndex::XL) = l;
    Z(ZIndex::HOM, ZIndex::XA) = a;
    Z(ZIndex::HOM, ZIndex::XC) = c;
  };
  set_row(0.2, 0.3, 0.5);
  auto p = extract_marginals(Z);
  CHECK(p[0] == doctest::Approx(0.2));
  CHECK(p[1] == doctest::Approx(0.3));
  CHECK(p[2] == doctest::Approx(0.5));

  set_row(-1e-9, 0.5, 0.5);
  double clamp = 0;
  p = extract_marginals(Z, 1e-6, &clamp);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == doctest::Approx(0.5));
  CHECK(clamp == doctest::Approx(1e-9));

  set_row(0.4, 0.4, 0.4);
  CHECK_THROWS_AS(extract_marginals(Z), ClampExceedsTolerance);
}

TEST_CASE("relaxation lower-bounds the enumerated optimum") {
  RngStream rng(21);
  for (int trial = 0; trial < 4; ++trial) {
    Instance inst = basic_instance(2 + trial % 2);
    for (auto& u : inst.users) {
      u.task.d_in_bits *= 0.5 + rng.uniform01();
      u.task.cycles *= 0.5 + 2 * rng.uniform01();
      u.params.t_local = 0.5 + 2 * rng.uniform01();
    }
    inst.objective = trial % 2 ? ObjectiveMode::SumDelay : ObjectiveMode::MaxDelay;
    SdpSolution sol = solve_sdp(build_qcqp(inst, false));
    const double opt = enumerate_optimum(inst, false);
    CHECK(sol.lower_bound <= opt * (1 + 1e-6) + 1e-9);
    CHECK(sol.gap <= 1e-9 * (1 + std::abs(sol.lower_bound)) * 10);

    // Lemma-1 shape: marginals live in [0,1] and sum to one.
    for (const auto& m : sol.marginals) {
      double sum = 0;
      for (double v : m) {
        CHECK(v >= -1e-6);
        CHECK(v <= 1 + 1e-6);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
    // Diagonal-link rows of the relaxation.
    for (int i = 1; i <= inst.size(); ++i) {
      const auto& Z = sol.blocks[i];
      for (int j = 0; j < 3; ++j)
        CHECK(Z(j, j) == doctest::Approx(Z(ZIndex::HOM, j)).epsilon(1e-6));
      CHECK(Z(ZIndex::HOM, ZIndex::HOM) == doctest::Approx(1.0).epsilon(1e-8));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Z, Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() >= -1e-7);
    }
  }
}

TEST_CASE("a user with dominant local costs gets a near-certain local marginal") {
  Instance inst = basic_instance(1);
  User& u = inst.users[0];
  u.params.t_local = 0.05;  // far below any offloading delay
  u.params.e_local = 0.01;
  u.params.e_tx = 5.0;
  u.params.e_rx = 5.0;
  SdpSolution sol = solve_sdp(build_qcqp(inst, false));
  CHECK(sol.marginals[0][0] >= 0.99);
}

TEST_CASE("deadline rows never lower the bound") {
  Instance inst = basic_instance(2);
  for (auto& u : inst.users) {
    u.params.t_local = 2.0;
    u.params.deadline = 3.0;
  }
  SdpSolution unconstrained = solve_sdp(build_qcqp(inst, false));
  SdpSolution constrained = solve_sdp(build_qcqp(inst, true));
  CHECK(constrained.lower_bound >=
        unconstrained.lower_bound - 1e-7 * (1 + std::abs(unconstrained.lower_bound)));
}

TEST_CASE("local-cloud variant pins the CAP placement to zero") {
  Instance inst = basic_instance(2);
  SdpSolution sol = solve_sdp(build_qcqp(inst, false, /*allow_cap=*/false));
  for (int i = 1; i <= 2; ++i) {
    CHECK(sol.blocks[i](ZIndex::HOM, ZIndex::XA) == 0.0);
    CHECK(sol.marginals[i - 1][1] == 0.0);
  }
  // The reduced relaxation is still a lower bound for the no-CAP problem.
  const int n = inst.size();
  double best = std::numeric_limits<double>::infinity();
  for (int code = 0; code < (1 << n); ++code) {
    DecisionVector d = DecisionVector::all_local(n);
    for (int i = 0; i < n; ++i)
      if (code & (1 << i)) d.placement[i] = Placement::Cloud;
    best = std::min(best, solve_allocation(inst, d, false).objective);
  }
  CHECK(sol.lower_bound <= best * (1 + 1e-6));
}

TEST_CASE("sdp dump lists every constraint as triplets") {
  Instance inst = basic_instance(1);
  std::ostringstream os;
  dump_sdp(build_qcqp(inst, false), os);
  const std::string s = os.str();
  CHECK(s.find("sdp-dump v1") == 0);
  CHECK(s.find("placement u1") != std::string::npos);
  CHECK(s.find("budget uplink") != std::string::npos);
  CHECK(s.find("epigraph u1") != std::string::npos);
}
