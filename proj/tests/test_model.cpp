#include "capshare/model.hpp"

#include "doctest.h"
#include "test_support.hpp"

using namespace capshare;
using namespace capshare::test;

TEST_CASE("derived constants") {
  SharedParams sh = basic_shared();
  User u = basic_user(6e6, 0, 2e9);

  SUBCASE("cap-cloud transfer time") {
    sh.r_ac = 6e6;
    DerivedTask d = derived_constants(u.task, u.params, sh);
    CHECK(d.t_ac == doctest::Approx(1.0));
  }
  SUBCASE("cloud processing time equals cycle ratio") {
    sh.f_cloud = 2e9;
    DerivedTask d = derived_constants(u.task, u.params, sh);
    CHECK(d.t_cloud == doctest::Approx(1.0));
  }
  SUBCASE("zero alpha ignores the CAP price") {
    u.params.e_tx = 1.0;
    u.params.e_rx = 1.0;
    sh.alpha = 0;
    u.params.cost_cap = 123456.0;
    DerivedTask d = derived_constants(u.task, u.params, sh);
    CHECK(d.e_cap_weighted == doctest::Approx(2.0));
    u.params.cost_cap = 7.0;
    d = derived_constants(u.task, u.params, sh);
    CHECK(d.e_cap_weighted == doctest::Approx(2.0));
  }
}

TEST_CASE("per-user delay") {
  Instance inst;
  inst.shared = basic_shared();
  User u = basic_user(10e6, 2e6, 6e9);
  inst.users.push_back(u);

  Allocation a = Allocation::zero(1);

  SUBCASE("local branch returns t_local") {
    inst.users[0].params.t_local = 1.5;
    DecisionVector d = DecisionVector::all_local(1);
    CHECK(user_delay(0, d, a, inst) == doctest::Approx(1.5));
  }
  SUBCASE("cap delay adds both links and processing") {
    DecisionVector d = DecisionVector::from_string("a");
    a.cu[0] = 5e6;
    a.cd[0] = 1e6;
    a.fa[0] = 3e9;
    CHECK(user_delay(0, d, a, inst) == doctest::Approx(4.0));
  }
  SUBCASE("cloud delay uses fixed transfer and processing terms") {
    inst.shared.r_ac = 12e6;   // t_ac = 1
    inst.shared.f_cloud = 6e9; // t_cloud = 1
    DecisionVector d = DecisionVector::from_string("c");
    a.cu[0] = 5e6;
    a.cd[0] = 1e6;
    CHECK(user_delay(0, d, a, inst) == doctest::Approx(4.0));
  }
  SUBCASE("missing resource raises") {
    DecisionVector d = DecisionVector::from_string("a");
    a.cu[0] = 0;
    a.fa[0] = 1e9;
    CHECK_THROWS_AS(user_delay(0, d, a, inst), DivisionByZeroResource);
  }
  SUBCASE("zero output data needs no downlink") {
    inst.users[0].task.d_out_bits = 0;
    DecisionVector d = DecisionVector::from_string("a");
    a.cu[0] = 5e6;
    a.cd[0] = 0;
    a.fa[0] = 3e9;
    CHECK(user_delay(0, d, a, inst) == doctest::Approx(3.0));
  }
}

TEST_CASE("total cost") {
  SUBCASE("single local user") {
    Instance inst;
    inst.shared = basic_shared();
    User u = basic_user(1e6, 0, 1e9, /*t_local=*/1.0, /*rho=*/0.5);
    u.params.e_local = 2.0;
    inst.users.push_back(u);
    CostBreakdown cb = total_cost(inst, DecisionVector::all_local(1),
                                  Allocation::zero(1));
    CHECK(cb.energy_term == doctest::Approx(1.0));
    CHECK(cb.delay_term == doctest::Approx(1.0));
    CHECK(cb.total == doctest::Approx(2.0));
  }
  SUBCASE("max vs sum of two local delays") {
    Instance inst;
    inst.shared = basic_shared();
    inst.users.push_back(basic_user(1e6, 0, 1e9, 1.0));
    inst.users.push_back(basic_user(1e6, 0, 1e9, 3.0));
    DecisionVector d = DecisionVector::all_local(2);
    CostBreakdown mx = total_cost(inst, d, Allocation::zero(2));
    CHECK(mx.delay_term == doctest::Approx(3.0));
    inst.objective = ObjectiveMode::SumDelay;
    CostBreakdown sm = total_cost(inst, d, Allocation::zero(2));
    CHECK(sm.delay_term == doctest::Approx(4.0));
    CHECK(mx.delay_term <= sm.delay_term);
  }
  SUBCASE("zero rho leaves the delay term alone") {
    Instance inst = basic_instance(3);
    for (auto& u : inst.users) u.params.rho = 0;
    DecisionVector d = DecisionVector::all_local(3);
    CostBreakdown cb = total_cost(inst, d, Allocation::zero(3));
    CHECK(cb.energy_term == 0.0);
    CHECK(cb.total == doctest::Approx(cb.delay_term));
  }
  SUBCASE("budget violations are rejected") {
    Instance inst = basic_instance(1);
    DecisionVector d = DecisionVector::from_string("a");
    Allocation a = Allocation::zero(1);
    a.cu[0] = inst.shared.c_ul * 1.5;
    a.cd[0] = 1e5;
    a.fa[0] = 1e9;
    CHECK_THROWS_AS(total_cost(inst, d, a), InfeasibleAllocation);
  }
  SUBCASE("placement-resource consistency is enforced") {
    Instance inst = basic_instance(1);
    Allocation a = Allocation::zero(1);
    a.fa[0] = 1e9;
    CHECK_THROWS_AS(total_cost(inst, DecisionVector::all_local(1), a),
                    InfeasibleAllocation);
  }
}

TEST_CASE("cost is monotone non-increasing in each offloaded resource") {
  Instance inst = basic_instance(2);
  DecisionVector d = DecisionVector::from_string("ac");
  Allocation a = Allocation::zero(2);
  a.cu[0] = 2e6;
  a.cd[0] = 2e6;
  a.fa[0] = 1e9;
  a.cu[1] = 2e6;
  a.cd[1] = 2e6;
  double prev = total_cost(inst, d, a).total;
  for (double scale : {1.2, 1.5, 2.0}) {
    Allocation b = a;
    b.cu[0] = a.cu[0] * scale;
    b.cd[0] = a.cd[0] * scale;
    b.fa[0] = a.fa[0] * scale;
    b.cu[1] = a.cu[1] * scale;
    b.cd[1] = a.cd[1] * scale;
    const double cur = total_cost(inst, d, b).total;
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("alpha = beta = 0 makes usage prices irrelevant") {
  Instance inst = basic_instance(2);
  inst.shared.alpha = 0;
  inst.shared.beta = 0;
  DecisionVector d = DecisionVector::from_string("ac");
  Allocation a = Allocation::zero(2);
  a.cu[0] = 2e6;
  a.cd[0] = 2e6;
  a.fa[0] = 1e9;
  a.cu[1] = 2e6;
  a.cd[1] = 2e6;
  const double before = total_cost(inst, d, a).total;
  for (auto& u : inst.users) {
    u.params.cost_cap *= 1000;
    u.params.cost_cloud *= 777;
  }
  CHECK(total_cost(inst, d, a).total == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("decision vector string round trip preserves one-hot form") {
  const std::string repr = "lacclal";
  DecisionVector d = DecisionVector::from_string(repr);
  CHECK(d.to_string() == repr);
  CHECK(d.size() == 7);
  CHECK(d[1] == Placement::Cap);
  CHECK_THROWS(DecisionVector::from_string("lxq"));
}

TEST_CASE("instance validation") {
  Instance inst = basic_instance(2);
  CHECK_NOTHROW(inst.validate());
  SUBCASE("empty") {
    inst.users.clear();
    CHECK_THROWS_AS(inst.validate(), InvalidInstance);
  }
  SUBCASE("bad d_in") {
    inst.users[0].task.d_in_bits = 0;
    CHECK_THROWS_AS(inst.validate(), InvalidInstance);
  }
  SUBCASE("deadline below local time") {
    inst.users[0].params.deadline = inst.users[0].params.t_local * 0.5;
    CHECK_THROWS_AS(inst.validate(), InvalidInstance);
  }
  SUBCASE("deadlines_set needs every user") {
    inst.users[0].params.deadline = 2.0;
    CHECK(!inst.deadlines_set());
    inst.users[1].params.deadline = 2.0;
    CHECK(inst.deadlines_set());
  }
}
