#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hostcap/barrier.hpp"

using namespace hostcap;

TEST_CASE("single variable capped by a bound") {
    BarrierProgram prog(1);
    prog.add_log_term(0, 1.0);
    prog.add_bound(0, 1.0, 2.0);  // z <= 2
    const auto res = prog.solve(Vec::Constant(1, 0.5));
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.z(0) == Catch::Approx(2.0).margin(1e-7));
    CHECK(res.gap <= 1e-8);
}

TEST_CASE("negative-sign objective pushes to the lower bound") {
    BarrierProgram prog(1);
    prog.add_log_term(0, -1.0);   // maximize log(-z)
    prog.add_bound(0, -1.0, 3.0); // -z <= 3, i.e. z >= -3
    const auto res = prog.solve(Vec::Constant(1, -0.5));
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.z(0) == Catch::Approx(-3.0).margin(1e-7));
}

TEST_CASE("symmetric budget splits evenly") {
    BarrierProgram prog(2);
    prog.add_log_term(0, 1.0);
    prog.add_log_term(1, 1.0);
    Vec g(2);
    g << 1.0, 1.0;
    prog.add_row(g, 1.0);  // z0 + z1 <= 1
    const auto res = prog.solve(Vec::Constant(2, 0.1));
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.z(0) == Catch::Approx(0.5).margin(1e-6));
    CHECK(res.z(1) == Catch::Approx(0.5).margin(1e-6));
    CHECK(res.kkt_residual <= 1e-6);
}

TEST_CASE("asymmetric weights follow the analytic optimum") {
    // max log z0 + log z1 s.t. 2 z0 + z1 <= 2; optimum z0 = 0.5, z1 = 1
    BarrierProgram prog(2);
    prog.add_log_term(0, 1.0);
    prog.add_log_term(1, 1.0);
    Vec g(2);
    g << 2.0, 1.0;
    prog.add_row(g, 2.0);
    const auto res = prog.solve(Vec::Constant(2, 0.1));
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.z(0) == Catch::Approx(0.5).margin(1e-6));
    CHECK(res.z(1) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("disk constraint caps the radius") {
    BarrierProgram prog(2);
    prog.add_log_term(0, 1.0);
    prog.add_disk(0, 1, 4.0);  // z0^2 + z1^2 <= 4
    const auto res = prog.solve((Vec(2) << 0.3, 0.1).finished());
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.z(0) == Catch::Approx(2.0).margin(1e-6));
    CHECK(res.z(1) == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("infeasible start recovers through phase one") {
    BarrierProgram prog(1);
    prog.add_log_term(0, 1.0);
    prog.add_bound(0, 1.0, 2.0);
    const auto res = prog.solve(Vec::Constant(1, 5.0));  // outside z <= 2
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.z(0) == Catch::Approx(2.0).margin(1e-7));
}

TEST_CASE("empty feasible set is reported infeasible") {
    BarrierProgram prog(1);
    prog.add_log_term(0, 1.0);   // needs z > 0
    prog.add_bound(0, 1.0, -1.0);  // z <= -1
    const auto res = prog.solve(Vec::Constant(1, 0.5));
    CHECK(res.status == SolveStatus::Infeasible);
    CHECK(res.worst_row >= 0);
}

TEST_CASE("tight box with conflicting rows is infeasible") {
    BarrierProgram prog(1);
    prog.add_log_term(0, 1.0);
    prog.add_bound(0, 1.0, 1.0);    // z <= 1
    prog.add_bound(0, -1.0, -2.0);  // z >= 2
    const auto res = prog.solve(Vec::Constant(1, 0.5));
    CHECK(res.status == SolveStatus::Infeasible);
}

TEST_CASE("active bounds are met to tight tolerance") {
    // the activity checker downstream needs slacks well below 1e-6
    BarrierProgram prog(2);
    prog.add_log_term(0, 1.0);
    Vec g(2);
    g << 1.0, 2.0;     // z0 + 2 z1 <= 1.4
    prog.add_row(g, 1.4);
    prog.add_bound(1, 1.0, 0.2);   // z1 <= 0.2, active because z1 relieves z0
    prog.add_bound(1, -1.0, 0.5);  // z1 >= -0.5
    const auto res = prog.solve((Vec(2) << 0.1, 0.0).finished());
    REQUIRE(res.status == SolveStatus::Optimal);
    // z1 helps z0 only through the budget row; optimum is z1 = -0.5, z0 = 2.4
    CHECK(res.z(1) == Catch::Approx(-0.5).margin(1e-7));
    CHECK(res.z(0) == Catch::Approx(2.4).margin(1e-6));
    CHECK(std::abs(res.z(1) + 0.5) <= 1e-7);
}

TEST_CASE("random feasible perturbations never beat the returned optimum") {
    std::mt19937_64 rng(4);
    BarrierProgram prog(3);
    for (int i = 0; i < 3; ++i) prog.add_log_term(i, 1.0);
    Vec g1(3), g2(3);
    g1 << 1.0, 1.0, 0.5;
    g2 << 0.3, 1.2, 1.0;
    prog.add_row(g1, 1.0);
    prog.add_row(g2, 1.5);
    prog.add_disk(0, 1, 0.8);
    const auto res = prog.solve(Vec::Constant(3, 0.1));
    REQUIRE(res.status == SolveStatus::Optimal);
    const double best = prog.objective(res.z);
    for (int trial = 0; trial < 2000; ++trial) {
        Vec d(3);
        for (int i = 0; i < 3; ++i)
            d(i) = -1.0 + 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53;
        const Vec cand = res.z + 1e-3 * d;
        if (!prog.strictly_feasible(cand)) continue;
        CHECK(prog.objective(cand) <= best + 1e-9);
    }
}
