#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hostcap/distflow.hpp"
#include "hostcap/feeder.hpp"
#include "hostcap/sensitivity.hpp"
#include "oracles.hpp"

using namespace hostcap;

namespace {

constexpr double kZBase = 17.3056;
const double kR = 10.0 / kZBase;
const double kX = 15.0 / kZBase;

FeederNetwork two_node() {
    FeederSpec s;
    s.v0_mag = 1.0;
    s.base_kv = 4.16;
    s.base_mva = 1.0;
    s.labels = {"0", "1"};
    s.v_min_mag = {0.0, 0.95};
    s.v_max_mag = {2.0, 1.05};
    s.edges.push_back({0, 1, kR, kX, 0.5});
    return build_network(s);
}

InjectionProfile injections(int n, std::initializer_list<std::pair<int, double>> ps,
                            std::initializer_list<std::pair<int, double>> qs = {}) {
    InjectionProfile inj{Vec::Zero(n), Vec::Zero(n)};
    for (auto [i, v] : ps) inj.p(i) = v;
    for (auto [i, v] : qs) inj.q(i) = v;
    return inj;
}

}  // namespace

TEST_CASE("no-load network is the identity solution") {
    const FeederNetwork net = two_node();
    const SensitivityMatrices m = build_matrices(net);
    const PowerFlowSolution sol = solve_distflow(net, m, injections(1, {}));
    REQUIRE(sol.converged);
    CHECK(sol.V(0) == Catch::Approx(1.0).margin(1e-14));
    CHECK(sol.P(0) == Catch::Approx(0.0).margin(1e-14));
    CHECK(sol.Q(0) == Catch::Approx(0.0).margin(1e-14));
    CHECK(sol.l(0) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("lindist voltages are a single affine map") {
    const FeederNetwork net = two_node();
    const SensitivityMatrices m = build_matrices(net);
    SECTION("zero injections") {
        const Vec V = solve_lindist_voltages(m, injections(1, {}), net.v0);
        CHECK(V(0) == 1.0);
    }
    SECTION("published two-node value at p = -0.05") {
        const Vec V = solve_lindist_voltages(m, injections(1, {{0, -0.05}}), net.v0);
        const double expected = 1.0 - 0.05 * (20.0 / kZBase);  // 0.9422152...
        CHECK(V(0) == Catch::Approx(expected).margin(1e-12));
        CHECK(V(0) == Catch::Approx(0.94222).margin(5e-6));
    }
    SECTION("dimension mismatch is rejected") {
        InjectionProfile bad{Vec::Zero(2), Vec::Zero(2)};
        CHECK_THROWS_AS(solve_lindist_voltages(m, bad, net.v0), DimensionError);
    }
}

TEST_CASE("fixed point matches the closed-form single-branch quadratic") {
    const FeederNetwork net = two_node();
    const SensitivityMatrices m = build_matrices(net);
    for (double p : {-0.12, -0.05, -0.01, 0.0, 0.02, 0.08, 0.2}) {
        for (double q : {-0.04, 0.0, 0.05}) {
            const auto expect = oracles::two_node_closed_form(net.v0, kR, kX, p, q);
            REQUIRE(expect.has_value());
            const PowerFlowSolution sol = solve_distflow(net, m, injections(1, {{0, p}}, {{0, q}}));
            REQUIRE(sol.converged);
            CHECK(sol.V(0) == Catch::Approx(expect->v).margin(1e-9));
            CHECK(sol.l(0) == Catch::Approx(expect->l).margin(1e-9));
            CHECK(sol.max_residual <= 1e-8);
        }
    }
}

TEST_CASE("distflow voltage sits strictly below the lindist line under load") {
    const FeederNetwork net = two_node();
    const SensitivityMatrices m = build_matrices(net);
    const InjectionProfile inj = injections(1, {{0, -0.05}});
    const Vec V_lin = solve_lindist_voltages(m, inj, net.v0);
    const PowerFlowSolution sol = solve_distflow(net, m, inj);
    REQUIRE(sol.converged);
    CHECK(sol.V(0) < V_lin(0));
    // gap against the linear model grows monotonically as withdrawal deepens
    double prev_gap = 0.0;
    for (double p = -0.01; p >= -0.3; p -= 0.01) {
        const InjectionProfile step = injections(1, {{0, p}});
        const PowerFlowSolution s = solve_distflow(net, m, step);
        REQUIRE(s.converged);
        const double gap = solve_lindist_voltages(m, step, net.v0)(0) - s.V(0);
        CHECK(gap > prev_gap);
        prev_gap = gap;
    }
    // voltage itself rises monotonically with the injection over the solvable range
    double prev_v = 0.0;
    bool first = true;
    for (double p = -0.3; p <= 0.3; p += 0.05) {
        const PowerFlowSolution s = solve_distflow(net, m, injections(1, {{0, p}}));
        REQUIRE(s.converged);
        if (!first) CHECK(s.V(0) > prev_v);
        prev_v = s.V(0);
        first = false;
    }
}

TEST_CASE("operating past the nose point reports divergence") {
    const FeederNetwork net = two_node();
    const SensitivityMatrices m = build_matrices(net);
    // closed form has no real root at p = -1 on this feeder
    CHECK_FALSE(oracles::two_node_closed_form(net.v0, kR, kX, -1.0, 0.0).has_value());
    const PowerFlowSolution sol = solve_distflow(net, m, injections(1, {{0, -1.0}}));
    CHECK_FALSE(sol.converged);
}

TEST_CASE("fixed point agrees with an independent Newton solve on random networks") {
    std::mt19937_64 rng(321);
    int solved = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 12);
        const FeederNetwork net = build_network(oracles::random_radial_spec(rng, n));
        const SensitivityMatrices m = build_matrices(net);
        InjectionProfile inj{Vec::Zero(n), Vec::Zero(n)};
        for (int i = 0; i < n; ++i) {
            inj.p(i) = -0.15 + 0.3 * static_cast<double>(rng() >> 11) * 0x1.0p-53;
            inj.q(i) = -0.08 + 0.16 * static_cast<double>(rng() >> 11) * 0x1.0p-53;
        }
        const PowerFlowSolution sol = solve_distflow(net, m, inj);
        REQUIRE(sol.converged);
        CHECK(sol.max_residual <= 1e-8);

        const oracles::NewtonSolution ref = oracles::newton_distflow(net, inj.p, inj.q);
        REQUIRE(ref.converged);
        CHECK((sol.V - ref.V).lpNorm<Eigen::Infinity>() < 1e-7);
        CHECK((sol.l - ref.l).lpNorm<Eigen::Infinity>() < 1e-7);
        CHECK((sol.P - ref.P).lpNorm<Eigen::Infinity>() < 1e-7);
        ++solved;
    }
    CHECK(solved == 50);
}

TEST_CASE("lindist dominates the nonlinear voltages and the gap equals H l") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 10);
        const FeederNetwork net = build_network(oracles::random_radial_spec(rng, n));
        const SensitivityMatrices m = build_matrices(net);
        InjectionProfile inj{Vec::Zero(n), Vec::Zero(n)};
        for (int i = 0; i < n; ++i) {
            inj.p(i) = -0.2 + 0.4 * static_cast<double>(rng() >> 11) * 0x1.0p-53;
            inj.q(i) = -0.1 + 0.2 * static_cast<double>(rng() >> 11) * 0x1.0p-53;
        }
        const PowerFlowSolution sol = solve_distflow(net, m, inj);
        if (!sol.converged) continue;
        const Vec V_lin = solve_lindist_voltages(m, inj, net.v0);
        CHECK(((V_lin - sol.V).array() >= -1e-12).all());
        const Vec gap = V_lin - sol.V - m.H * sol.l;
        CHECK(gap.lpNorm<Eigen::Infinity>() < 1e-8);
    }
}

TEST_CASE("dimension mismatch is rejected") {
    const FeederNetwork net = two_node();
    const SensitivityMatrices m = build_matrices(net);
    InjectionProfile bad{Vec::Zero(3), Vec::Zero(3)};
    CHECK_THROWS_AS(solve_distflow(net, m, bad), DimensionError);
}
