#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hostcap/feeder.hpp"
#include "oracles.hpp"

using namespace hostcap;

namespace {

FeederSpec two_node_spec() {
    FeederSpec s;
    s.v0_mag = 1.0;
    s.base_kv = 4.16;
    s.base_mva = 1.0;
    s.labels = {"0", "1"};
    s.v_min_mag = {0.0, 0.95};
    s.v_max_mag = {2.0, 1.05};
    s.edges.push_back({0, 1, 10.0 / 17.3056, 15.0 / 17.3056, 0.5});
    return s;
}

}  // namespace

TEST_CASE("two-node network builds with one branch") {
    const FeederNetwork net = build_network(two_node_spec());
    REQUIRE(net.n == 1);
    CHECK(net.parent[1] == 0);
    CHECK(net.v0 == 1.0);
    CHECK(net.v_min(0) == Catch::Approx(0.95 * 0.95));
    CHECK(net.v_max(0) == Catch::Approx(1.05 * 1.05));
    CHECK(net.l_max(0) == 0.5);
}

TEST_CASE("breadth-first relabeling gives parents smaller indices") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const FeederSpec spec = oracles::random_radial_spec(rng, 2 + static_cast<int>(rng() % 30));
        const FeederNetwork net = build_network(spec);
        for (int j = 1; j <= net.n; ++j) {
            CHECK(net.parent[static_cast<size_t>(j)] < j);
            CHECK(net.parent[static_cast<size_t>(j)] >= 0);
        }
        // relabeling is a bijection back to the input indices
        for (int j = 0; j <= net.n; ++j)
            CHECK(net.from_input[static_cast<size_t>(net.to_input[static_cast<size_t>(j)])] == j);
    }
}

TEST_CASE("cycle is rejected") {
    FeederSpec s;
    s.v0_mag = 1.0;
    s.base_kv = 4.16;
    s.base_mva = 1.0;
    s.labels = {"0", "1", "2"};
    s.v_min_mag = {0.0, 0.9, 0.9};
    s.v_max_mag = {2.0, 1.1, 1.1};
    s.edges.push_back({0, 1, 0.1, 0.2, 1.0});
    s.edges.push_back({1, 2, 0.1, 0.2, 1.0});
    SECTION("wrong branch count") {
        s.edges.push_back({2, 0, 0.1, 0.2, 1.0});
        s.labels.push_back("3");
        s.v_min_mag.push_back(0.9);
        s.v_max_mag.push_back(1.1);
        // 3 edges for 3 non-root nodes but they close a loop
        CHECK_THROWS_AS(build_network(s), NotRadialError);
    }
    SECTION("duplicate branch closes a loop") {
        s.labels.push_back("3");
        s.v_min_mag.push_back(0.9);
        s.v_max_mag.push_back(1.1);
        s.edges.push_back({2, 1, 0.1, 0.2, 1.0});
        CHECK_THROWS_AS(build_network(s), NotRadialError);
    }
}

TEST_CASE("disconnected component is rejected") {
    FeederSpec s;
    s.v0_mag = 1.0;
    s.base_kv = 4.16;
    s.base_mva = 1.0;
    s.labels = {"0", "1", "2", "3"};
    s.v_min_mag = {0.0, 0.9, 0.9, 0.9};
    s.v_max_mag = {2.0, 1.1, 1.1, 1.1};
    s.edges.push_back({0, 1, 0.1, 0.2, 1.0});
    s.edges.push_back({2, 3, 0.1, 0.2, 1.0});
    s.edges.push_back({3, 2, 0.1, 0.2, 1.0});
    CHECK_THROWS_AS(build_network(s), NotRadialError);
}

TEST_CASE("network without a branch at the substation is rejected") {
    FeederSpec s;
    s.v0_mag = 1.0;
    s.base_kv = 4.16;
    s.base_mva = 1.0;
    s.labels = {"0", "1", "2"};
    s.v_min_mag = {0.0, 0.9, 0.9};
    s.v_max_mag = {2.0, 1.1, 1.1};
    s.edges.push_back({1, 2, 0.1, 0.2, 1.0});
    s.edges.push_back({2, 1, 0.1, 0.2, 1.0});
    CHECK_THROWS_AS(build_network(s), NotRootedError);
}

TEST_CASE("non-inductive branch is rejected") {
    FeederSpec s = two_node_spec();
    s.edges[0].x_pu = 0.0;
    CHECK_THROWS_AS(build_network(s), Error);
    s.edges[0].x_pu = -0.3;
    CHECK_THROWS_AS(build_network(s), Error);
}

TEST_CASE("negative resistance and inverted voltage bounds are rejected") {
    FeederSpec s = two_node_spec();
    s.edges[0].r_pu = -0.1;
    CHECK_THROWS_AS(build_network(s), Error);

    FeederSpec t = two_node_spec();
    t.v_min_mag[1] = 1.06;
    CHECK_THROWS_AS(build_network(t), Error);
}
