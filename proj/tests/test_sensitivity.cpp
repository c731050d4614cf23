#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>

#include "hostcap/feeder.hpp"
#include "hostcap/sensitivity.hpp"
#include "oracles.hpp"

using namespace hostcap;

namespace {

constexpr double kZBase = 17.3056;  // 4.16^2 / 1

FeederNetwork two_node() {
    FeederSpec s;
    s.v0_mag = 1.0;
    s.base_kv = 4.16;
    s.base_mva = 1.0;
    s.labels = {"0", "1"};
    s.v_min_mag = {0.0, 0.95};
    s.v_max_mag = {2.0, 1.05};
    s.edges.push_back({0, 1, 10.0 / kZBase, 15.0 / kZBase, 0.5});
    return build_network(s);
}

FeederNetwork three_node_chain() {
    FeederSpec s;
    s.v0_mag = 1.0;
    s.base_kv = 4.16;
    s.base_mva = 1.0;
    s.labels = {"0", "1", "2"};
    s.v_min_mag = {0.0, 0.9, 0.9};
    s.v_max_mag = {2.0, 1.1, 1.1};
    s.edges.push_back({0, 1, 0.04, 0.08, 10.0});
    s.edges.push_back({1, 2, 0.03, 0.06, 10.0});
    return build_network(s);
}

}  // namespace

TEST_CASE("two-node incidence") {
    const FeederNetwork net = two_node();
    const SensitivityMatrices m = build_incidence(net);
    REQUIRE(m.B.rows() == 2);
    REQUIRE(m.B.cols() == 1);
    CHECK(m.B(0, 0) == 1.0);
    CHECK(m.B(1, 0) == 1.0);
    CHECK(m.A(0, 0) == 0.0);
}

TEST_CASE("three-node chain incidence and path matrix") {
    const FeederNetwork net = three_node_chain();
    const SensitivityMatrices m = build_matrices(net);
    CHECK(m.A(0, 0) == 0.0);
    CHECK(m.A(0, 1) == 1.0);
    CHECK(m.A(1, 0) == 0.0);
    CHECK(m.A(1, 1) == 0.0);
    // C = (I - A)^{-1}, by hand [[1, 1], [0, 1]]
    CHECK(m.C(0, 0) == Catch::Approx(1.0).margin(1e-14));
    CHECK(m.C(0, 1) == Catch::Approx(1.0).margin(1e-14));
    CHECK(m.C(1, 0) == Catch::Approx(0.0).margin(1e-14));
    CHECK(m.C(1, 1) == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("columns of B carry exactly two unit entries") {
    std::mt19937_64 rng(5);
    const FeederNetwork net = build_network(oracles::random_radial_spec(rng, 17));
    const SensitivityMatrices m = build_incidence(net);
    for (int c = 0; c < m.n; ++c) {
        double sum = 0.0;
        for (int rrow = 0; rrow <= m.n; ++rrow) {
            const double e = m.B(rrow, c);
            CHECK((e == 0.0 || e == 1.0));
            sum += e;
        }
        CHECK(sum == 2.0);
    }
}

TEST_CASE("two-node sensitivities reproduce the published example values") {
    const FeederNetwork net = two_node();
    const SensitivityMatrices m = build_matrices(net);
    // r = 10 ohm, x = 15 ohm on a 4.16 kV / 1 MVA base
    const double r = 10.0 / kZBase;
    const double x = 15.0 / kZBase;
    CHECK(r == Catch::Approx(0.57785).margin(5e-6));
    CHECK(x == Catch::Approx(0.86677).margin(5e-6));
    CHECK(m.M_p(0, 0) == Catch::Approx(2.0 * r).epsilon(1e-14));
    CHECK(m.M_q(0, 0) == Catch::Approx(2.0 * x).epsilon(1e-14));
    CHECK(m.M_p(0, 0) == Catch::Approx(1.15570).margin(5e-6));
    CHECK(m.M_q(0, 0) == Catch::Approx(1.73354).margin(5e-6));
    // single branch: no loss redistribution, H collapses to |z|^2
    CHECK(m.D_r(0, 0) == 0.0);
    CHECK(m.D_x(0, 0) == 0.0);
    CHECK(m.H(0, 0) == Catch::Approx(r * r + x * x).epsilon(1e-14));
}

TEST_CASE("inverse identity holds on fixtures") {
    for (const FeederNetwork& net : {two_node(), three_node_chain()}) {
        const SensitivityMatrices m = build_matrices(net);
        const Mat err = m.C * (Mat::Identity(m.n, m.n) - m.A) - Mat::Identity(m.n, m.n);
        CHECK(err.lpNorm<Eigen::Infinity>() < 1e-10);
    }
}

TEST_CASE("random radial trees satisfy the structural identities") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 49);
        const FeederNetwork net = build_network(oracles::random_radial_spec(rng, n));
        const SensitivityMatrices m = build_matrices(net);

        CHECK(incidence_determinant(m) == 1.0);

        const Mat err = m.C * (Mat::Identity(n, n) - m.A) - Mat::Identity(n, n);
        CHECK(err.lpNorm<Eigen::Infinity>() < 1e-10);

        CHECK((m.M_p - m.M_p.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK((m.M_q - m.M_q.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat> ep(m.M_p), eq(m.M_q);
        CHECK(ep.eigenvalues().minCoeff() > 0.0);
        CHECK(eq.eigenvalues().minCoeff() > 0.0);

        // path-indicator structure and non-negative loss sensitivity
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                CHECK((m.C(i, j) == 0.0 || m.C(i, j) == 1.0));
                CHECK(m.H(i, j) >= 0.0);
            }

        // column sums of M_q are positive on inductive networks
        for (int j = 0; j < n; ++j) CHECK(m.M_q.col(j).sum() > 0.0);
    }
}

TEST_CASE("rebuilding under a permuted labeling yields the same matrices") {
    std::mt19937_64 rng(77);
    const FeederSpec spec = oracles::random_radial_spec(rng, 23);
    const FeederNetwork net_a = build_network(spec);
    const SensitivityMatrices m_a = build_matrices(net_a);

    // permute the non-root input order and re-run the build
    FeederSpec shuffled = spec;
    std::vector<int> perm(spec.labels.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    for (size_t i = perm.size() - 1; i > 1; --i)
        std::swap(perm[i], perm[1 + rng() % i]);
    std::vector<std::string> labels(spec.labels.size());
    std::vector<double> vmin(spec.labels.size()), vmax(spec.labels.size());
    for (size_t i = 0; i < perm.size(); ++i) {
        labels[static_cast<size_t>(perm[i])] = spec.labels[i];
        vmin[static_cast<size_t>(perm[i])] = spec.v_min_mag[i];
        vmax[static_cast<size_t>(perm[i])] = spec.v_max_mag[i];
    }
    shuffled.labels = labels;
    shuffled.v_min_mag = vmin;
    shuffled.v_max_mag = vmax;
    for (auto& e : shuffled.edges) {
        e.from = perm[static_cast<size_t>(e.from)];
        e.to = perm[static_cast<size_t>(e.to)];
    }
    const FeederNetwork net_b = build_network(shuffled);
    const SensitivityMatrices m_b = build_matrices(net_b);

    std::map<std::string, int> internal_b;
    for (int i = 1; i <= net_b.n; ++i) internal_b[net_b.label(i)] = i - 1;
    for (int i = 1; i <= net_a.n; ++i)
        for (int j = 1; j <= net_a.n; ++j) {
            const int bi = internal_b.at(net_a.label(i));
            const int bj = internal_b.at(net_a.label(j));
            CHECK(std::abs(m_a.M_p(i - 1, j - 1) - m_b.M_p(bi, bj)) < 1e-12);
            CHECK(std::abs(m_a.M_q(i - 1, j - 1) - m_b.M_q(bi, bj)) < 1e-12);
            CHECK(std::abs(m_a.H(i - 1, j - 1) - m_b.H(bi, bj)) < 1e-12);
        }
}
