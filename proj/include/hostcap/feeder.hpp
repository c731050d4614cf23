#pragma once

#include <algorithm>
#include <cstddef>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "hostcap/common.hpp"

namespace hostcap {

/// Raw feeder description in caller (file) order. Node 0 is the substation;
/// impedances are already per-unit. Voltage bounds are magnitudes.
struct FeederSpec {
    double v0_mag = 1.0;
    double base_kv = 0.0;
    double base_mva = 0.0;
    std::vector<std::string> labels;      // size N+1, labels[0] = substation
    std::vector<double> v_min_mag;        // size N+1, entry 0 ignored
    std::vector<double> v_max_mag;        // size N+1, entry 0 ignored
    struct Edge {
        int from = 0;
        int to = 0;
        double r_pu = 0.0;
        double x_pu = 0.0;
        double l_max_pu = 0.0;  // squared current magnitude
    };
    std::vector<Edge> edges;
};

/// Validated radial network in breadth-first order from the substation.
/// All quantities per-unit; voltages and currents are squared magnitudes.
/// Branch j (0-based) feeds node j+1 and parent[j+1] < j+1 always holds,
/// which makes every matrix built on this ordering triangular.
struct FeederNetwork {
    int n = 0;            // non-substation node count (= branch count)
    double v0 = 1.0;      // squared substation voltage
    double base_kv = 0.0;
    double base_mva = 0.0;
    std::vector<int> parent;          // size n+1, parent[0] = -1
    Vec branch_r, branch_x;           // size n, branch j = (parent[j+1], j+1)
    Vec v_min, v_max;                 // size n, squared bounds per node 1..n
    Vec l_min, l_max;                 // size n, squared bounds per branch
    std::vector<std::string> labels;  // size n+1, in internal order
    std::vector<int> to_input;        // internal node index -> input index
    std::vector<int> from_input;      // input index -> internal node index

    int node_count() const { return n; }

    const std::string& label(int internal) const { return labels[static_cast<size_t>(internal)]; }
};

/// Validates the raw spec and relabels nodes breadth-first from the root.
///
/// Checks: exactly N branches for N non-root nodes, connected, acyclic,
/// rooted at node 0, r >= 0, x > 0 (inductive), v_min < v_max, l bounds sane.
inline FeederNetwork build_network(const FeederSpec& spec) {
    const int total = static_cast<int>(spec.labels.size());
    if (total < 2) throw NotRadialError("network needs a substation and at least one node");
    const int n = total - 1;
    if (static_cast<int>(spec.edges.size()) != n)
        throw NotRadialError("radial network with " + std::to_string(n) + " nodes needs exactly " +
                             std::to_string(n) + " branches, got " +
                             std::to_string(spec.edges.size()));
    if (spec.v_min_mag.size() != spec.labels.size() || spec.v_max_mag.size() != spec.labels.size())
        throw DimensionError("voltage bound arrays must match the node count");
    if (spec.v0_mag <= 0.0) throw Error("substation voltage must be positive");
    if (spec.base_kv <= 0.0 || spec.base_mva <= 0.0) throw Error("base quantities must be positive");

    std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(total));
    for (int e = 0; e < n; ++e) {
        const auto& edge = spec.edges[static_cast<size_t>(e)];
        if (edge.from < 0 || edge.from >= total || edge.to < 0 || edge.to >= total ||
            edge.from == edge.to)
            throw NotRadialError("branch " + std::to_string(e) + " references an invalid node");
        if (edge.r_pu < 0.0)
            throw Error("branch " + std::to_string(e) + " has negative resistance");
        if (edge.x_pu <= 0.0)
            throw Error("branch " + std::to_string(e) +
                        " has non-positive reactance; the model requires an inductive network");
        adj[static_cast<size_t>(edge.from)].push_back({edge.to, e});
        adj[static_cast<size_t>(edge.to)].push_back({edge.from, e});
    }
    if (adj[0].empty()) throw NotRootedError("no branch incident to the substation node");

    // Breadth-first traversal; a revisited node means a cycle, an unvisited
    // one means a disconnected component (both break radiality).
    FeederNetwork net;
    net.n = n;
    net.v0 = spec.v0_mag * spec.v0_mag;
    net.base_kv = spec.base_kv;
    net.base_mva = spec.base_mva;
    net.parent.assign(static_cast<size_t>(total), -1);
    net.to_input.assign(static_cast<size_t>(total), -1);
    net.from_input.assign(static_cast<size_t>(total), -1);
    net.labels.resize(static_cast<size_t>(total));
    net.branch_r.resize(n);
    net.branch_x.resize(n);
    net.v_min.resize(n);
    net.v_max.resize(n);
    net.l_min = Vec::Zero(n);
    net.l_max.resize(n);

    std::vector<int> edge_of(static_cast<size_t>(total), -1);
    std::vector<bool> seen(static_cast<size_t>(total), false);
    std::queue<int> frontier;
    seen[0] = true;
    frontier.push(0);
    net.to_input[0] = 0;
    net.from_input[0] = 0;
    net.labels[0] = spec.labels[0];
    int next = 1;
    std::vector<int> parent_input(static_cast<size_t>(total), -1);
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (const auto& [v, e] : adj[static_cast<size_t>(u)]) {
            if (v == parent_input[u] && e == edge_of[static_cast<size_t>(u)]) continue;
            if (seen[static_cast<size_t>(v)])
                throw NotRadialError("cycle detected through node '" +
                                     spec.labels[static_cast<size_t>(v)] + "'");
            seen[static_cast<size_t>(v)] = true;
            parent_input[static_cast<size_t>(v)] = u;
            edge_of[static_cast<size_t>(v)] = e;
            const int idx = next++;
            net.to_input[static_cast<size_t>(idx)] = v;
            net.from_input[static_cast<size_t>(v)] = idx;
            net.labels[static_cast<size_t>(idx)] = spec.labels[static_cast<size_t>(v)];
            frontier.push(v);
        }
    }
    if (next != total) throw NotRadialError("network is not connected");

    for (int idx = 1; idx < total; ++idx) {
        const int input = net.to_input[static_cast<size_t>(idx)];
        const int parent_internal = net.from_input[static_cast<size_t>(parent_input[input])];
        net.parent[static_cast<size_t>(idx)] = parent_internal;
        const auto& edge = spec.edges[static_cast<size_t>(edge_of[static_cast<size_t>(input)])];
        const int b = idx - 1;
        net.branch_r(b) = edge.r_pu;
        net.branch_x(b) = edge.x_pu;
        net.l_max(b) = edge.l_max_pu;
        const double vmin = spec.v_min_mag[static_cast<size_t>(input)];
        const double vmax = spec.v_max_mag[static_cast<size_t>(input)];
        if (!(vmin < vmax)) throw Error("node '" + net.labels[static_cast<size_t>(idx)] +
                                        "' needs v_min < v_max");
        if (vmin < 0.0) throw Error("voltage bounds must be non-negative magnitudes");
        net.v_min(b) = vmin * vmin;
        net.v_max(b) = vmax * vmax;
        if (net.l_max(b) < 0.0) throw Error("branch current bound must be non-negative");
    }
    return net;
}

/// Children of each node in internal order; index 0 is the substation.
inline std::vector<std::vector<int>> children_of(const FeederNetwork& net) {
    std::vector<std::vector<int>> kids(static_cast<size_t>(net.n) + 1);
    for (int j = 1; j <= net.n; ++j) kids[static_cast<size_t>(net.parent[static_cast<size_t>(j)])].push_back(j);
    return kids;
}

}  // namespace hostcap
