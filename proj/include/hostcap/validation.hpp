#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hostcap/capability.hpp"
#include "hostcap/common.hpp"
#include "hostcap/distflow.hpp"
#include "hostcap/feeder.hpp"
#include "hostcap/hosting.hpp"
#include "hostcap/sensitivity.hpp"

namespace hostcap {

/// Squared-voltage slack below which a bound crossing is treated as solver
/// noise rather than a violation.
inline constexpr double kViolationTol = 1e-7;

/// How reactive injections are drawn alongside the sampled real dispatch.
///
/// CertificateChord interpolates each node between the region's two solver
/// certificates (p_minus, q_minus) -> (p_plus, q_plus), staying inside every
/// capability case by convexity; for constant power factor it reduces to
/// q = gamma p exactly. CapabilityEnvelope draws q independently across the
/// full envelope (box interior, or the apparent-power disk section at the
/// sampled p), which explores reactive set-points the region solves never
/// certified.
enum class QSampling { CertificateChord, CapabilityEnvelope };

inline const char* to_string(QSampling s) {
    return s == QSampling::CertificateChord ? "chord" : "envelope";
}

struct MonteCarloReport {
    long sample_count = 0;
    long violation_count = 0;
    long diverged_count = 0;
    std::uint64_t seed = 0;
    QSampling sampling = QSampling::CertificateChord;
    // per node: min, p05, p50, p95, max over converged samples (squared pu)
    Vec v_min_seen, v_q05, v_q50, v_q95, v_max_seen;
    Mat voltage_samples;           // n x sample_count, NaN where diverged
    std::vector<std::uint8_t> violated;  // per sample
};

namespace detail {

/// Deterministic uniform double in [0, 1); the standard distributions are
/// implementation-defined, this mapping is not.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const auto hi = static_cast<size_t>(std::ceil(pos));
    const double w = pos - std::floor(pos);
    return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

}  // namespace detail

/// Samples dispatches from the operating region, runs the nonlinear power
/// flow on each, and tallies voltage/current violations. Deterministic for a
/// fixed seed; divergence is tallied, never thrown.
inline MonteCarloReport monte_carlo_validate(const FeederNetwork& net,
                                             const SensitivityMatrices& m,
                                             const OperatingRegion& region,
                                             const CapabilitySpec& cap, long samples,
                                             std::uint64_t seed,
                                             QSampling sampling = QSampling::CertificateChord) {
    if (region.status != SolveStatus::Optimal)
        throw StatusMismatchError("monte_carlo_validate needs an optimal region");
    if (samples < 1) throw Error("sample count must be at least 1");
    const int n = net.n;

    MonteCarloReport rep;
    rep.sample_count = samples;
    rep.seed = seed;
    rep.sampling = sampling;
    rep.voltage_samples = Mat::Constant(n, samples, std::numeric_limits<double>::quiet_NaN());
    rep.violated.assign(static_cast<size_t>(samples), 0);

    std::mt19937_64 rng(seed);
    Vec p(n), q(n);
    for (long s = 0; s < samples; ++s) {
        for (int i = 0; i < n; ++i) {
            const auto& c = cap.at(i);
            if (!c.dispatchable) {
                p(i) = region.p_minus(i);  // fixed nodes carry their forecast value
                q(i) = region.q_minus(i);
                continue;
            }
            const double u = detail::uniform01(rng);
            p(i) = region.p_minus(i) + u * (region.p_plus(i) - region.p_minus(i));
            if (sampling == QSampling::CertificateChord) {
                q(i) = region.q_minus(i) + u * (region.q_plus(i) - region.q_minus(i));
            } else {
                switch (c.kind) {
                    case CapabilityCase::ConstantPF:
                        q(i) = c.gamma * p(i);
                        break;
                    case CapabilityCase::Box: {
                        const double uq = detail::uniform01(rng);
                        q(i) = c.q_min + uq * (c.q_max - c.q_min);
                        break;
                    }
                    case CapabilityCase::Quadratic: {
                        const double uq = detail::uniform01(rng);
                        const double half = std::sqrt(std::max(c.s_max - p(i) * p(i), 0.0));
                        q(i) = -half + uq * 2.0 * half;
                        break;
                    }
                }
            }
        }
        const PowerFlowSolution sol = solve_distflow(net, m, {p, q});
        if (!sol.converged) {
            ++rep.diverged_count;
            continue;
        }
        rep.voltage_samples.col(s) = sol.V;
        const bool volt_bad = ((sol.V - net.v_min).array() < -kViolationTol).any() ||
                              ((net.v_max - sol.V).array() < -kViolationTol).any();
        const bool curr_bad = ((net.l_max - sol.l).array() < -kViolationTol).any();
        if (volt_bad || curr_bad) {
            rep.violated[static_cast<size_t>(s)] = 1;
            ++rep.violation_count;
        }
    }

    rep.v_min_seen = Vec::Constant(n, std::numeric_limits<double>::quiet_NaN());
    rep.v_max_seen = rep.v_min_seen;
    rep.v_q05 = rep.v_min_seen;
    rep.v_q50 = rep.v_min_seen;
    rep.v_q95 = rep.v_min_seen;
    std::vector<double> column;
    for (int i = 0; i < n; ++i) {
        column.clear();
        for (long s = 0; s < samples; ++s) {
            const double v = rep.voltage_samples(i, s);
            if (std::isfinite(v)) column.push_back(v);
        }
        if (column.empty()) continue;
        std::sort(column.begin(), column.end());
        rep.v_min_seen(i) = column.front();
        rep.v_max_seen(i) = column.back();
        rep.v_q05(i) = detail::quantile_sorted(column, 0.05);
        rep.v_q50(i) = detail::quantile_sorted(column, 0.50);
        rep.v_q95(i) = detail::quantile_sorted(column, 0.95);
    }
    return rep;
}

struct BoundaryVerdict {
    enum class Kind { Feasible, Violated, Diverged };
    Kind kind = Kind::Feasible;
    std::vector<int> nodes;        // internal indices of violated nodes
    double worst_excursion = 0.0;  // largest bound crossing, squared pu
};

inline const char* to_string(BoundaryVerdict::Kind k) {
    switch (k) {
        case BoundaryVerdict::Kind::Feasible: return "feasible";
        case BoundaryVerdict::Kind::Violated: return "violated";
        case BoundaryVerdict::Kind::Diverged: return "diverged";
    }
    return "?";
}

struct BoundaryReport {
    BoundaryVerdict upper;
    BoundaryVerdict lower;
};

/// Runs the nonlinear power flow exactly at the region's two certificates
/// and reports whether the true voltages stay inside the box.
inline BoundaryReport check_boundary_feasibility(const FeederNetwork& net,
                                                 const SensitivityMatrices& m,
                                                 const OperatingRegion& region) {
    if (region.status != SolveStatus::Optimal)
        throw StatusMismatchError("check_boundary_feasibility needs an optimal region");
    auto verdict = [&](const Vec& p, const Vec& q) {
        BoundaryVerdict v;
        const PowerFlowSolution sol = solve_distflow(net, m, {p, q});
        if (!sol.converged) {
            v.kind = BoundaryVerdict::Kind::Diverged;
            return v;
        }
        for (int i = 0; i < net.n; ++i) {
            const double under = net.v_min(i) - sol.V(i);
            const double over = sol.V(i) - net.v_max(i);
            const double excursion = std::max(under, over);
            if (excursion > kViolationTol) {
                v.nodes.push_back(i + 1);
                v.worst_excursion = std::max(v.worst_excursion, excursion);
            }
        }
        v.kind = v.nodes.empty() ? BoundaryVerdict::Kind::Feasible : BoundaryVerdict::Kind::Violated;
        return v;
    };
    BoundaryReport rep;
    rep.upper = verdict(region.p_plus, region.q_plus);
    rep.lower = verdict(region.p_minus, region.q_minus);
    return rep;
}

struct ActivityReport {
    std::vector<int> nodes;       // internal indices of dispatchable nodes
    std::vector<double> margins;  // reactive constraint margin at each
    std::vector<bool> active;
    bool all_active = true;
};

/// Checks that every dispatchable node's reactive capability constraint is
/// active at a linearized optimum. Constant power factor is an equality and
/// therefore vacuously active.
inline ActivityReport check_theorem1_activity(const DirectionSolve& result,
                                              const CapabilitySpec& cap, double tol = 1e-6) {
    if (result.status != SolveStatus::Optimal)
        throw StatusMismatchError("activity check needs an optimal solve");
    ActivityReport rep;
    for (int i = 0; i < cap.size(); ++i) {
        const auto& c = cap.at(i);
        if (!c.dispatchable) continue;
        const ConstraintMargin cm = capability_constraint(c, result.p(i), result.q(i));
        const bool active =
            c.kind == CapabilityCase::ConstantPF ? true : std::abs(cm.margin) <= tol;
        rep.nodes.push_back(i + 1);
        rep.margins.push_back(cm.margin);
        rep.active.push_back(active);
        rep.all_active = rep.all_active && active;
    }
    return rep;
}

/// Per-node feasible intervals found by brute-force search, the desk-scale
/// stand-in for the exact non-convex problems.
struct OracleRegion {
    std::vector<int> nodes;  // internal indices of dispatchable nodes
    Vec lo, hi;              // interval endpoints, pu
    double step = 0.0;
    long points_checked = 0;
};

struct OracleOptions {
    long max_points = 2'000'000;  // total grid budget
    int q_grid = 11;              // q search resolution for box/quadratic cases
};

/// Grids the capability box of the dispatchable nodes (at most 3) and marks
/// each point feasible when the nonlinear power flow converges inside the
/// voltage and current limits. Returns the maximal per-node intervals whose
/// full cross-product is feasible, anchored at the zero-dispatch point.
inline OracleRegion oracle_region(const FeederNetwork& net, const SensitivityMatrices& m,
                                  const CapabilitySpec& cap, double grid_step,
                                  const OracleOptions& opt = {}) {
    if (!(grid_step > 0.0)) throw Error("grid step must be positive");
    OracleRegion region;
    region.step = grid_step;
    for (int i = 0; i < cap.size(); ++i)
        if (cap.at(i).dispatchable) region.nodes.push_back(i + 1);
    const int k = static_cast<int>(region.nodes.size());
    if (k == 0) {
        region.lo.resize(0);
        region.hi.resize(0);
        return region;  // empty capability, empty region
    }
    if (k > 3)
        throw GridTooLargeError("brute-force oracle supports at most 3 dispatchable nodes, got " +
                                std::to_string(k));

    std::vector<std::vector<double>> axis(static_cast<size_t>(k));
    std::vector<int> anchor(static_cast<size_t>(k));
    double total = 1.0;
    for (int d = 0; d < k; ++d) {
        const auto& c = cap.at(region.nodes[static_cast<size_t>(d)] - 1);
        for (double v = c.p_min; v <= c.p_max + 1e-12; v += grid_step)
            axis[static_cast<size_t>(d)].push_back(v);
        if (axis[static_cast<size_t>(d)].empty()) axis[static_cast<size_t>(d)].push_back(c.p_min);
        total *= static_cast<double>(axis[static_cast<size_t>(d)].size());
        // anchor at the grid point closest to zero dispatch
        int best = 0;
        for (int j = 1; j < static_cast<int>(axis[static_cast<size_t>(d)].size()); ++j)
            if (std::abs(axis[static_cast<size_t>(d)][static_cast<size_t>(j)]) <
                std::abs(axis[static_cast<size_t>(d)][static_cast<size_t>(best)]))
                best = j;
        anchor[static_cast<size_t>(d)] = best;
    }
    if (total > static_cast<double>(opt.max_points))
        throw GridTooLargeError("grid of " + std::to_string(static_cast<long>(total)) +
                                " points exceeds the oracle budget");

    auto [p_fixed, q_fixed] = cap.fixed_profile();
    long checked = 0;
    auto feasible = [&](const std::vector<int>& idx) {
        Vec p = p_fixed, q = q_fixed;
        for (int d = 0; d < k; ++d) {
            const int node = region.nodes[static_cast<size_t>(d)] - 1;
            p(node) = axis[static_cast<size_t>(d)][static_cast<size_t>(idx[static_cast<size_t>(d)])];
        }
        auto point_ok = [&]() {
            const PowerFlowSolution sol = solve_distflow(net, m, {p, q});
            if (!sol.converged) return false;
            if (((sol.V - net.v_min).array() < -1e-9).any()) return false;
            if (((net.v_max - sol.V).array() < -1e-9).any()) return false;
            if (((net.l_max - sol.l).array() < -1e-9).any()) return false;
            return true;
        };
        ++checked;
        // reactive freedom: a point is feasible when some in-case q works
        bool any = false;
        std::vector<std::pair<int, std::vector<double>>> q_choices;
        for (int d = 0; d < k; ++d) {
            const int node = region.nodes[static_cast<size_t>(d)] - 1;
            const auto& c = cap.at(node);
            std::vector<double> choices;
            switch (c.kind) {
                case CapabilityCase::ConstantPF:
                    choices.push_back(c.gamma * p(node));
                    break;
                case CapabilityCase::Box:
                    for (int j = 0; j < opt.q_grid; ++j)
                        choices.push_back(c.q_min + (c.q_max - c.q_min) * j /
                                                        std::max(opt.q_grid - 1, 1));
                    break;
                case CapabilityCase::Quadratic: {
                    const double half = std::sqrt(std::max(c.s_max - p(node) * p(node), 0.0));
                    for (int j = 0; j < opt.q_grid; ++j)
                        choices.push_back(-half + 2.0 * half * j / std::max(opt.q_grid - 1, 1));
                    break;
                }
            }
            q_choices.push_back({node, std::move(choices)});
        }
        std::vector<size_t> qi(static_cast<size_t>(k), 0);
        while (true) {
            for (int d = 0; d < k; ++d)
                q(q_choices[static_cast<size_t>(d)].first) =
                    q_choices[static_cast<size_t>(d)].second[qi[static_cast<size_t>(d)]];
            if (point_ok()) {
                any = true;
                break;
            }
            int d = 0;
            while (d < k) {
                if (++qi[static_cast<size_t>(d)] < q_choices[static_cast<size_t>(d)].second.size())
                    break;
                qi[static_cast<size_t>(d)] = 0;
                ++d;
            }
            if (d == k) break;
        }
        return any;
    };

    // start from the feasible run through the anchor along each axis, then
    // shrink until the whole cross-product verifies
    std::vector<int> lo_idx(anchor), hi_idx(anchor);
    {
        std::vector<int> probe(anchor);
        if (!feasible(probe))
            throw Error("oracle anchor point is infeasible; no region exists around zero dispatch");
        for (int d = 0; d < k; ++d) {
            probe = anchor;
            while (lo_idx[static_cast<size_t>(d)] > 0) {
                probe[static_cast<size_t>(d)] = lo_idx[static_cast<size_t>(d)] - 1;
                if (!feasible(probe)) break;
                --lo_idx[static_cast<size_t>(d)];
            }
            probe = anchor;
            const int last = static_cast<int>(axis[static_cast<size_t>(d)].size()) - 1;
            while (hi_idx[static_cast<size_t>(d)] < last) {
                probe[static_cast<size_t>(d)] = hi_idx[static_cast<size_t>(d)] + 1;
                if (!feasible(probe)) break;
                ++hi_idx[static_cast<size_t>(d)];
            }
        }
    }
    if (k > 1) {
        // verify the full product, shrinking the farthest-from-anchor axis on failure
        bool verified = false;
        while (!verified) {
            verified = true;
            std::vector<int> idx(lo_idx);
            while (true) {
                if (!feasible(idx)) {
                    int worst = 0;
                    int worst_dist = -1;
                    for (int d = 0; d < k; ++d) {
                        const int dist = std::abs(idx[static_cast<size_t>(d)] - anchor[static_cast<size_t>(d)]);
                        if (dist > worst_dist) {
                            worst_dist = dist;
                            worst = d;
                        }
                    }
                    if (idx[static_cast<size_t>(worst)] < anchor[static_cast<size_t>(worst)])
                        ++lo_idx[static_cast<size_t>(worst)];
                    else
                        --hi_idx[static_cast<size_t>(worst)];
                    verified = false;
                    break;
                }
                int d = 0;
                while (d < k) {
                    if (++idx[static_cast<size_t>(d)] <= hi_idx[static_cast<size_t>(d)]) break;
                    idx[static_cast<size_t>(d)] = lo_idx[static_cast<size_t>(d)];
                    ++d;
                }
                if (d == k) break;
            }
        }
    }

    region.lo = Vec::Zero(k);
    region.hi = Vec::Zero(k);
    for (int d = 0; d < k; ++d) {
        region.lo(d) = axis[static_cast<size_t>(d)][static_cast<size_t>(lo_idx[static_cast<size_t>(d)])];
        region.hi(d) = axis[static_cast<size_t>(d)][static_cast<size_t>(hi_idx[static_cast<size_t>(d)])];
    }
    region.points_checked = checked;
    return region;
}

}  // namespace hostcap
