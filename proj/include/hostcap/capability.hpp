#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "hostcap/common.hpp"
#include "hostcap/feeder.hpp"

namespace hostcap {

/// Reactive-power coupling at a dispatchable node.
enum class CapabilityCase {
    ConstantPF,  // q = gamma * p
    Box,         // q_min <= q <= q_max
    Quadratic,   // p^2 + q^2 <= s_max
};

inline const char* to_string(CapabilityCase c) {
    switch (c) {
        case CapabilityCase::ConstantPF: return "constant-pf";
        case CapabilityCase::Box: return "box";
        case CapabilityCase::Quadratic: return "quadratic";
    }
    return "?";
}

/// gamma = sqrt((1 - pf^2) / pf^2); unity power factor gives gamma = 0.
inline double gamma_from_pf(double pf) {
    if (!(pf > 0.0) || pf > 1.0) throw Error("power factor must lie in (0, 1]");
    return std::sqrt((1.0 - pf * pf) / (pf * pf));
}

/// Injection envelope of one node. Non-dispatchable nodes carry only the
/// fixed forecast offsets.
struct NodeCapability {
    bool dispatchable = false;
    CapabilityCase kind = CapabilityCase::ConstantPF;
    double gamma = 0.0;              // ConstantPF slope
    double q_min = 0.0, q_max = 0.0; // Box bounds, pu
    double s_max = 0.0;              // Quadratic bound on p^2 + q^2, squared pu
    double p_min = 0.0, p_max = 0.0; // real-power envelope, pu
    double demand = 0.0, solar = 0.0;// forecast offsets, pu

    /// Net injection this node contributes when it is not dispatched.
    double fixed_injection() const { return solar - demand; }
};

/// Per-node capability in internal (breadth-first) node order, entry i for
/// node i+1.
class CapabilitySpec {
  public:
    CapabilitySpec() = default;
    explicit CapabilitySpec(std::vector<NodeCapability> nodes) : nodes_(std::move(nodes)) {
        validate();
    }

    int size() const { return static_cast<int>(nodes_.size()); }
    const NodeCapability& at(int i) const { return nodes_[static_cast<size_t>(i)]; }
    const std::vector<NodeCapability>& nodes() const { return nodes_; }

    int dispatchable_count() const {
        int k = 0;
        for (const auto& c : nodes_) k += c.dispatchable ? 1 : 0;
        return k;
    }

    /// Fixed net injections (p, q) with every dispatchable node at zero.
    std::pair<Vec, Vec> fixed_profile() const {
        Vec p = Vec::Zero(size());
        Vec q = Vec::Zero(size());
        for (int i = 0; i < size(); ++i)
            if (!nodes_[static_cast<size_t>(i)].dispatchable)
                p(i) = nodes_[static_cast<size_t>(i)].fixed_injection();
        return {p, q};
    }

  private:
    void validate() const {
        for (const auto& c : nodes_) {
            if (!c.dispatchable) continue;
            if (c.kind == CapabilityCase::Box && c.q_min > c.q_max)
                throw Error("box capability needs q_min <= q_max");
            if (c.kind == CapabilityCase::Quadratic && !(c.s_max > 0.0))
                throw Error("quadratic capability needs s_max > 0");
            if (c.kind == CapabilityCase::ConstantPF && c.gamma < 0.0)
                throw Error("constant-pf capability needs gamma >= 0");
            if (!(c.p_min <= c.p_max))
                throw Error("capability needs p_min <= p_max");
        }
    }

    std::vector<NodeCapability> nodes_;
};

struct ConstraintMargin {
    bool satisfied = true;
    double margin = 0.0;  // signed distance to the boundary, negative outside
};

/// Margin of the reactive coupling constraint at (p, q). ConstantPF is an
/// equality, so its margin is -|q - gamma p|. The quadratic margin is
/// s_max - (p^2 + q^2), in squared pu.
inline ConstraintMargin capability_constraint(const NodeCapability& cap, double p, double q) {
    ConstraintMargin out;
    switch (cap.kind) {
        case CapabilityCase::ConstantPF:
            out.margin = -std::abs(q - cap.gamma * p);
            break;
        case CapabilityCase::Box:
            out.margin = std::min(q - cap.q_min, cap.q_max - q);
            break;
        case CapabilityCase::Quadratic:
            out.margin = cap.s_max - (p * p + q * q);
            break;
    }
    out.satisfied = out.margin >= 0.0;
    return out;
}

/// Extreme operating points of the capability envelope, used to probe the
/// worst-case branch currents. Covers the all-max and all-min injection
/// corners, the four sign combinations of extreme p and q, and for quadratic
/// nodes the four diagonal points of the apparent-power circle (the circle's
/// worst-current direction need not be axis-aligned).
inline std::vector<std::pair<Vec, Vec>> capability_corners(const CapabilitySpec& spec) {
    const int n = spec.size();
    auto clamp = [](double v, double lo, double hi) { return std::min(std::max(v, lo), hi); };

    // pattern: (sp, sq) in sign space, diag: radial points for quadratic nodes
    struct Pattern { double sp, sq; bool diag; };
    const Pattern patterns[] = {
        {+1, +1, false}, {+1, -1, false}, {-1, +1, false}, {-1, -1, false},
        {+1, +1, true},  {+1, -1, true},  {-1, +1, true},  {-1, -1, true},
    };

    std::vector<std::pair<Vec, Vec>> corners;
    for (const auto& pat : patterns) {
        Vec p(n), q(n);
        for (int i = 0; i < n; ++i) {
            const auto& c = spec.at(i);
            if (!c.dispatchable) {
                p(i) = c.fixed_injection();
                q(i) = 0.0;
                continue;
            }
            const double p_ext = pat.sp > 0 ? c.p_max : c.p_min;
            switch (c.kind) {
                case CapabilityCase::ConstantPF:
                    p(i) = p_ext;
                    q(i) = c.gamma * p(i);
                    break;
                case CapabilityCase::Box:
                    p(i) = p_ext;
                    q(i) = pat.sq > 0 ? c.q_max : c.q_min;
                    break;
                case CapabilityCase::Quadratic: {
                    const double s = std::sqrt(c.s_max);
                    if (pat.diag) {
                        p(i) = clamp(pat.sp * s / std::sqrt(2.0), c.p_min, c.p_max);
                    } else {
                        p(i) = clamp(p_ext, -s, s);
                    }
                    const double head = std::max(c.s_max - p(i) * p(i), 0.0);
                    q(i) = pat.sq * std::sqrt(head);
                    break;
                }
            }
        }
        bool dup = false;
        for (const auto& [cp, cq] : corners)
            if ((cp - p).lpNorm<Eigen::Infinity>() == 0.0 &&
                (cq - q).lpNorm<Eigen::Infinity>() == 0.0) {
                dup = true;
                break;
            }
        if (!dup) corners.push_back({std::move(p), std::move(q)});
    }
    return corners;
}

}  // namespace hostcap
