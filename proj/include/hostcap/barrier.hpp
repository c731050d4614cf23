#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "hostcap/common.hpp"

namespace hostcap {

enum class SolveStatus { Optimal, Infeasible, MaxIter };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::MaxIter: return "max-iter";
    }
    return "?";
}

/// Maximize sum_k log(sign_k * z[var_k]) subject to G z <= h and
/// z[a]^2 + z[b]^2 <= radius_sq per disk. Solved with a log-barrier method:
/// Newton centering steps on t*f + barrier, t grown geometrically until the
/// duality-gap bound m/t meets tolerance. Small and dense by design; the
/// programs built on it have at most a few hundred variables.
class BarrierProgram {
  public:
    struct LogTerm {
        int var = 0;
        double sign = 1.0;  // +1: z > 0 in the objective, -1: z < 0
    };
    struct Disk {
        int var_a = 0;
        int var_b = 0;
        double radius_sq = 0.0;
    };
    struct Options {
        double gap_tol = 1e-8;
        double feas_tol = 1e-8;
        double mu = 20.0;          // barrier growth factor
        int max_stages = 80;
        int max_newton = 200;      // per centering stage
        double newton_tol = 1e-18; // on the squared Newton decrement
    };
    struct Result {
        Vec z;
        SolveStatus status = SolveStatus::MaxIter;
        double gap = std::numeric_limits<double>::infinity();
        double kkt_residual = std::numeric_limits<double>::infinity();
        int newton_iterations = 0;
        int worst_row = -1;  // most violated constraint when infeasible
    };

    explicit BarrierProgram(int num_vars) : nv_(num_vars), G_(0, num_vars), h_(0) {}

    int num_vars() const { return nv_; }
    void add_log_term(int var, double sign) { logs_.push_back({var, sign}); }
    void add_row(const Vec& g, double h) {
        if (g.size() != nv_) throw DimensionError("constraint row has wrong length");
        G_.conservativeResize(G_.rows() + 1, nv_);
        G_.row(G_.rows() - 1) = g.transpose();
        h_.conservativeResize(h_.size() + 1);
        h_(h_.size() - 1) = h;
    }
    /// Bound a single variable: sign * z[var] <= bound.
    void add_bound(int var, double sign, double bound) {
        Vec g = Vec::Zero(nv_);
        g(var) = sign;
        add_row(g, bound);
    }
    void add_disk(int var_a, int var_b, double radius_sq) {
        disks_.push_back({var_a, var_b, radius_sq});
    }

    int num_rows() const { return static_cast<int>(G_.rows()); }

    /// Constraint values c_i(z) (feasible iff all <= 0), ordered rows then
    /// disks then objective-domain conditions.
    Vec constraint_values(const Vec& z) const {
        Vec c(num_rows() + static_cast<int>(disks_.size()) + static_cast<int>(logs_.size()));
        int k = 0;
        if (num_rows() > 0) c.head(num_rows()) = G_ * z - h_;
        k = num_rows();
        for (const auto& d : disks_)
            c(k++) = z(d.var_a) * z(d.var_a) + z(d.var_b) * z(d.var_b) - d.radius_sq;
        for (const auto& t : logs_) c(k++) = -t.sign * z(t.var);
        return c;
    }

    bool strictly_feasible(const Vec& z, double margin = 0.0) const {
        return (constraint_values(z).array() < -margin).all();
    }

    double objective(const Vec& z) const {
        double f = 0.0;
        for (const auto& t : logs_) f += std::log(t.sign * z(t.var));
        return f;
    }

    Result solve(const Vec& start) const { return solve(start, Options{}); }

    Result solve(const Vec& start, const Options& opt) const {
        Result res;
        Vec z = start;
        if (z.size() != nv_) throw DimensionError("start point has wrong length");

        if (!strictly_feasible(z, 1e-12)) {
            if (!phase_one(z, opt, res)) {
                res.status = SolveStatus::Infeasible;
                return res;
            }
        }

        const int m = num_rows() + static_cast<int>(disks_.size());
        if (logs_.empty()) {
            // pure feasibility problem; the phase-one point is the answer
            res.z = z;
            res.status = SolveStatus::Optimal;
            res.gap = 0.0;
            res.kkt_residual = 0.0;
            return res;
        }

        double t = 1.0;
        bool centered_once = false;
        for (int stage = 0; stage < opt.max_stages; ++stage) {
            if (!center(z, t, opt, res)) break;
            centered_once = true;
            if (m == 0 || m / t <= opt.gap_tol) {
                res.z = z;
                res.status = SolveStatus::Optimal;
                res.gap = m == 0 ? 0.0 : m / t;
                return res;
            }
            t *= opt.mu;
        }
        res.z = z;
        res.status = centered_once && (m == 0 || m / t <= opt.gap_tol * 10)
                         ? SolveStatus::Optimal
                         : SolveStatus::MaxIter;
        res.gap = m == 0 ? 0.0 : m / t;
        return res;
    }

  private:
    void gradient_hessian(const Vec& z, double t, Vec& g, Mat& Hm) const {
        g = Vec::Zero(nv_);
        Hm = Mat::Zero(nv_, nv_);
        for (const auto& lt : logs_) {
            g(lt.var) += -t / z(lt.var);
            Hm(lt.var, lt.var) += t / (z(lt.var) * z(lt.var));
        }
        if (num_rows() > 0) {
            const Vec r = h_ - G_ * z;
            for (int i = 0; i < num_rows(); ++i) {
                const Vec gi = G_.row(i).transpose();
                g += gi / r(i);
                Hm.noalias() += (gi * gi.transpose()) / (r(i) * r(i));
            }
        }
        for (const auto& d : disks_) {
            const double a = z(d.var_a), b = z(d.var_b);
            const double w = d.radius_sq - a * a - b * b;
            g(d.var_a) += 2.0 * a / w;
            g(d.var_b) += 2.0 * b / w;
            Hm(d.var_a, d.var_a) += 2.0 / w + 4.0 * a * a / (w * w);
            Hm(d.var_b, d.var_b) += 2.0 / w + 4.0 * b * b / (w * w);
            Hm(d.var_a, d.var_b) += 4.0 * a * b / (w * w);
            Hm(d.var_b, d.var_a) += 4.0 * a * b / (w * w);
        }
    }

    /// Largest step keeping the next iterate strictly inside the domain.
    double max_step(const Vec& z, const Vec& dz) const {
        double alpha = std::numeric_limits<double>::infinity();
        for (const auto& lt : logs_) {
            const double dir = lt.sign * dz(lt.var);
            if (dir < 0.0) alpha = std::min(alpha, -(lt.sign * z(lt.var)) / dir);
        }
        if (num_rows() > 0) {
            const Vec r = h_ - G_ * z;
            const Vec gd = G_ * dz;
            for (int i = 0; i < num_rows(); ++i)
                if (gd(i) > 0.0) alpha = std::min(alpha, r(i) / gd(i));
        }
        for (const auto& d : disks_) {
            const double a = z(d.var_a), b = z(d.var_b);
            const double da = dz(d.var_a), db = dz(d.var_b);
            const double qa = da * da + db * db;
            const double qb = a * da + b * db;
            const double qc = a * a + b * b - d.radius_sq;  // < 0 inside
            if (qa < 1e-300) {
                if (qb > 0.0) alpha = std::min(alpha, -qc / (2.0 * qb));
                continue;
            }
            const double disc = qb * qb - qa * qc;
            if (disc >= 0.0) {
                const double root = (-qb + std::sqrt(disc)) / qa;
                if (root > 0.0) alpha = std::min(alpha, root);
            }
        }
        return alpha;
    }

    // Damped Newton for self-concordant functions: step 1/(1 + lambda) while
    // the decrement is large, full steps inside the quadratic region. No
    // function evaluations, which matters because phi scales with t and its
    // differences drop below double resolution long before the gradient does.
    bool center(Vec& z, double t, const Options& opt, Result& res) const {
        Vec g;
        Mat Hm;
        double best_sq = std::numeric_limits<double>::infinity();
        int stagnant = 0;
        for (int it = 0; it < opt.max_newton; ++it) {
            gradient_hessian(z, t, g, Hm);
            Eigen::LDLT<Mat> ldlt(Hm);
            Vec dz = ldlt.solve(-g);
            if (ldlt.info() != Eigen::Success || !dz.allFinite()) {
                const double ridge = 1e-12 * std::max(1.0, Hm.diagonal().maxCoeff());
                Hm.diagonal().array() += ridge;
                dz = Hm.ldlt().solve(-g);
                if (!dz.allFinite()) return false;
            }
            const double lambda_sq = std::max(-g.dot(dz), 0.0);
            ++res.newton_iterations;
            if (lambda_sq / 2.0 <= opt.newton_tol) {
                res.kkt_residual = g.lpNorm<Eigen::Infinity>() / t;
                return true;
            }
            // inside the quadratic region the decrement must keep collapsing;
            // a plateau there is the numerical floor (the damped phase may
            // legitimately plateau in lambda while it still descends)
            if (lambda_sq < 0.0625) {
                if (lambda_sq >= 0.99 * best_sq) {
                    if (++stagnant >= 3) {
                        res.kkt_residual = g.lpNorm<Eigen::Infinity>() / t;
                        return true;
                    }
                } else {
                    best_sq = lambda_sq;
                    stagnant = 0;
                }
            }
            const double lambda = std::sqrt(lambda_sq);
            double alpha = lambda > 0.25 ? 1.0 / (1.0 + lambda) : 1.0;
            alpha = std::min(alpha, 0.99 * max_step(z, dz));
            z += alpha * dz;
        }
        res.kkt_residual = g.lpNorm<Eigen::Infinity>() / t;
        return true;
    }

    /// Minimize the worst violation s over (z, s) with barrier log(s - c_i),
    /// stopping as soon as a strictly feasible z is found.
    bool phase_one(Vec& z, const Options& opt, Result& res) const {
        const int mc = num_rows() + static_cast<int>(disks_.size()) + static_cast<int>(logs_.size());
        Vec c = constraint_values(z);
        double s = c.maxCoeff() + 1.0;

        auto assemble = [&](const Vec& zz, double ss, double t, Vec& g, Mat& Hm, double& ds,
                            Vec& gs_cross, double& hss) {
            g = Vec::Zero(nv_);
            Hm = Mat::Zero(nv_, nv_);
            gs_cross = Vec::Zero(nv_);
            ds = t;
            hss = 0.0;
            const Vec cv = constraint_values(zz);
            int k = 0;
            auto accumulate = [&](const Vec& ci_grad, const Mat* ci_hess, double ci_val) {
                const double r = ss - ci_val;
                g += ci_grad / r;
                ds -= 1.0 / r;
                Hm.noalias() += (ci_grad * ci_grad.transpose()) / (r * r);
                if (ci_hess != nullptr) Hm += *ci_hess / r;
                gs_cross -= ci_grad / (r * r);
                hss += 1.0 / (r * r);
            };
            for (int i = 0; i < num_rows(); ++i)
                accumulate(G_.row(i).transpose(), nullptr, cv(k++));
            for (const auto& d : disks_) {
                Vec gi = Vec::Zero(nv_);
                gi(d.var_a) = 2.0 * zz(d.var_a);
                gi(d.var_b) = 2.0 * zz(d.var_b);
                Mat hi = Mat::Zero(nv_, nv_);
                hi(d.var_a, d.var_a) = 2.0;
                hi(d.var_b, d.var_b) = 2.0;
                accumulate(gi, &hi, cv(k++));
            }
            for (const auto& lt : logs_) {
                Vec gi = Vec::Zero(nv_);
                gi(lt.var) = -lt.sign;
                accumulate(gi, nullptr, cv(k++));
            }
        };

        double t = 1.0;
        for (int stage = 0; stage < opt.max_stages; ++stage) {
            for (int it = 0; it < opt.max_newton; ++it) {
                if (strictly_feasible(z, 1e-10)) return true;
                Vec g, gs_cross;
                Mat Hm;
                double ds = 0.0, hss = 0.0;
                assemble(z, s, t, g, Hm, ds, gs_cross, hss);
                Mat K(nv_ + 1, nv_ + 1);
                K.topLeftCorner(nv_, nv_) = Hm;
                K.topRightCorner(nv_, 1) = gs_cross;
                K.bottomLeftCorner(1, nv_) = gs_cross.transpose();
                K(nv_, nv_) = hss;
                Vec rhs(nv_ + 1);
                rhs.head(nv_) = -g;
                rhs(nv_) = -ds;
                Vec step = K.ldlt().solve(rhs);
                if (!step.allFinite()) {
                    K.diagonal().array() += 1e-12 * std::max(1.0, K.diagonal().maxCoeff());
                    step = K.ldlt().solve(rhs);
                    if (!step.allFinite()) break;
                }
                const double decrement = rhs.dot(step);
                ++res.newton_iterations;
                if (decrement / 2.0 <= opt.newton_tol) break;
                // ratio test on s - c_i > 0
                const Vec dz = step.head(nv_);
                const double dsv = step(nv_);
                // backtrack until the slack stays strictly positive
                double alpha = 1.0;
                while (alpha > 1e-14) {
                    const Vec cn = constraint_values(z + alpha * dz);
                    const double sn = s + alpha * dsv;
                    if (((sn - cn.array()) > 0.0).all()) break;
                    alpha *= 0.5;
                }
                if (alpha <= 1e-14) break;
                z += alpha * dz;
                s += alpha * dsv;
            }
            if (strictly_feasible(z, 1e-10)) return true;
            if (mc / t <= opt.gap_tol && s >= 0.0) break;  // converged infeasible
            t *= opt.mu;
        }
        if (strictly_feasible(z, 0.0)) return true;
        Vec cv = constraint_values(z);
        cv.maxCoeff(&res.worst_row);
        return false;
    }

    int nv_;
    std::vector<LogTerm> logs_;
    Mat G_;
    Vec h_;
    std::vector<Disk> disks_;
};

}  // namespace hostcap
