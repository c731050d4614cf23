// hc: hosting-capacity analysis of radial distribution feeders.
//
// Subcommands: build (matrices + diagnostics), powerflow (one nonlinear
// solve), run (full pipeline: bounds -> region solves -> validation ->
// export), validate (Monte Carlo on an exported region), oracle (brute-force
// region for tiny feeders).
//
// Exit codes: 0 success, 1 usage, 2 solver failure or infeasible program,
// 3 validation found violations, 4 input/output error.

#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hostcap/hostcap.hpp"

namespace {

using namespace hostcap;

constexpr int kExitSolver = 2;
constexpr int kExitValidation = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
    std::string feeder;
    std::string case_name = "default";
    double pf = 0.0;  // 0 means not set
};

CaseSelection selection(const CommonArgs& args) {
    CaseSelection sel;
    sel.case_name = args.case_name;
    if (args.pf > 0.0) sel.pf_override = args.pf;
    return sel;
}

Vec parse_node_values(const FeederNetwork& net, const std::vector<std::string>& entries,
                      const char* what) {
    Vec out = Vec::Zero(net.n);
    std::map<std::string, int> internal;
    for (int i = 1; i <= net.n; ++i) internal[net.label(i)] = i - 1;
    for (const auto& e : entries) {
        const auto eq = e.find('=');
        if (eq == std::string::npos)
            throw Error(std::string(what) + " expects NODE=VALUE, got '" + e + "'");
        const std::string node = e.substr(0, eq);
        const auto it = internal.find(node);
        if (it == internal.end()) throw Error("unknown node '" + node + "'");
        out(it->second) = std::stod(e.substr(eq + 1));
    }
    return out;
}

void print_region(const FeederNetwork& net, const CapabilitySpec& cap, const char* name,
                  const OperatingRegion& region) {
    std::printf("%s region (pu):\n", name);
    std::printf("  %-6s %12s %12s %12s %12s\n", "node", "p_minus", "p_plus", "q_minus", "q_plus");
    for (int i = 0; i < net.n; ++i) {
        if (!cap.at(i).dispatchable) continue;
        std::printf("  %-6s %12.6f %12.6f %12.6f %12.6f\n", net.label(i + 1).c_str(),
                    region.p_minus(i), region.p_plus(i), region.q_minus(i), region.q_plus(i));
    }
}

void print_boundary(const char* name, const BoundaryReport& rep, const FeederNetwork& net) {
    auto one = [&](const char* dir, const BoundaryVerdict& v) {
        std::printf("  %s boundary: %s", dir, to_string(v.kind));
        if (v.kind == BoundaryVerdict::Kind::Violated) {
            std::printf(" (worst excursion %.6f pu^2 at node", v.worst_excursion);
            for (int node : v.nodes) std::printf(" %s", net.label(node).c_str());
            std::printf(")");
        }
        std::printf("\n");
    };
    std::printf("%s set-point check:\n", name);
    one("upper", rep.upper);
    one("lower", rep.lower);
}

int cmd_build(const CommonArgs& args, const std::string& out_dir) {
    const ParsedFeeder feeder = parse_feeder(args.feeder);
    const SensitivityMatrices m = build_matrices(feeder.net);
    const Mat identity_err =
        m.C * (Mat::Identity(m.n, m.n) - m.A) - Mat::Identity(m.n, m.n);
    Eigen::SelfAdjointEigenSolver<Mat> ep(m.M_p), eq(m.M_q);
    std::printf("feeder: %s (%s)\n", feeder.name.c_str(), args.feeder.c_str());
    std::printf("nodes: %d (+ substation), branches: %d\n", feeder.net.n, feeder.net.n);
    std::printf("base: %.3f kV, %.3f MVA, v0 = %.6f pu^2\n", feeder.net.base_kv,
                feeder.net.base_mva, feeder.net.v0);
    std::printf("det(I - A) = %.17g\n", incidence_determinant(m));
    std::printf("||C(I-A) - I||_inf = %.3e\n", identity_err.lpNorm<Eigen::Infinity>());
    std::printf("min eig M_p = %.6e, min eig M_q = %.6e\n", ep.eigenvalues().minCoeff(),
                eq.eigenvalues().minCoeff());
    std::printf("H range = [%.6e, %.6e]\n", m.H.minCoeff(), m.H.maxCoeff());
    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create " + out_dir);
        nlohmann::json j;
        auto dump = [](const Mat& mat) {
            nlohmann::json rows = nlohmann::json::array();
            for (Eigen::Index i = 0; i < mat.rows(); ++i) {
                nlohmann::json row = nlohmann::json::array();
                for (Eigen::Index k = 0; k < mat.cols(); ++k) row.push_back(mat(i, k));
                rows.push_back(row);
            }
            return rows;
        };
        j["M_p"] = dump(m.M_p);
        j["M_q"] = dump(m.M_q);
        j["H"] = dump(m.H);
        j["A"] = dump(m.A);
        const std::string path = (fs::path(out_dir) / "matrices.json").string();
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw IoError("cannot write " + path);
        out << j.dump(2) << '\n';
        std::printf("wrote %s\n", path.c_str());
    }
    return 0;
}

int cmd_powerflow(const CommonArgs& args, const std::vector<std::string>& p_entries,
                  const std::vector<std::string>& q_entries) {
    const ParsedFeeder feeder = parse_feeder(args.feeder);
    const SensitivityMatrices m = build_matrices(feeder.net);
    const CapabilitySpec cap = make_capability(feeder.net, feeder.records, selection(args));
    auto [p, q] = cap.fixed_profile();
    p += parse_node_values(feeder.net, p_entries, "--p");
    q += parse_node_values(feeder.net, q_entries, "--q");

    const PowerFlowSolution sol = solve_distflow(feeder.net, m, {p, q});
    const Vec v_lin = solve_lindist_voltages(m, {p, q}, feeder.net.v0);
    if (!sol.converged) {
        std::printf("power flow diverged after %d iterations (operating point is past the "
                    "solvable region)\n", sol.iterations);
        return kExitSolver;
    }
    std::printf("converged in %d iterations, max residual %.3e\n", sol.iterations,
                sol.max_residual);
    std::printf("  %-6s %10s %10s %12s %12s %12s\n", "node", "V (pu)", "lindist", "P (pu)",
                "Q (pu)", "l (pu)");
    for (int i = 0; i < feeder.net.n; ++i)
        std::printf("  %-6s %10.6f %10.6f %12.6f %12.6f %12.6f\n",
                    feeder.net.label(i + 1).c_str(), std::sqrt(sol.V(i)), std::sqrt(v_lin(i)),
                    sol.P(i), sol.Q(i), sol.l(i));
    return 0;
}

struct PipelineResult {
    OperatingRegion inner, lindist;
    CurrentBounds bounds;
};

PipelineResult solve_pipeline(const ParsedFeeder& feeder, const SensitivityMatrices& m,
                              const CapabilitySpec& cap) {
    PipelineResult out;
    out.bounds = compute_current_bounds(feeder.net, m, cap);
    if (out.bounds.corner_diverged)
        std::printf("note: %zu capability corner(s) diverged; affected branches use the "
                    "network current ceiling for l_max\n",
                    out.bounds.diverged_corners.size());
    out.inner = assemble_region(solve_p3(feeder.net, m, cap, out.bounds),
                                solve_p4(feeder.net, m, cap, out.bounds), cap,
                                RegionModel::InnerApprox);
    out.lindist = assemble_region(solve_p5(feeder.net, m, cap, Direction::Upper),
                                  solve_p5(feeder.net, m, cap, Direction::Lower), cap,
                                  RegionModel::LinDist);
    return out;
}

bool current_limits_ok(const FeederNetwork& net, const SensitivityMatrices& m,
                       const OperatingRegion& region) {
    {
        const PowerFlowSolution sol = solve_distflow(net, m, {region.p_plus, region.q_plus});
        if (sol.converged && ((net.l_max - sol.l).array() < -kViolationTol).any()) return false;
    }
    {
        const PowerFlowSolution sol = solve_distflow(net, m, {region.p_minus, region.q_minus});
        if (sol.converged && ((net.l_max - sol.l).array() < -kViolationTol).any()) return false;
    }
    return true;
}

int cmd_run(const CommonArgs& args, const std::string& model, long samples, std::uint64_t seed,
            const std::string& out_dir, const std::string& q_sampling, bool with_oracle,
            double grid_step) {
    const ParsedFeeder feeder = parse_feeder(args.feeder);
    const SensitivityMatrices m = build_matrices(feeder.net);
    const CapabilitySpec cap = make_capability(feeder.net, feeder.records, selection(args));
    const QSampling sampling =
        q_sampling == "envelope" ? QSampling::CapabilityEnvelope : QSampling::CertificateChord;

    const PipelineResult pipe = solve_pipeline(feeder, m, cap);
    print_region(feeder.net, cap, "lindist", pipe.lindist);
    print_region(feeder.net, cap, "inner", pipe.inner);

    const OperatingRegion& validated = model == "lindist" ? pipe.lindist : pipe.inner;

    const BoundaryReport boundary = check_boundary_feasibility(feeder.net, m, validated);
    print_boundary(model.c_str(), boundary, feeder.net);

    const MonteCarloReport report =
        monte_carlo_validate(feeder.net, m, validated, cap, samples, seed, sampling);
    std::printf("monte carlo (%s, %ld samples, seed %llu, %s q-sampling): %ld violation(s), "
                "%ld diverged\n", model.c_str(), report.sample_count,
                static_cast<unsigned long long>(report.seed), to_string(report.sampling),
                report.violation_count, report.diverged_count);

    const bool currents_ok = current_limits_ok(feeder.net, m, validated);
    if (!currents_ok)
        std::printf("warning: branch current limits exceeded at a region boundary; region is "
                    "downgraded\n");

    if (with_oracle) {
        const OracleRegion oracle = oracle_region(feeder.net, m, cap, grid_step);
        std::printf("oracle intervals (grid step %g):\n", oracle.step);
        bool contained = true;
        for (size_t d = 0; d < oracle.nodes.size(); ++d) {
            const int i = oracle.nodes[d] - 1;
            std::printf("  node %-4s oracle=[%.6f, %.6f] inner=[%.6f, %.6f]\n",
                        feeder.net.label(oracle.nodes[d]).c_str(), oracle.lo(d), oracle.hi(d),
                        pipe.inner.p_minus(i), pipe.inner.p_plus(i));
            contained = contained && pipe.inner.p_minus(i) >= oracle.lo(d) - grid_step &&
                        pipe.inner.p_plus(i) <= oracle.hi(d) + grid_step;
        }
        std::printf("containment (inner within oracle, one grid step): %s\n",
                    contained ? "holds" : "VIOLATED");
    }

    if (!out_dir.empty()) {
        const RegionExport table = build_region_export(feeder.net, cap, pipe.inner, pipe.lindist);
        const std::vector<nlohmann::json> regions = {region_to_json(feeder.net, pipe.inner),
                                                     region_to_json(feeder.net, pipe.lindist)};
        const ExportPaths paths = export_results(feeder.net, table, regions, &report, out_dir);
        std::printf("wrote %s, %s, %s, %s\n", paths.region_table.c_str(),
                    paths.region_evidence.c_str(), paths.summary.c_str(),
                    paths.voltage_samples.c_str());
    }

    const bool feasible = boundary.upper.kind == BoundaryVerdict::Kind::Feasible &&
                          boundary.lower.kind == BoundaryVerdict::Kind::Feasible &&
                          report.violation_count == 0 && currents_ok;
    return feasible ? 0 : kExitValidation;
}

int cmd_validate(const CommonArgs& args, const std::string& region_path, const std::string& model,
                 long samples, std::uint64_t seed, const std::string& out_dir,
                 const std::string& q_sampling) {
    const ParsedFeeder feeder = parse_feeder(args.feeder);
    const SensitivityMatrices m = build_matrices(feeder.net);
    const CapabilitySpec cap = make_capability(feeder.net, feeder.records, selection(args));
    const QSampling sampling =
        q_sampling == "envelope" ? QSampling::CapabilityEnvelope : QSampling::CertificateChord;

    std::ifstream in(region_path);
    if (!in) throw IoError("cannot open region file " + region_path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(region_path, e.what());
    }
    OperatingRegion region;
    bool found = false;
    const std::string wanted = model == "lindist" ? "lindist" : "inner";
    if (doc.is_array()) {
        for (const auto& r : doc)
            if (r.value("model", std::string{}) == wanted) {
                region = region_from_json(feeder.net, r);
                found = true;
            }
    } else {
        region = region_from_json(feeder.net, doc);
        found = true;
    }
    if (!found) throw ParseError(region_path, "no region with model '" + wanted + "'");

    const MonteCarloReport report =
        monte_carlo_validate(feeder.net, m, region, cap, samples, seed, sampling);
    const BoundaryReport boundary = check_boundary_feasibility(feeder.net, m, region);
    print_boundary(wanted.c_str(), boundary, feeder.net);
    std::printf("monte carlo: %ld violation(s), %ld diverged out of %ld samples\n",
                report.violation_count, report.diverged_count, report.sample_count);
    if (!out_dir.empty()) {
        const std::vector<nlohmann::json> regions = {region_to_json(feeder.net, region)};
        RegionExport empty_table;
        export_results(feeder.net, empty_table, regions, &report, out_dir);
        std::printf("wrote reports under %s\n", out_dir.c_str());
    }
    const bool ok = report.violation_count == 0 &&
                    boundary.upper.kind == BoundaryVerdict::Kind::Feasible &&
                    boundary.lower.kind == BoundaryVerdict::Kind::Feasible;
    return ok ? 0 : kExitValidation;
}

int cmd_oracle(const CommonArgs& args, double grid_step) {
    const ParsedFeeder feeder = parse_feeder(args.feeder);
    const SensitivityMatrices m = build_matrices(feeder.net);
    const CapabilitySpec cap = make_capability(feeder.net, feeder.records, selection(args));
    const OracleRegion oracle = oracle_region(feeder.net, m, cap, grid_step);
    const PipelineResult pipe = solve_pipeline(feeder, m, cap);
    std::printf("brute-force feasible intervals (grid step %g, %ld power flows):\n", oracle.step,
                oracle.points_checked);
    bool inner_ok = true, lindist_inside = true;
    for (size_t d = 0; d < oracle.nodes.size(); ++d) {
        const int i = oracle.nodes[d] - 1;
        std::printf("  node %-4s oracle=[%.6f, %.6f] inner=[%.6f, %.6f] lindist=[%.6f, %.6f]\n",
                    feeder.net.label(oracle.nodes[d]).c_str(), oracle.lo(d), oracle.hi(d),
                    pipe.inner.p_minus(i), pipe.inner.p_plus(i), pipe.lindist.p_minus(i),
                    pipe.lindist.p_plus(i));
        inner_ok = inner_ok && pipe.inner.p_minus(i) >= oracle.lo(d) - grid_step &&
                   pipe.inner.p_plus(i) <= oracle.hi(d) + grid_step;
        lindist_inside = lindist_inside && pipe.lindist.p_minus(i) >= oracle.lo(d) - grid_step;
    }
    std::printf("inner region contained in oracle region: %s\n", inner_ok ? "yes" : "NO");
    std::printf("lindist lower end inside oracle region: %s\n",
                lindist_inside ? "yes" : "no (linear model overreaches)");
    return inner_ok ? 0 : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hosting-capacity analysis for radial distribution feeders"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string out_dir, model = "inner", region_path, q_sampling = "chord";
    std::vector<std::string> p_entries, q_entries;
    long samples = 10000;
    std::uint64_t seed = 42;
    double grid_step = 1e-3;
    bool with_oracle = false;

    auto add_common = [&](CLI::App* cmd, bool with_case) {
        cmd->add_option("--feeder", common.feeder, "feeder file (JSON)")->required();
        if (with_case) {
            cmd->add_option("--case", common.case_name,
                            "capability case: unity-pf|constant-pf|box|quadratic|default");
            cmd->add_option("--pf", common.pf, "power factor for --case constant-pf");
        }
    };

    auto* build = app.add_subcommand("build", "build matrices and print diagnostics");
    add_common(build, false);
    build->add_option("--out", out_dir, "directory for matrices.json");

    auto* powerflow = app.add_subcommand("powerflow", "run one nonlinear power flow");
    add_common(powerflow, true);
    powerflow->add_option("--p", p_entries, "net real injection NODE=VALUE (pu), repeatable");
    powerflow->add_option("--q", q_entries, "net reactive injection NODE=VALUE (pu), repeatable");

    auto* run = app.add_subcommand("run", "full pipeline: bounds, regions, validation, export");
    add_common(run, true);
    run->add_option("--model", model, "region to validate: inner|lindist")
        ->check(CLI::IsMember({"inner", "lindist"}));
    run->add_option("--samples", samples, "Monte Carlo sample count");
    run->add_option("--seed", seed, "Monte Carlo seed");
    run->add_option("--out", out_dir, "export directory");
    run->add_option("--q-sampling", q_sampling, "chord|envelope")
        ->check(CLI::IsMember({"chord", "envelope"}));
    run->add_flag("--oracle", with_oracle, "also run the brute-force oracle");
    run->add_option("--grid-step", grid_step, "oracle grid step (pu)");

    auto* validate = app.add_subcommand("validate", "Monte Carlo on an exported region");
    add_common(validate, true);
    validate->add_option("--region", region_path, "region.json from a previous run")->required();
    validate->add_option("--model", model, "inner|lindist")
        ->check(CLI::IsMember({"inner", "lindist"}));
    validate->add_option("--samples", samples, "Monte Carlo sample count");
    validate->add_option("--seed", seed, "Monte Carlo seed");
    validate->add_option("--out", out_dir, "export directory");
    validate->add_option("--q-sampling", q_sampling, "chord|envelope")
        ->check(CLI::IsMember({"chord", "envelope"}));

    auto* oracle = app.add_subcommand("oracle", "brute-force region for tiny feeders");
    add_common(oracle, true);
    oracle->add_option("--grid-step", grid_step, "grid step (pu)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) return cmd_build(common, out_dir);
        if (powerflow->parsed()) return cmd_powerflow(common, p_entries, q_entries);
        if (run->parsed())
            return cmd_run(common, model, samples, seed, out_dir, q_sampling, with_oracle,
                           grid_step);
        if (validate->parsed())
            return cmd_validate(common, region_path, model, samples, seed, out_dir, q_sampling);
        if (oracle->parsed()) return cmd_oracle(common, grid_step);
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const UnsupportedVersionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const InfeasibleProgramError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSolver;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSolver;
    }
    return 1;
}
