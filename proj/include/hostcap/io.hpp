#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hostcap/capability.hpp"
#include "hostcap/common.hpp"
#include "hostcap/feeder.hpp"
#include "hostcap/hosting.hpp"
#include "hostcap/validation.hpp"

namespace hostcap {

inline constexpr int kSchemaVersion = 1;

/// One capability record as stored in a feeder file. Carries the parameters
/// of every reactive coupling case so the case can be chosen at run time.
struct CapabilityRecord {
    std::string node;
    std::string default_case = "unity-pf";  // unity-pf | constant-pf | box | quadratic
    double p_min = 0.0, p_max = 0.0;
    double pf = 1.0;
    double q_min = 0.0, q_max = 0.0;
    double s_max = 0.0;
    double demand = 0.0, solar = 0.0;
};

struct ParsedFeeder {
    FeederNetwork net;
    std::vector<CapabilityRecord> records;
    std::string name;
    std::string description;
};

struct CaseSelection {
    std::string case_name = "default";  // default | unity-pf | constant-pf | box | quadratic
    std::optional<double> pf_override;
};

namespace detail {

inline double require_number(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number())
        throw ParseError(where, std::string("missing numeric field '") + key + "'");
    return j[key].get<double>();
}

inline std::string require_id(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ParseError(where, std::string("missing field '") + key + "'");
    if (j[key].is_string()) return j[key].get<std::string>();
    if (j[key].is_number_integer()) return std::to_string(j[key].get<long>());
    throw ParseError(where, std::string("field '") + key + "' must be a string or integer id");
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace detail

/// Reads a feeder file, converts everything to per-unit, validates the
/// network invariants and returns the breadth-first-ordered model together
/// with the raw capability records.
inline ParsedFeeder parse_feeder(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, std::string("invalid JSON: ") + e.what());
    }

    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
        throw ParseError(path, "missing schema_version");
    const int version = j["schema_version"].get<int>();
    if (version != kSchemaVersion)
        throw UnsupportedVersionError(path + ": schema_version " + std::to_string(version) +
                                      " is not supported (expected " +
                                      std::to_string(kSchemaVersion) + ")");

    if (!j.contains("base") || !j.contains("substation") || !j.contains("nodes") ||
        !j.contains("branches"))
        throw ParseError(path, "feeder file needs base, substation, nodes and branches");

    FeederSpec spec;
    spec.base_kv = detail::require_number(j["base"], "kv", path + ": base");
    spec.base_mva = detail::require_number(j["base"], "mva", path + ": base");
    spec.v0_mag = detail::require_number(j["substation"], "v_pu", path + ": substation");
    const double z_base = spec.base_kv * spec.base_kv / spec.base_mva;

    const std::string sub_id = detail::require_id(j["substation"], "id", path + ": substation");
    std::map<std::string, int> index_of;
    spec.labels.push_back(sub_id);
    spec.v_min_mag.push_back(0.0);
    spec.v_max_mag.push_back(2.0);
    index_of[sub_id] = 0;

    for (const auto& nj : j["nodes"]) {
        const std::string id = detail::require_id(nj, "id", path + ": nodes");
        if (index_of.count(id)) throw ParseError(path, "duplicate node id '" + id + "'");
        index_of[id] = static_cast<int>(spec.labels.size());
        spec.labels.push_back(id);
        spec.v_min_mag.push_back(detail::require_number(nj, "v_min_pu", path + ": node " + id));
        spec.v_max_mag.push_back(detail::require_number(nj, "v_max_pu", path + ": node " + id));
    }

    for (const auto& bj : j["branches"]) {
        FeederSpec::Edge e;
        const std::string from = detail::require_id(bj, "from", path + ": branches");
        const std::string to = detail::require_id(bj, "to", path + ": branches");
        if (!index_of.count(from))
            throw ParseError(path, "branch references unknown node '" + from + "'");
        if (!index_of.count(to))
            throw ParseError(path, "branch references unknown node '" + to + "'");
        e.from = index_of[from];
        e.to = index_of[to];
        const double r = detail::require_number(bj, "r", path + ": branch " + from + "-" + to);
        const double x = detail::require_number(bj, "x", path + ": branch " + from + "-" + to);
        std::string unit = bj.value("unit", std::string("pu"));
        if (unit == "ohm") {
            e.r_pu = r / z_base;
            e.x_pu = x / z_base;
        } else if (unit == "pu") {
            e.r_pu = r;
            e.x_pu = x;
        } else {
            throw ParseError(path, "branch " + from + "-" + to + " has unknown unit tag '" +
                                       unit + "' (expected 'ohm' or 'pu')");
        }
        e.l_max_pu = bj.value("l_max_pu", 1e6);
        spec.edges.push_back(e);
    }

    ParsedFeeder out;
    out.net = build_network(spec);
    out.name = j.value("name", std::string{});
    out.description = j.value("description", std::string{});

    if (j.contains("capabilities")) {
        for (const auto& cj : j["capabilities"]) {
            CapabilityRecord rec;
            rec.node = detail::require_id(cj, "node", path + ": capabilities");
            if (!index_of.count(rec.node))
                throw ParseError(path, "capability references unknown node '" + rec.node + "'");
            if (index_of[rec.node] == 0)
                throw ParseError(path, "the substation node cannot carry a capability record");
            rec.default_case = cj.value("default_case", std::string("unity-pf"));
            rec.p_min = detail::require_number(cj, "p_min_pu", path + ": capability " + rec.node);
            rec.p_max = detail::require_number(cj, "p_max_pu", path + ": capability " + rec.node);
            rec.pf = cj.value("pf", 1.0);
            rec.q_min = cj.value("q_min_pu", 0.0);
            rec.q_max = cj.value("q_max_pu", 0.0);
            rec.s_max = cj.value("s_max_pu2", 0.0);
            rec.demand = cj.value("demand_pu", 0.0);
            rec.solar = cj.value("solar_pu", 0.0);
            out.records.push_back(rec);
        }
    }
    return out;
}

/// Resolves the capability records against a case selection into the
/// internal-order CapabilitySpec the solvers consume.
inline CapabilitySpec make_capability(const FeederNetwork& net,
                                      const std::vector<CapabilityRecord>& records,
                                      const CaseSelection& sel = {}) {
    std::vector<NodeCapability> nodes(static_cast<size_t>(net.n));
    std::map<std::string, int> internal_of;
    for (int i = 1; i <= net.n; ++i) internal_of[net.label(i)] = i - 1;

    for (const auto& rec : records) {
        auto it = internal_of.find(rec.node);
        if (it == internal_of.end())
            throw Error("capability record references node '" + rec.node +
                        "' absent from the network");
        NodeCapability& c = nodes[static_cast<size_t>(it->second)];
        c.p_min = rec.p_min;
        c.p_max = rec.p_max;
        c.demand = rec.demand;
        c.solar = rec.solar;
        // a zero-width envelope at zero is a pure forecast record: the node
        // contributes its fixed net injection but is not dispatched
        c.dispatchable = !(rec.p_min == 0.0 && rec.p_max == 0.0);
        if (!c.dispatchable) continue;
        const std::string name = sel.case_name == "default" ? rec.default_case : sel.case_name;
        if (name == "unity-pf") {
            c.kind = CapabilityCase::ConstantPF;
            c.gamma = 0.0;
        } else if (name == "constant-pf") {
            c.kind = CapabilityCase::ConstantPF;
            c.gamma = gamma_from_pf(sel.pf_override.value_or(rec.pf));
        } else if (name == "box") {
            c.kind = CapabilityCase::Box;
            c.q_min = rec.q_min;
            c.q_max = rec.q_max;
        } else if (name == "quadratic") {
            c.kind = CapabilityCase::Quadratic;
            c.s_max = rec.s_max;
        } else {
            throw Error("unknown capability case '" + name + "'");
        }
    }
    // non-dispatchable nodes keep forecast offsets when a record omits bounds;
    // here absence of a record simply means a passive node
    return CapabilitySpec(std::move(nodes));
}

/// Serializes the in-memory model back to the schema (per-unit, internal
/// breadth-first order). Reparsing the output reproduces the model exactly.
inline nlohmann::json serialize_feeder(const ParsedFeeder& feeder) {
    const FeederNetwork& net = feeder.net;
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    if (!feeder.name.empty()) j["name"] = feeder.name;
    if (!feeder.description.empty()) j["description"] = feeder.description;
    j["base"] = {{"kv", net.base_kv}, {"mva", net.base_mva}};
    j["substation"] = {{"id", net.label(0)}, {"v_pu", std::sqrt(net.v0)}};
    j["nodes"] = nlohmann::json::array();
    for (int i = 1; i <= net.n; ++i) {
        j["nodes"].push_back({{"id", net.label(i)},
                              {"v_min_pu", std::sqrt(net.v_min(i - 1))},
                              {"v_max_pu", std::sqrt(net.v_max(i - 1))}});
    }
    j["branches"] = nlohmann::json::array();
    for (int i = 1; i <= net.n; ++i) {
        const int b = i - 1;
        j["branches"].push_back({{"from", net.label(net.parent[static_cast<size_t>(i)])},
                                 {"to", net.label(i)},
                                 {"r", net.branch_r(b)},
                                 {"x", net.branch_x(b)},
                                 {"unit", "pu"},
                                 {"l_max_pu", net.l_max(b)}});
    }
    j["capabilities"] = nlohmann::json::array();
    for (const auto& rec : feeder.records) {
        j["capabilities"].push_back({{"node", rec.node},
                                     {"default_case", rec.default_case},
                                     {"p_min_pu", rec.p_min},
                                     {"p_max_pu", rec.p_max},
                                     {"pf", rec.pf},
                                     {"q_min_pu", rec.q_min},
                                     {"q_max_pu", rec.q_max},
                                     {"s_max_pu2", rec.s_max},
                                     {"demand_pu", rec.demand},
                                     {"solar_pu", rec.solar}});
    }
    return j;
}

/// One row of the region table, everything in pu on the network base.
struct RegionExportRow {
    std::string node;
    double p_lindist_minus = 0.0, p_lindist_plus = 0.0;
    double p_c_minus = 0.0, p_c_plus = 0.0;
    double delta_p_c = 0.0;
    double p_flex_minus = 0.0, p_flex_plus = 0.0;
};

struct RegionExport {
    std::vector<RegionExportRow> rows;
};

/// Tabulates the two regions side by side, one row per dispatchable node.
inline RegionExport build_region_export(const FeederNetwork& net, const CapabilitySpec& cap,
                                        const OperatingRegion& inner,
                                        const OperatingRegion& lindist) {
    RegionExport out;
    for (int i = 0; i < net.n; ++i) {
        if (!cap.at(i).dispatchable) continue;
        RegionExportRow row;
        row.node = net.label(i + 1);
        row.p_lindist_minus = lindist.p_minus(i);
        row.p_lindist_plus = lindist.p_plus(i);
        row.p_c_minus = inner.p_minus(i);
        row.p_c_plus = inner.p_plus(i);
        row.delta_p_c = inner.p_plus(i) - inner.p_minus(i);
        row.p_flex_minus = inner.flex_minus(i);
        row.p_flex_plus = inner.flex_plus(i);
        for (double v : {row.p_lindist_minus, row.p_lindist_plus, row.p_c_minus, row.p_c_plus,
                         row.delta_p_c, row.p_flex_minus, row.p_flex_plus})
            if (!std::isfinite(v)) throw Error("region export produced a non-finite column");
        out.rows.push_back(row);
    }
    return out;
}

/// Region evidence document, complete enough to re-run validation later.
inline nlohmann::json region_to_json(const FeederNetwork& net, const OperatingRegion& region) {
    nlohmann::json j;
    j["model"] = to_string(region.model);
    j["status"] = to_string(region.status);
    j["nodes"] = nlohmann::json::array();
    for (int i = 0; i < net.n; ++i) {
        j["nodes"].push_back({{"id", net.label(i + 1)},
                              {"p_minus", region.p_minus(i)},
                              {"p_plus", region.p_plus(i)},
                              {"q_minus", region.q_minus(i)},
                              {"q_plus", region.q_plus(i)},
                              {"v_minus", region.V_minus(i)},
                              {"v_plus", region.V_plus(i)},
                              {"flex_minus", region.flex_minus(i)},
                              {"flex_plus", region.flex_plus(i)}});
    }
    return j;
}

inline OperatingRegion region_from_json(const FeederNetwork& net, const nlohmann::json& j) {
    OperatingRegion region;
    const std::string model = j.value("model", std::string("inner"));
    region.model = model == "lindist" ? RegionModel::LinDist : RegionModel::InnerApprox;
    const std::string status = j.value("status", std::string("optimal"));
    region.status = status == "optimal" ? SolveStatus::Optimal : SolveStatus::MaxIter;
    const int n = net.n;
    region.p_plus = region.p_minus = region.q_plus = region.q_minus = Vec::Zero(n);
    region.V_plus = region.V_minus = Vec::Constant(n, net.v0);
    region.flex_plus = region.flex_minus = Vec::Zero(n);
    std::map<std::string, int> internal_of;
    for (int i = 1; i <= n; ++i) internal_of[net.label(i)] = i - 1;
    for (const auto& nj : j["nodes"]) {
        const std::string id = detail::require_id(nj, "id", "region file");
        auto it = internal_of.find(id);
        if (it == internal_of.end())
            throw ParseError("region file", "node '" + id + "' is not in the network");
        const int i = it->second;
        region.p_minus(i) = detail::require_number(nj, "p_minus", "region node " + id);
        region.p_plus(i) = detail::require_number(nj, "p_plus", "region node " + id);
        region.q_minus(i) = detail::require_number(nj, "q_minus", "region node " + id);
        region.q_plus(i) = detail::require_number(nj, "q_plus", "region node " + id);
        region.V_minus(i) = nj.value("v_minus", net.v0);
        region.V_plus(i) = nj.value("v_plus", net.v0);
        region.flex_minus(i) = nj.value("flex_minus", region.p_minus(i));
        region.flex_plus(i) = nj.value("flex_plus", region.p_plus(i));
    }
    region.delta_p = region.p_plus - region.p_minus;
    return region;
}

inline nlohmann::json report_to_json(const FeederNetwork& net, const MonteCarloReport& rep) {
    nlohmann::json j;
    j["sample_count"] = rep.sample_count;
    j["violation_count"] = rep.violation_count;
    j["diverged_count"] = rep.diverged_count;
    j["seed"] = rep.seed;
    j["q_sampling"] = to_string(rep.sampling);
    j["nodes"] = nlohmann::json::array();
    for (int i = 0; i < net.n; ++i) {
        j["nodes"].push_back({{"id", net.label(i + 1)},
                              {"v_min", rep.v_min_seen(i)},
                              {"v_q05", rep.v_q05(i)},
                              {"v_q50", rep.v_q50(i)},
                              {"v_q95", rep.v_q95(i)},
                              {"v_max", rep.v_max_seen(i)}});
    }
    return j;
}

struct ExportPaths {
    std::string region_table;
    std::string region_evidence;
    std::string summary;
    std::string voltage_samples;  // empty when no report was exported
};

/// Writes the region table, the region evidence documents, the validation
/// summary and the per-sample voltage table for external violin plotting.
/// Overwrites idempotently; identical inputs yield byte-identical files.
inline ExportPaths export_results(const FeederNetwork& net, const RegionExport& table,
                                  const std::vector<nlohmann::json>& regions,
                                  const MonteCarloReport* report, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());

    ExportPaths paths;
    paths.region_table = (fs::path(dir) / "region.csv").string();
    {
        std::ofstream out(paths.region_table, std::ios::trunc);
        if (!out) throw IoError("cannot write " + paths.region_table);
        out << "node,p_lindist_minus,p_lindist_plus,p_c_minus,p_c_plus,delta_p_c,"
               "p_flex_minus,p_flex_plus\n";
        for (const auto& row : table.rows) {
            out << row.node << ',' << detail::format_double(row.p_lindist_minus) << ','
                << detail::format_double(row.p_lindist_plus) << ','
                << detail::format_double(row.p_c_minus) << ','
                << detail::format_double(row.p_c_plus) << ','
                << detail::format_double(row.delta_p_c) << ','
                << detail::format_double(row.p_flex_minus) << ','
                << detail::format_double(row.p_flex_plus) << '\n';
        }
    }

    paths.region_evidence = (fs::path(dir) / "region.json").string();
    {
        std::ofstream out(paths.region_evidence, std::ios::trunc);
        if (!out) throw IoError("cannot write " + paths.region_evidence);
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : regions) j.push_back(r);
        out << j.dump(2) << '\n';
    }

    if (report != nullptr) {
        paths.summary = (fs::path(dir) / "summary.json").string();
        {
            std::ofstream out(paths.summary, std::ios::trunc);
            if (!out) throw IoError("cannot write " + paths.summary);
            out << report_to_json(net, *report).dump(2) << '\n';
        }
        paths.voltage_samples = (fs::path(dir) / "voltage_samples.csv").string();
        {
            std::ofstream out(paths.voltage_samples, std::ios::trunc);
            if (!out) throw IoError("cannot write " + paths.voltage_samples);
            out << "sample";
            for (int i = 1; i <= net.n; ++i) out << ",v_" << net.label(i);
            out << ",violated\n";
            for (long s = 0; s < report->sample_count; ++s) {
                out << s;
                for (int i = 0; i < net.n; ++i) {
                    const double v = report->voltage_samples(i, s);
                    out << ',' << (std::isfinite(v) ? detail::format_double(std::sqrt(v)) : "nan");
                }
                out << ',' << int(report->violated[static_cast<size_t>(s)]) << '\n';
            }
        }
    }
    return paths;
}

}  // namespace hostcap
