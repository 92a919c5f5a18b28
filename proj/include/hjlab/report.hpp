#pragma once

// JSON report emission and a structural validator mirroring
// schemas/report.schema.json. Reports are deterministic: doubles are emitted
// through nlohmann::json (shortest round-trip form) and key order is sorted.

#include <json.hpp>

#include "regularity.hpp"

namespace hjlab {

using json = nlohmann::json;

struct WindowReportRow {
    double center_t = 0;
    Vec center_x{0, 0};
    double h = 0;
    double lambda = 0;
    double lhs = 0;
    double rhs = 0;
    double min_constant = 0;
    bool pass = false;
};

inline json window_row_json(const WindowReportRow& r, int d) {
    json center = json::array({r.center_t, r.center_x[0]});
    if (d == 2) center.push_back(r.center_x[1]);
    return json{{"center", center}, {"h", r.h},     {"lambda", r.lambda},
                {"lhs", r.lhs},     {"rhs", r.rhs}, {"min_constant", r.min_constant},
                {"pass", r.pass}};
}

inline json diagnose_report(const std::string& check, const json& params,
                            const std::vector<WindowReportRow>& rows, int d) {
    json windows = json::array();
    for (const auto& r : rows) windows.push_back(window_row_json(r, d));
    return json{{"check", check}, {"params", params}, {"windows", windows}};
}

// Structural validation of a report against the shipped schema's constraints:
// required keys with the right JSON types. Returns a list of violations
// (empty means valid).
inline std::vector<std::string> validate_report_structure(const json& rep) {
    std::vector<std::string> errs;
    auto need = [&](const json& obj, const char* key, json::value_t ty, const std::string& at) {
        if (!obj.contains(key)) {
            errs.push_back(at + ": missing '" + key + "'");
            return false;
        }
        const json& v = obj.at(key);
        bool ok = v.type() == ty ||
                  (ty == json::value_t::number_float && v.is_number()) ||
                  (ty == json::value_t::number_integer && v.is_number_integer());
        if (!ok) errs.push_back(at + ": '" + key + "' has wrong type");
        return ok;
    };
    if (!rep.is_object()) {
        errs.push_back("report must be a JSON object");
        return errs;
    }
    need(rep, "check", json::value_t::string, "report");
    need(rep, "params", json::value_t::object, "report");
    if (need(rep, "windows", json::value_t::array, "report")) {
        int i = 0;
        for (const auto& w : rep.at("windows")) {
            std::string at = "windows[" + std::to_string(i++) + "]";
            if (!w.is_object()) {
                errs.push_back(at + ": must be an object");
                continue;
            }
            if (need(w, "center", json::value_t::array, at)) {
                const auto& c = w.at("center");
                if (c.size() < 2 || c.size() > 3)
                    errs.push_back(at + ": center must be [t,x1] or [t,x1,x2]");
                for (const auto& x : c)
                    if (!x.is_number()) errs.push_back(at + ": center entries must be numbers");
            }
            need(w, "h", json::value_t::number_float, at);
            need(w, "lambda", json::value_t::number_float, at);
            need(w, "lhs", json::value_t::number_float, at);
            need(w, "rhs", json::value_t::number_float, at);
            need(w, "min_constant", json::value_t::number_float, at);
            need(w, "pass", json::value_t::boolean, at);
        }
    }
    return errs;
}

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

inline json scan_verdicts_json(const std::vector<double>& epsilons,
                               const std::vector<ScanVerdict>& verdicts) {
    json arr = json::array();
    for (size_t i = 0; i < epsilons.size(); ++i)
        arr.push_back(json{{"epsilon", epsilons[i]},
                           {"verdict", scan_verdict_name(verdicts[i])}});
    return arr;
}

}  // namespace hjlab
