#pragma once

// Result serialization. The sweep schema is the stable contract:
//   family,target,mode,N,T,r,n_trials,n_skipped,mean_q0,se_q0,
//   mean_in_ratio,se_in_ratio,pred_q0,pred_in_ratio
// (one row per grid point, r is the effective N/T). The JSON mirror uses
// the identical field names. Plots are made by external tools from these
// files; nothing here is interactive.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvest/errors.hpp"
#include "mvest/experiment.hpp"
#include "mvest/markowitz.hpp"
#include "mvest/replica.hpp"

namespace mvest {

enum class OutputFormat { csv, json };

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string iso8601_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline constexpr const char* kSweepHeader =
    "family,target,mode,N,T,r,n_trials,n_skipped,mean_q0,se_q0,"
    "mean_in_ratio,se_in_ratio,pred_q0,pred_in_ratio";

inline void write_sweep_csv(const std::vector<SweepResult>& results, std::ostream& out,
                            bool timestamp) {
    if (timestamp) out << "# generated_at=" << iso8601_now() << "\n";
    out << kSweepHeader << "\n";
    for (const auto& res : results) {
        for (const auto& p : res.points) {
            const auto pred = predict(p.r_effective);
            out << res.family_label << ',' << format_double(res.target_return) << ','
                << to_string(res.mode) << ',' << res.n_assets << ',' << p.t_obs << ','
                << format_double(p.r_effective) << ',' << res.n_trials << ',' << p.n_skipped
                << ',' << format_double(p.mean_q0) << ',' << format_double(p.se_q0) << ','
                << format_double(p.mean_in_ratio) << ',' << format_double(p.se_in_ratio)
                << ',' << format_double(pred.expected_q0) << ','
                << format_double(pred.in_sample_factor) << "\n";
        }
    }
}

inline nlohmann::json sweep_json(const std::vector<SweepResult>& results, bool timestamp) {
    nlohmann::json j;
    if (timestamp) j["generated_at"] = iso8601_now();
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& res : results) {
        for (const auto& p : res.points) {
            const auto pred = predict(p.r_effective);
            rows.push_back({{"family", res.family_label},
                            {"target", res.target_return},
                            {"mode", to_string(res.mode)},
                            {"N", res.n_assets},
                            {"T", p.t_obs},
                            {"r", p.r_effective},
                            {"n_trials", res.n_trials},
                            {"n_skipped", p.n_skipped},
                            {"mean_q0", p.mean_q0},
                            {"se_q0", p.se_q0},
                            {"mean_in_ratio", p.mean_in_ratio},
                            {"se_in_ratio", p.se_in_ratio},
                            {"pred_q0", pred.expected_q0},
                            {"pred_in_ratio", pred.in_sample_factor}});
        }
    }
    return j;
}

inline void write_sweep(const std::vector<SweepResult>& results, const std::string& path,
                        OutputFormat format, bool timestamp) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    if (format == OutputFormat::csv) {
        write_sweep_csv(results, out, timestamp);
    } else {
        out << sweep_json(results, timestamp).dump(2) << "\n";
    }
}

inline void write_frontier_csv(const std::vector<FrontierPoint>& points, std::ostream& out,
                               bool timestamp) {
    if (timestamp) out << "# generated_at=" << iso8601_now() << "\n";
    out << "target_return,variance,is_efficient\n";
    for (const auto& p : points) {
        out << format_double(p.target_return) << ',' << format_double(p.variance) << ','
            << (p.is_efficient ? "true" : "false") << "\n";
    }
}

inline void write_frontier(const std::vector<FrontierPoint>& points, const std::string& path,
                           OutputFormat format, bool timestamp) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    if (format == OutputFormat::csv) {
        write_frontier_csv(points, out, timestamp);
        return;
    }
    nlohmann::json j;
    if (timestamp) j["generated_at"] = iso8601_now();
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& p : points) {
        rows.push_back({{"target_return", p.target_return},
                        {"variance", p.variance},
                        {"is_efficient", p.is_efficient}});
    }
    out << j.dump(2) << "\n";
}

}  // namespace mvest
