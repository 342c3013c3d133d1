#pragma once

// Experiment artifact emission: named metric tables rendered as RFC-4180 CSV
// files plus one structured JSON summary per report. Summaries carry a schema
// version and the config hash; CSV bodies are formatted deterministically so
// a rerun with the same config and seed reproduces them byte for byte (wall
// clock readings live only in the summary).

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "qsta/dataset.hpp"

namespace qsta::report {

using json = nlohmann::json;

struct ReportError : std::runtime_error {
    explicit ReportError(const std::string& msg) : std::runtime_error(msg) {}
};

// One named rectangular table; every row must match the header width.
struct Table {
    std::string name;  // path-safe: [A-Za-z0-9_-]
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct Report {
    std::string experiment_id = "exp";
    std::string config_hash;
    std::vector<Table> tables;
    std::map<std::string, double> wall_clock_s;  // stage -> seconds
    std::vector<std::string> artifacts;          // extra files produced elsewhere
};

namespace detail {

inline void check_table(const Table& t) {
    if (t.name.empty()) throw ReportError("report: table with empty name");
    for (char c : t.name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
            throw ReportError("report: table name not path-safe: " + t.name);
    for (const auto& r : t.rows)
        if (r.size() != t.header.size())
            throw ReportError("report: ragged row in table " + t.name);
}

inline void write_csv(const Table& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ReportError("report: cannot open for writing: " + path);
    for (std::size_t i = 0; i < t.header.size(); ++i)
        os << (i ? "," : "") << data::csv_quote(t.header[i]);
    os << "\r\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << data::csv_quote(r[i]);
        os << "\r\n";
    }
    if (!os) throw ReportError("report: write failed: " + path);
}

}  // namespace detail

// Render a number for a table cell (doubles in shortest round-trip form).
inline std::string cell(double v) { return data::csv_number(v); }
template <typename T, std::enable_if_t<std::is_integral_v<T>, int> = 0>
std::string cell(T v) {
    return std::to_string(v);
}

// Write all tables as CSVs plus the JSON summary; returns the written paths
// (summary last). The directory is created if missing.
inline std::vector<std::string> emit_report(const Report& rep, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ReportError("report: cannot create directory " + dir + ": " + ec.message());

    std::vector<std::string> written;
    json tables = json::array();
    for (const auto& t : rep.tables) {
        detail::check_table(t);
        const std::string file = rep.experiment_id + "_" + t.name + ".csv";
        const std::string path = (fs::path(dir) / file).string();
        detail::write_csv(t, path);
        written.push_back(path);
        tables.push_back({{"name", t.name}, {"file", file}, {"rows", t.rows.size()}});
    }
    json summary{{"schema", "report_v1"},
                 {"experiment_id", rep.experiment_id},
                 {"config_hash", rep.config_hash},
                 {"tables", tables},
                 {"wall_clock_s", rep.wall_clock_s},
                 {"artifacts", rep.artifacts}};
    const std::string spath = (fs::path(dir) / (rep.experiment_id + "_summary.json")).string();
    std::ofstream os(spath, std::ios::binary);
    if (!os) throw ReportError("report: cannot open for writing: " + spath);
    os << summary.dump(2) << "\n";
    if (!os) throw ReportError("report: write failed: " + spath);
    written.push_back(spath);
    return written;
}

// Convenience: per-epoch loss trace as a two-column table.
inline Table loss_trace_table(const std::string& name, const std::vector<double>& trace) {
    Table t;
    t.name = name;
    t.header = {"epoch", "loss"};
    for (std::size_t i = 0; i < trace.size(); ++i)
        t.rows.push_back({std::to_string(i + 1), cell(trace[i])});
    return t;
}

}  // namespace qsta::report
