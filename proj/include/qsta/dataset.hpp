#pragma once

// Trajectory dataset types and file formats.
//
// A Trajectory holds multi-bus P/Q/U time series in per-unit values plus the
// scenario metadata it was generated under. Files are line-delimited JSON
// (one trajectory per line, schema "traj_v1"); model-ready windows export to
// RFC-4180 CSV. Model inputs are raw per-unit values (all channels are O(1)
// by construction), so perturbation budgets in p.u. apply to model inputs
// directly.
//
// Channel layout of a flattened window row, per time step:
//   [P_bus0..P_bus{n-1}, Q_bus0.., U_bus0..]  ->  U channels come last.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsta/rng.hpp"
#include "qsta/tensor.hpp"

namespace qsta::data {

using json = nlohmann::json;

constexpr int kStable = 0;
constexpr int kUnstable = 1;
constexpr int kUnlabeled = -1;

constexpr const char* kTrajSchema = "traj_v1";

struct Scenario {
    double load_level = 1.0;      // fraction of nominal load
    double motor_ratio = 0.8;     // induction-motor share of load
    double fault_location = 0.0;  // electrical position along the line, 0..1
    double clearing_s = 0.05;     // fault clearing time in seconds
};

struct Provenance {
    std::string source = "generator";  // generator | lsgan | attack
    std::uint64_t seed = 0;
    int intent = kUnlabeled;  // generator's intended class, if any
    bool certified = false;   // generator guarantees the tail band
    std::string method;       // attack method, when source == "attack"
    double epsilon = 0.0;
    std::string threat;  // white | gray, when source == "attack"
};

struct Trajectory {
    std::string id;
    int label = kUnlabeled;
    double rate_hz = 100.0;
    Scenario scenario;
    // Each channel is [n_buses][length] in per-unit values.
    std::vector<std::vector<double>> P, Q, U;
    Provenance provenance;

    std::size_t n_buses() const { return U.size(); }
    std::size_t length() const { return U.empty() ? 0 : U[0].size(); }
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// JSONL serialization
// ---------------------------------------------------------------------------

inline json to_json(const Trajectory& t) {
    json j;
    j["schema"] = kTrajSchema;
    j["id"] = t.id;
    j["label"] = t.label;
    j["rate_hz"] = t.rate_hz;
    j["scenario"] = {{"load_level", t.scenario.load_level},
                     {"motor_ratio", t.scenario.motor_ratio},
                     {"fault_location", t.scenario.fault_location},
                     {"clearing_s", t.scenario.clearing_s}};
    j["P"] = t.P;
    j["Q"] = t.Q;
    j["U"] = t.U;
    json prov = {{"source", t.provenance.source},
                 {"seed", t.provenance.seed},
                 {"intent", t.provenance.intent},
                 {"certified", t.provenance.certified}};
    if (t.provenance.source == "attack") {
        prov["method"] = t.provenance.method;
        prov["epsilon"] = t.provenance.epsilon;
        prov["threat"] = t.provenance.threat;
    }
    j["provenance"] = prov;
    return j;
}

inline Trajectory trajectory_from_json(const json& j) {
    if (!j.contains("schema") || j.at("schema").get<std::string>() != kTrajSchema)
        throw DataError("trajectory record has wrong or missing schema tag");
    Trajectory t;
    t.id = j.at("id").get<std::string>();
    t.label = j.at("label").get<int>();
    t.rate_hz = j.at("rate_hz").get<double>();
    const json& s = j.at("scenario");
    t.scenario.load_level = s.at("load_level").get<double>();
    t.scenario.motor_ratio = s.at("motor_ratio").get<double>();
    t.scenario.fault_location = s.at("fault_location").get<double>();
    t.scenario.clearing_s = s.at("clearing_s").get<double>();
    t.P = j.at("P").get<std::vector<std::vector<double>>>();
    t.Q = j.at("Q").get<std::vector<std::vector<double>>>();
    t.U = j.at("U").get<std::vector<std::vector<double>>>();
    const json& p = j.at("provenance");
    t.provenance.source = p.at("source").get<std::string>();
    t.provenance.seed = p.at("seed").get<std::uint64_t>();
    t.provenance.intent = p.at("intent").get<int>();
    t.provenance.certified = p.at("certified").get<bool>();
    if (p.contains("method")) t.provenance.method = p.at("method").get<std::string>();
    if (p.contains("epsilon")) t.provenance.epsilon = p.at("epsilon").get<double>();
    if (p.contains("threat")) t.provenance.threat = p.at("threat").get<std::string>();
    return t;
}

inline void save_trajectories(const std::vector<Trajectory>& ts, const std::string& path) {
    std::ofstream os(path, std::ios::binary);  // binary: stable newlines across platforms
    if (!os) throw DataError("cannot open for writing: " + path);
    for (const auto& t : ts) os << to_json(t).dump() << "\n";
    if (!os) throw DataError("write failed: " + path);
}

inline std::vector<Trajectory> load_trajectories(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open for reading: " + path);
    std::vector<Trajectory> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed record");
        out.push_back(trajectory_from_json(j));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model-ready windows
// ---------------------------------------------------------------------------

// A labeled set of fixed-length windows ready for the sequence models:
// each x is [L x F] with F = 3 * n_buses (P, then Q, then U channels).
struct WindowSet {
    std::vector<Tensor> x;
    std::vector<std::size_t> y;
    std::vector<std::string> ids;

    std::size_t size() const { return x.size(); }
    std::size_t seq_len() const { return x.empty() ? 0 : x[0].rows(); }
    std::size_t feature_dim() const { return x.empty() ? 0 : x[0].cols(); }

    void push(Tensor w, std::size_t label, std::string id) {
        x.push_back(std::move(w));
        y.push_back(label);
        ids.push_back(std::move(id));
    }

    WindowSet subset(const std::vector<std::size_t>& idx) const {
        WindowSet s;
        for (std::size_t i : idx) s.push(x[i], y[i], ids[i]);
        return s;
    }
};

// Index of the first U channel in a window row.
inline std::size_t u_channel_offset(std::size_t n_buses) { return 2 * n_buses; }

// Cut an [L x F] window starting at the fault onset sample.
inline Tensor make_window(const Trajectory& t, std::size_t onset, std::size_t L) {
    const std::size_t nb = t.n_buses();
    if (onset + L > t.length())
        throw DataError("window [" + std::to_string(onset) + ", " + std::to_string(onset + L) +
                        ") exceeds trajectory length " + std::to_string(t.length()));
    Tensor w = Tensor::zeros({L, 3 * nb});
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t b = 0; b < nb; ++b) {
            w.at(i, b) = t.P[b][onset + i];
            w.at(i, nb + b) = t.Q[b][onset + i];
            w.at(i, 2 * nb + b) = t.U[b][onset + i];
        }
    }
    return w;
}

// Window length for a sampling duration: L = round(window_s * rate_hz).
inline std::size_t window_steps(double window_s, double rate_hz) {
    const double L = std::round(window_s * rate_hz);
    if (L < 2) throw DataError("sampling window shorter than 2 steps");
    return static_cast<std::size_t>(L);
}

// Build a WindowSet from labeled trajectories (skips unlabeled ones). The
// onset is clamped per trajectory so window-length records (e.g. synthetic
// ones stored as bare windows) can mix with full-length simulations.
inline WindowSet make_windows(const std::vector<Trajectory>& ts, std::size_t onset, std::size_t L) {
    WindowSet s;
    for (const auto& t : ts) {
        if (t.label == kUnlabeled) continue;
        if (t.length() < L)
            throw DataError("trajectory '" + t.id + "' shorter than window length " +
                            std::to_string(L));
        const std::size_t at = std::min(onset, t.length() - L);
        s.push(make_window(t, at, L), static_cast<std::size_t>(t.label), t.id);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

// Stratified split: class ratios preserved within one sample per class.
inline std::pair<WindowSet, WindowSet> stratified_split(const WindowSet& all, double test_frac,
                                                        Rng& rng) {
    if (test_frac <= 0.0 || test_frac >= 1.0)
        throw DataError("test fraction must lie strictly between 0 and 1");
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < all.size(); ++i) by_class[all.y[i]].push_back(i);
    std::vector<std::size_t> train_idx, test_idx;
    for (auto& [cls, idx] : by_class) {
        rng.shuffle(idx);
        const std::size_t n_test = static_cast<std::size_t>(std::round(test_frac * idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_test ? test_idx : train_idx).push_back(idx[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {all.subset(train_idx), all.subset(test_idx)};
}

// ---------------------------------------------------------------------------
// CSV export (RFC-4180)
// ---------------------------------------------------------------------------

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        q += c;
        if (c == '"') q += '"';
    }
    q += '"';
    return q;
}

inline std::string csv_number(double v) {
    char buf[32];  // shortest representation that round-trips exactly
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Flattened windows: header id,label,c{channel}_t{step}... one row per window.
inline void export_windows_csv(const WindowSet& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << "id,label";
    if (!s.x.empty()) {
        for (std::size_t t = 0; t < s.seq_len(); ++t)
            for (std::size_t c = 0; c < s.feature_dim(); ++c)
                os << ",c" << c << "_t" << t;
    }
    os << "\r\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        os << csv_quote(s.ids[i]) << "," << s.y[i];
        for (double v : s.x[i].data()) os << "," << csv_number(v);
        os << "\r\n";
    }
    if (!os) throw DataError("write failed: " + path);
}

}  // namespace qsta::data
