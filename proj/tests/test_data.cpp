// Trajectory containers, JSONL persistence, windowing, splits, CSV export,
// and the synthetic disturbance generator with its certification bands.
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "qsta/dataset.hpp"
#include "qsta/simulate.hpp"

using namespace qsta;
using data::Trajectory;
using data::WindowSet;

namespace {

std::string temp_path(const std::string& name) {
    return std::string("/tmp/qsta_test_") + name;
}

Trajectory tiny_traj(const std::string& id, int label, std::size_t n_buses,
                     std::size_t length) {
    Trajectory t;
    t.id = id;
    t.label = label;
    t.rate_hz = 100.0;
    t.scenario = {1.0, 0.8, 0.25, 0.05};
    t.P.assign(n_buses, std::vector<double>(length));
    t.Q.assign(n_buses, std::vector<double>(length));
    t.U.assign(n_buses, std::vector<double>(length));
    for (std::size_t b = 0; b < n_buses; ++b)
        for (std::size_t i = 0; i < length; ++i) {
            t.P[b][i] = 0.1 * double(b) + 0.001 * double(i);
            t.Q[b][i] = 0.2 * double(b) - 0.002 * double(i);
            t.U[b][i] = 1.0 - 0.01 * double(b) + 1e-5 * double(i);
        }
    return t;
}

}  // namespace

TEST_CASE("window length from sampling duration rounds to samples") {
    REQUIRE(data::window_steps(0.1, 100.0) == 10);
    REQUIRE(data::window_steps(0.25, 100.0) == 25);
    REQUIRE(data::window_steps(0.104, 100.0) == 10);  // rounds down
    REQUIRE(data::window_steps(0.105, 100.0) == 11);  // rounds up (round half away)
    REQUIRE_THROWS_AS(data::window_steps(0.01, 100.0), data::DataError);
}

TEST_CASE("window layout: P block, Q block, then U block per time step") {
    Trajectory t = tiny_traj("w", data::kStable, 2, 20);
    Tensor w = data::make_window(t, 5, 4);
    REQUIRE(w.rows() == 4);
    REQUIRE(w.cols() == 6);
    REQUIRE(data::u_channel_offset(2) == 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t b = 0; b < 2; ++b) {
            REQUIRE(w.at(i, b) == t.P[b][5 + i]);
            REQUIRE(w.at(i, 2 + b) == t.Q[b][5 + i]);
            REQUIRE(w.at(i, 4 + b) == t.U[b][5 + i]);
        }
    REQUIRE_THROWS_AS(data::make_window(t, 17, 4), data::DataError);
}

TEST_CASE("window building skips unlabeled and clamps onset for short records") {
    std::vector<Trajectory> ts;
    ts.push_back(tiny_traj("full", data::kStable, 1, 30));
    ts.push_back(tiny_traj("unlab", data::kUnlabeled, 1, 30));
    ts.push_back(tiny_traj("short", data::kUnstable, 1, 10));  // exactly window length
    WindowSet s = data::make_windows(ts, 10, 10);
    REQUIRE(s.size() == 2);
    REQUIRE(s.ids[0] == "full");
    REQUIRE(s.ids[1] == "short");
    REQUIRE(s.y[0] == std::size_t(data::kStable));
    REQUIRE(s.y[1] == std::size_t(data::kUnstable));
    // the short record was windowed from its start
    REQUIRE(s.x[1].at(0, 0) == ts[2].P[0][0]);

    ts.push_back(tiny_traj("too-short", data::kStable, 1, 5));
    REQUIRE_THROWS_AS(data::make_windows(ts, 10, 10), data::DataError);
}

TEST_CASE("JSONL save/load round-trips trajectories bit-exactly") {
    std::vector<Trajectory> ts;
    ts.push_back(tiny_traj("a-1", data::kStable, 2, 12));
    ts.push_back(tiny_traj("b,quoted \"id\"", data::kUnstable, 1, 7));
    ts.push_back(tiny_traj("c-3", data::kUnlabeled, 3, 5));
    ts[0].provenance.source = "generator";
    ts[0].provenance.seed = 42;
    ts[0].provenance.intent = data::kStable;
    ts[0].provenance.certified = true;
    ts[1].provenance.source = "attack";
    ts[1].provenance.method = "pgd";
    ts[1].provenance.epsilon = 0.03;
    ts[1].provenance.threat = "white_box";

    const std::string path = temp_path("roundtrip.jsonl");
    data::save_trajectories(ts, path);
    auto back = data::load_trajectories(path);
    REQUIRE(back.size() == ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        REQUIRE(back[i].id == ts[i].id);
        REQUIRE(back[i].label == ts[i].label);
        REQUIRE(back[i].rate_hz == ts[i].rate_hz);
        REQUIRE(back[i].scenario.load_level == ts[i].scenario.load_level);
        REQUIRE(back[i].scenario.clearing_s == ts[i].scenario.clearing_s);
        REQUIRE(back[i].P == ts[i].P);
        REQUIRE(back[i].Q == ts[i].Q);
        REQUIRE(back[i].U == ts[i].U);
        REQUIRE(back[i].provenance.source == ts[i].provenance.source);
        REQUIRE(back[i].provenance.certified == ts[i].provenance.certified);
    }
    REQUIRE(back[1].provenance.method == "pgd");
    REQUIRE(back[1].provenance.epsilon == 0.03);
    std::remove(path.c_str());
}

TEST_CASE("trajectory file errors carry line numbers and schema checks") {
    const std::string path = temp_path("bad.jsonl");
    {
        std::ofstream os(path, std::ios::binary);
        os << data::to_json(tiny_traj("ok", 0, 1, 4)).dump() << "\n";
        os << "{not json\n";
    }
    try {
        data::load_trajectories(path);
        FAIL("expected a parse error");
    } catch (const data::DataError& e) {
        REQUIRE(std::string(e.what()).find(":2:") != std::string::npos);
    }
    {
        std::ofstream os(path, std::ios::binary);
        data::json j = data::to_json(tiny_traj("ok", 0, 1, 4));
        j["schema"] = "other_v9";
        os << j.dump() << "\n";
    }
    REQUIRE_THROWS_AS(data::load_trajectories(path), data::DataError);
    REQUIRE_THROWS_AS(data::load_trajectories("/nonexistent/nope.jsonl"), data::DataError);
    std::remove(path.c_str());
}

TEST_CASE("stratified split keeps per-class ratios within one sample") {
    WindowSet all;
    Trajectory t0 = tiny_traj("x", data::kStable, 1, 12);
    for (int i = 0; i < 37; ++i)
        all.push(data::make_window(t0, 0, 4), 0, "s" + std::to_string(i));
    for (int i = 0; i < 23; ++i)
        all.push(data::make_window(t0, 2, 4), 1, "u" + std::to_string(i));

    Rng rng(555);
    auto [train, test] = data::stratified_split(all, 0.2, rng);
    REQUIRE(train.size() + test.size() == all.size());

    auto count = [](const WindowSet& s, std::size_t cls) {
        std::size_t n = 0;
        for (auto y : s.y) n += (y == cls);
        return n;
    };
    REQUIRE(std::abs(double(count(test, 0)) - 0.2 * 37.0) <= 1.0);
    REQUIRE(std::abs(double(count(test, 1)) - 0.2 * 23.0) <= 1.0);

    std::set<std::string> seen;
    for (const auto& id : train.ids) seen.insert(id);
    for (const auto& id : test.ids) REQUIRE(seen.count(id) == 0);

    // deterministic given the same generator state
    Rng rng2(555);
    auto [train2, test2] = data::stratified_split(all, 0.2, rng2);
    REQUIRE(train2.ids == train.ids);
    REQUIRE(test2.ids == test.ids);
}

TEST_CASE("CSV export quotes per RFC 4180 and uses CRLF") {
    WindowSet s;
    Trajectory t = tiny_traj("needs \"quote\", really", data::kStable, 1, 4);
    s.push(data::make_window(t, 0, 2), 0, t.id);
    const std::string path = temp_path("wins.csv");
    data::export_windows_csv(s, path);
    std::ifstream is(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    REQUIRE(content.find("id,label,c0_t0,c1_t0,c2_t0,c0_t1,c1_t1,c2_t1\r\n") == 0);
    REQUIRE(content.find("\"needs \"\"quote\"\", really\",0,") != std::string::npos);
    REQUIRE(content.substr(content.size() - 2) == "\r\n");
    std::remove(path.c_str());
}

// ---------------------------------------------------------------------------
// Synthetic disturbance generator
// ---------------------------------------------------------------------------

TEST_CASE("generator is deterministic in the seed and sensitive to it") {
    data::ScenarioGrid g;
    auto a = data::simulate_trajectories(g, 2, 7);
    auto b = data::simulate_trajectories(g, 2, 7);
    auto c = data::simulate_trajectories(g, 2, 8);
    REQUIRE(a.size() == b.size());
    bool all_equal = true, any_diff_seed = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i].U == b[i].U && a[i].P == b[i].P && a[i].Q == b[i].Q)) all_equal = false;
        if (a[i].U != c[i].U) any_diff_seed = true;
    }
    REQUIRE(all_equal);
    REQUIRE(any_diff_seed);
}

TEST_CASE("scenario grid covers every cell with the right parameters") {
    data::ScenarioGrid g;
    REQUIRE(g.n_cells() == 120);
    auto ts = data::simulate_trajectories(g, 1, 3);
    REQUIRE(ts.size() == 120);
    std::set<std::tuple<double, double, double, double>> cells;
    for (const auto& t : ts)
        cells.insert({t.scenario.load_level, t.scenario.motor_ratio, t.scenario.fault_location,
                      t.scenario.clearing_s});
    REQUIRE(cells.size() == 120);
    for (const auto& t : ts) {
        REQUIRE(t.n_buses() == g.n_buses);
        REQUIRE(t.length() == g.length);
        REQUIRE(t.rate_hz == g.rate_hz);
        REQUIRE(t.provenance.source == "generator");
    }
}

TEST_CASE("full corpus: class counts match the certification design") {
    data::ScenarioGrid g;
    auto ts = data::simulate_trajectories(g, 17, 2024);
    REQUIRE(ts.size() == 2040);
    data::heuristic_label_all(ts, g.tail_window);
    std::map<int, int> counts;
    for (const auto& t : ts) counts[t.label]++;
    // 11 certified-stable cells, 41 certified-unstable, 68 ambiguous (x17 each)
    REQUIRE(counts[data::kStable] == 187);
    REQUIRE(counts[data::kUnstable] == 697);
    REQUIRE(counts[data::kUnlabeled] == 1156);
    for (const auto& t : ts) {
        if (t.provenance.certified) {
            REQUIRE(t.label == t.provenance.intent);
            REQUIRE(t.label != data::kUnlabeled);
        } else {
            REQUIRE(t.label == data::kUnlabeled);
        }
    }
}

TEST_CASE("certified tail bands hold for every bus of every trajectory") {
    data::ScenarioGrid g;
    auto ts = data::simulate_trajectories(g, 4, 99);
    const std::size_t tail_from = g.length - g.tail_window;
    for (const auto& t : ts) {
        double lo = 1e9, hi = -1e9;
        for (const auto& bus : t.U)
            for (std::size_t i = tail_from; i < t.length(); ++i) {
                lo = std::min(lo, bus[i]);
                hi = std::max(hi, bus[i]);
            }
        if (t.provenance.intent == data::kStable) {
            REQUIRE(lo >= 0.9);
        } else if (t.provenance.intent == data::kUnstable) {
            REQUIRE(hi <= 0.7);
        } else {
            REQUIRE(lo > 0.7);   // ambiguous band sits strictly between the
            REQUIRE(hi < 0.9);   // two certification thresholds
        }
    }
}

TEST_CASE("voltages are physical and faults actually depress them") {
    data::ScenarioGrid g;
    auto ts = data::simulate_trajectories(g, 2, 31);
    for (const auto& t : ts) {
        for (const auto& bus : t.U) {
            for (double v : bus) {
                REQUIRE(v >= 0.0);
                REQUIRE(v <= 1.2);
            }
            // pre-fault near nominal
            for (std::size_t i = 0; i < g.fault_onset; ++i)
                REQUIRE(bus[i] > 0.95);
        }
        // during-fault minimum across buses clearly below pre-fault
        double fault_min = 1e9;
        for (const auto& bus : t.U)
            for (std::size_t i = g.fault_onset; i < g.fault_onset + 5; ++i)
                fault_min = std::min(fault_min, bus[i]);
        REQUIRE(fault_min < 0.95);
    }
}

TEST_CASE("disabling the fault yields quiescent certified-stable trajectories") {
    data::ScenarioGrid g;
    g.fault_enabled = false;
    auto ts = data::simulate_trajectories(g, 1, 5);
    for (const auto& t : ts) {
        for (const auto& bus : t.U)
            for (double v : bus) REQUIRE(std::abs(v - 1.0) < 0.05);
        REQUIRE(data::heuristic_label(t, g.tail_window) == data::kStable);
        REQUIRE_FALSE(t.provenance.certified);
    }
}

TEST_CASE("zero noise scale makes repeated cells identical across samples") {
    data::ScenarioGrid g;
    g.noise_scale = 0.0;
    auto ts = data::simulate_trajectories(g, 2, 77);
    // with noise off, sample k and k+1 of the same cell coincide exactly
    for (std::size_t c = 0; c + 1 < ts.size(); c += 2) {
        REQUIRE(ts[c].U == ts[c + 1].U);
        REQUIRE(ts[c].P == ts[c + 1].P);
    }
}

TEST_CASE("heuristic label needs a valid tail window") {
    Trajectory t = tiny_traj("t", data::kUnlabeled, 1, 10);
    REQUIRE_THROWS_AS(data::heuristic_label(t, 0), data::DataError);
    REQUIRE_THROWS_AS(data::heuristic_label(t, 11), data::DataError);
}
