#pragma once

// JSON (de)serialization for configuration structs plus the strict-schema
// loader used by the CLI: unknown keys are rejected, dotted-key overrides are
// applied on top of the file, and the fully-resolved config can be re-emitted
// as canonical JSON for hashing and snapshots.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qsta/attacks.hpp"
#include "qsta/lsgan.hpp"
#include "qsta/model.hpp"
#include "qsta/sfcm.hpp"
#include "qsta/simulate.hpp"
#include "qsta/train.hpp"

namespace qsta::cfg {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Pull a field if present, enforcing that json object keys are known.
namespace detail {

template <typename T>
void take(json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) {
        out = it->get<T>();
        j.erase(it);
    }
}

inline void expect_drained(const json& j, const std::string& where) {
    if (!j.empty()) {
        std::string keys;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!keys.empty()) keys += ", ";
            keys += it.key();
        }
        throw ConfigError("config: unknown key(s) in " + where + ": " + keys);
    }
}

}  // namespace detail

inline json to_json(const quantum::CircuitSpec& s) {
    return json{{"n_qubits", s.n_qubits},
                {"n_layers", s.n_layers},
                {"encoding", s.encoding},
                {"entanglement", s.entanglement}};
}

inline quantum::CircuitSpec circuit_from_json(json j) {
    quantum::CircuitSpec s;
    detail::take(j, "n_qubits", s.n_qubits);
    detail::take(j, "n_layers", s.n_layers);
    detail::take(j, "encoding", s.encoding);
    detail::take(j, "entanglement", s.entanglement);
    detail::expect_drained(j, "circuit");
    return s;
}

inline json to_json(const model::ModelConfig& m) {
    return json{{"variant", m.variant},
                {"seq_len", m.seq_len},
                {"feature_dim", m.feature_dim},
                {"d_model", m.d_model},
                {"n_heads", m.n_heads},
                {"d_ff", m.d_ff},
                {"n_encoder_layers", m.n_encoder_layers},
                {"n_classes", m.n_classes},
                {"circuit", to_json(m.circuit)}};
}

inline model::ModelConfig model_from_json(json j) {
    model::ModelConfig m;
    detail::take(j, "variant", m.variant);
    detail::take(j, "seq_len", m.seq_len);
    detail::take(j, "feature_dim", m.feature_dim);
    detail::take(j, "d_model", m.d_model);
    detail::take(j, "n_heads", m.n_heads);
    detail::take(j, "d_ff", m.d_ff);
    detail::take(j, "n_encoder_layers", m.n_encoder_layers);
    detail::take(j, "n_classes", m.n_classes);
    if (auto it = j.find("circuit"); it != j.end()) {
        m.circuit = circuit_from_json(*it);
        j.erase(it);
    }
    detail::expect_drained(j, "model");
    return m;
}

inline json to_json(const harness::TrainConfig& t) {
    return json{{"epochs", t.epochs},
                {"batch", t.batch},
                {"lr_max", t.lr_max},
                {"lr_min", t.lr_min},
                {"clip_norm", t.clip_norm},
                {"weight_decay", t.weight_decay},
                {"stop_accuracy", t.stop_accuracy},
                {"stop_auc", t.stop_auc}};
}

inline harness::TrainConfig training_from_json(json j) {
    harness::TrainConfig t;
    detail::take(j, "epochs", t.epochs);
    detail::take(j, "batch", t.batch);
    detail::take(j, "lr_max", t.lr_max);
    detail::take(j, "lr_min", t.lr_min);
    detail::take(j, "clip_norm", t.clip_norm);
    detail::take(j, "weight_decay", t.weight_decay);
    detail::take(j, "stop_accuracy", t.stop_accuracy);
    detail::take(j, "stop_auc", t.stop_auc);
    detail::expect_drained(j, "training");
    return t;
}

inline json to_json(const attack::AttackConfig& a) {
    return json{{"method", a.method},
                {"epsilon", a.epsilon},
                {"steps", a.steps},
                {"alpha", a.alpha},
                {"mu", a.mu},
                {"random_start", a.random_start},
                {"cw_confidence", a.cw_confidence},
                {"cw_lr", a.cw_lr},
                {"cw_iters", a.cw_iters},
                {"cw_lambda", a.cw_lambda}};
}

inline attack::AttackConfig attack_from_json(json j) {
    attack::AttackConfig a;
    detail::take(j, "method", a.method);
    detail::take(j, "epsilon", a.epsilon);
    detail::take(j, "steps", a.steps);
    detail::take(j, "alpha", a.alpha);
    detail::take(j, "mu", a.mu);
    detail::take(j, "random_start", a.random_start);
    detail::take(j, "cw_confidence", a.cw_confidence);
    detail::take(j, "cw_lr", a.cw_lr);
    detail::take(j, "cw_iters", a.cw_iters);
    detail::take(j, "cw_lambda", a.cw_lambda);
    detail::expect_drained(j, "attack");
    return a;
}

inline json to_json(const data::ScenarioGrid& g) {
    return json{{"load_levels", g.load_levels},
                {"motor_ratios", g.motor_ratios},
                {"fault_locations", g.fault_locations},
                {"clearing_times", g.clearing_times},
                {"n_buses", g.n_buses},
                {"rate_hz", g.rate_hz},
                {"length", g.length},
                {"fault_onset", g.fault_onset},
                {"tail_window", g.tail_window},
                {"noise_scale", g.noise_scale},
                {"fault_enabled", g.fault_enabled},
                {"stable_frac", g.stable_frac},
                {"unstable_frac", g.unstable_frac}};
}

inline data::ScenarioGrid datagen_from_json(json j) {
    data::ScenarioGrid g;
    detail::take(j, "load_levels", g.load_levels);
    detail::take(j, "motor_ratios", g.motor_ratios);
    detail::take(j, "fault_locations", g.fault_locations);
    detail::take(j, "clearing_times", g.clearing_times);
    detail::take(j, "n_buses", g.n_buses);
    detail::take(j, "rate_hz", g.rate_hz);
    detail::take(j, "length", g.length);
    detail::take(j, "fault_onset", g.fault_onset);
    detail::take(j, "tail_window", g.tail_window);
    detail::take(j, "noise_scale", g.noise_scale);
    detail::take(j, "fault_enabled", g.fault_enabled);
    detail::take(j, "stable_frac", g.stable_frac);
    detail::take(j, "unstable_frac", g.unstable_frac);
    detail::expect_drained(j, "datagen");
    return g;
}

inline json to_json(const cluster::SfcmConfig& s) {
    return json{{"n_clusters", s.n_clusters},
                {"lambda", s.lambda},
                {"max_iterations", s.max_iterations},
                {"tol", s.tol},
                {"membership_form", s.membership_form}};
}

inline cluster::SfcmConfig sfcm_from_json(json j) {
    cluster::SfcmConfig s;
    detail::take(j, "n_clusters", s.n_clusters);
    detail::take(j, "lambda", s.lambda);
    detail::take(j, "max_iterations", s.max_iterations);
    detail::take(j, "tol", s.tol);
    detail::take(j, "membership_form", s.membership_form);
    detail::expect_drained(j, "sfcm");
    return s;
}

inline json to_json(const gan::LsganConfig& g) {
    return json{{"latent_dim", g.latent_dim},
                {"g_hidden", g.g_hidden},
                {"d_hidden", g.d_hidden},
                {"lr", g.lr},
                {"batch", g.batch},
                {"epochs", g.epochs},
                {"max_iterations", g.max_iterations},
                {"k", g.k}};
}

inline gan::LsganConfig gan_from_json(json j) {
    gan::LsganConfig g;
    detail::take(j, "latent_dim", g.latent_dim);
    detail::take(j, "g_hidden", g.g_hidden);
    detail::take(j, "d_hidden", g.d_hidden);
    detail::take(j, "lr", g.lr);
    detail::take(j, "batch", g.batch);
    detail::take(j, "epochs", g.epochs);
    detail::take(j, "max_iterations", g.max_iterations);
    detail::take(j, "k", g.k);
    detail::expect_drained(j, "gan");
    return g;
}

// ---------------------------------------------------------------------------
// Experiment configuration (the CLI's single source of truth)
// ---------------------------------------------------------------------------

struct DatasetConfig {
    std::string path = "out/trajectories.jsonl";  // datagen output / stage input
    std::size_t n_per_cell = 17;                  // 120 scenario cells -> 2040 runs
    double test_frac = 0.2;
    std::size_t augment_total = 10000;     // window count after GAN augmentation
    double class0_share = 5162.0 / 10000.0;  // stable share of the augmented set
};

struct RobustnessConfig {
    std::vector<std::string> methods{"mifgsm", "pgd", "cw"};
    std::vector<std::string> threats{"white_box"};
    std::vector<double> epsilons{0.01, 0.03, 0.05};
    std::size_t eval_n = 200;           // attack-evaluation subset (0 = all)
    std::size_t surrogate_epochs = 20;  // gray-box distillation budget
    double adv_mix = 0.5;               // adversarial-training batch share
    double adv_epsilon = 0.03;
    std::vector<std::string> adv_methods{"pgd", "mifgsm"};
};

struct SweepConfig {
    std::vector<std::size_t> qubits{4, 6, 8, 10};
    std::vector<std::size_t> layers{2, 4, 6};
    std::vector<double> windows_s{0.03, 0.06, 0.09, 0.12, 0.2};
    std::vector<std::string> variants{"qstaformer", "transformer", "lstm"};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::size_t epochs = 15;  // per-cell budget (headline runs use training.epochs)
};

struct ExperimentConfig {
    std::string experiment_id = "exp";
    std::uint64_t seed = 2024;
    std::string output_dir = "out";
    DatasetConfig dataset;
    data::ScenarioGrid datagen;
    cluster::SfcmConfig sfcm;
    gan::LsganConfig gan;
    model::ModelConfig model;
    harness::TrainConfig training;
    attack::AttackConfig attack;
    RobustnessConfig robustness;
    SweepConfig sweep;
};

inline constexpr const char* kConfigSchema = "qsta_config_v1";

inline json to_json(const DatasetConfig& d) {
    return json{{"path", d.path},
                {"n_per_cell", d.n_per_cell},
                {"test_frac", d.test_frac},
                {"augment_total", d.augment_total},
                {"class0_share", d.class0_share}};
}

inline DatasetConfig dataset_from_json(json j) {
    DatasetConfig d;
    detail::take(j, "path", d.path);
    detail::take(j, "n_per_cell", d.n_per_cell);
    detail::take(j, "test_frac", d.test_frac);
    detail::take(j, "augment_total", d.augment_total);
    detail::take(j, "class0_share", d.class0_share);
    detail::expect_drained(j, "dataset");
    return d;
}

inline json to_json(const RobustnessConfig& r) {
    return json{{"methods", r.methods},
                {"threats", r.threats},
                {"epsilons", r.epsilons},
                {"eval_n", r.eval_n},
                {"surrogate_epochs", r.surrogate_epochs},
                {"adv_mix", r.adv_mix},
                {"adv_epsilon", r.adv_epsilon},
                {"adv_methods", r.adv_methods}};
}

inline RobustnessConfig robustness_from_json(json j) {
    RobustnessConfig r;
    detail::take(j, "methods", r.methods);
    detail::take(j, "threats", r.threats);
    detail::take(j, "epsilons", r.epsilons);
    detail::take(j, "eval_n", r.eval_n);
    detail::take(j, "surrogate_epochs", r.surrogate_epochs);
    detail::take(j, "adv_mix", r.adv_mix);
    detail::take(j, "adv_epsilon", r.adv_epsilon);
    detail::take(j, "adv_methods", r.adv_methods);
    detail::expect_drained(j, "robustness");
    return r;
}

inline json to_json(const SweepConfig& s) {
    return json{{"qubits", s.qubits},       {"layers", s.layers},
                {"windows_s", s.windows_s}, {"variants", s.variants},
                {"seeds", s.seeds},         {"epochs", s.epochs}};
}

inline SweepConfig sweep_from_json(json j) {
    SweepConfig s;
    detail::take(j, "qubits", s.qubits);
    detail::take(j, "layers", s.layers);
    detail::take(j, "windows_s", s.windows_s);
    detail::take(j, "variants", s.variants);
    detail::take(j, "seeds", s.seeds);
    detail::take(j, "epochs", s.epochs);
    detail::expect_drained(j, "sweep");
    return s;
}

inline json to_json(const ExperimentConfig& e) {
    return json{{"schema", kConfigSchema},
                {"experiment_id", e.experiment_id},
                {"seed", e.seed},
                {"output_dir", e.output_dir},
                {"dataset", to_json(e.dataset)},
                {"datagen", to_json(e.datagen)},
                {"sfcm", to_json(e.sfcm)},
                {"gan", to_json(e.gan)},
                {"model", to_json(e.model)},
                {"training", to_json(e.training)},
                {"attack", to_json(e.attack)},
                {"robustness", to_json(e.robustness)},
                {"sweep", to_json(e.sweep)}};
}

inline ExperimentConfig experiment_from_json(json j) {
    ExperimentConfig e;
    std::string schema = kConfigSchema;
    detail::take(j, "schema", schema);
    if (schema != kConfigSchema)
        throw ConfigError("config: unsupported schema '" + schema + "' (expected " +
                          kConfigSchema + ")");
    detail::take(j, "experiment_id", e.experiment_id);
    detail::take(j, "seed", e.seed);
    detail::take(j, "output_dir", e.output_dir);
    auto section = [&j](const char* key) -> json {
        if (auto it = j.find(key); it != j.end()) {
            json s = *it;
            j.erase(it);
            return s;
        }
        return json::object();
    };
    e.dataset = dataset_from_json(section("dataset"));
    e.datagen = datagen_from_json(section("datagen"));
    e.sfcm = sfcm_from_json(section("sfcm"));
    e.gan = gan_from_json(section("gan"));
    e.model = model_from_json(section("model"));
    e.training = training_from_json(section("training"));
    e.attack = attack_from_json(section("attack"));
    e.robustness = robustness_from_json(section("robustness"));
    e.sweep = sweep_from_json(section("sweep"));
    detail::expect_drained(j, "top level");
    return e;
}

// ---------------------------------------------------------------------------
// File loading, dotted-key overrides, canonical form, hashing
// ---------------------------------------------------------------------------

inline json load_json_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("config: cannot open " + path);
    json j = json::parse(is, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: malformed JSON in " + path);
    if (!j.is_object()) throw ConfigError("config: top level must be an object in " + path);
    return j;
}

// Apply one "dotted.key=value" override onto a JSON document. The value is
// parsed as JSON when possible (numbers, booleans, arrays), else taken as a
// bare string. Unknown keys are caught later by the schema parse.
inline void apply_override(json& j, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("config: override must be dotted.key=value, got '" + spec + "'");
    const std::string key = spec.substr(0, eq);
    const std::string raw = spec.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* cur = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part =
            key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty())
            throw ConfigError("config: override has an empty key segment: '" + spec + "'");
        if (dot == std::string::npos) {
            (*cur)[part] = value;
            return;
        }
        json& next = (*cur)[part];
        if (!next.is_null() && !next.is_object())
            throw ConfigError("config: override path crosses a non-object at '" + part + "'");
        cur = &next;
        start = dot + 1;
    }
}

// Load a config file, apply overrides in order, and parse strictly.
inline ExperimentConfig load_experiment(const std::string& path,
                                        const std::vector<std::string>& overrides = {}) {
    json j = load_json_file(path);
    for (const auto& o : overrides) apply_override(j, o);
    return experiment_from_json(j);
}

// Canonical serialized form: nlohmann objects iterate keys in sorted order,
// so a compact dump is already canonical.
inline std::string canonical_dump(const json& j) { return j.dump(); }

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Reproducible 16-hex-digit hash of a config's canonical form.
inline std::string config_hash(const json& j) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_dump(j))));
    return buf;
}

inline std::string config_hash(const ExperimentConfig& e) { return config_hash(to_json(e)); }

}  // namespace qsta::cfg
