#pragma once

// Frame classifier (MLP trunk + kernel output layer), segment discriminator
// for adversarial training, and the checkpoint format shared by all models.

#include "fmrnn/featmap.hpp"
#include "fmrnn/layers.hpp"
#include "fmrnn/numcore.hpp"
#include "fmrnn/serial.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace fmrnn {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

struct ClassifierConfig {
    std::size_t d = 2048;
    std::size_t classes = 2;
    std::vector<std::size_t> trunk = {256, 128};
    std::size_t rbf_kernels = 256;
};

struct ClassifierModel {
    ClassifierConfig cfg;
    ParamStore store;
    Mlp trunk;
    RbfLayer rbf;
};

inline ClassifierModel make_classifier(const ClassifierConfig& cfg) {
    require(cfg.classes >= 2, "make_classifier: need at least two classes");
    require(!cfg.trunk.empty(), "make_classifier: trunk must have at least one layer");
    ClassifierModel m;
    m.cfg = cfg;
    std::vector<std::size_t> widths;
    widths.push_back(cfg.d);
    for (std::size_t w : cfg.trunk) widths.push_back(w);
    m.trunk = make_mlp(m.store, "trunk", widths);
    m.rbf = make_rbf_layer(m.store, "out", cfg.rbf_kernels, cfg.trunk.back(), cfg.classes);
    return m;
}

inline void init_classifier(ClassifierModel& m, Rng& rng) {
    init_mlp(m.store, m.trunk, rng);
    init_rbf_layer(m.store, m.rbf, rng);
}

struct ClassifierCache {
    MlpCache trunk;
};

// Class scores (softmax logits), one per class.
inline Vec classify_frame(const ClassifierModel& m, const Vec& frame,
                          ClassifierCache* cache = nullptr) {
    require(frame.size() == m.cfg.d, "classify_frame: frame width does not match model");
    ClassifierCache local;
    ClassifierCache& c = cache ? *cache : local;
    const Vec features = mlp_forward(m.store, m.trunk, frame, &c.trunk);
    return rbf_forward(m.store, m.rbf, features);
}

inline void classify_frame_backward(ClassifierModel& m, const ClassifierCache& cache,
                                    const Vec& d_scores) {
    const Vec d_features = rbf_backward(m.store, m.rbf, cache.trunk.acts.back(), d_scores);
    mlp_backward(m.store, m.trunk, cache.trunk, d_features);
}

// ---------------------------------------------------------------------------
// Discriminator
// ---------------------------------------------------------------------------

struct DiscriminatorConfig {
    std::size_t input = 128;
    std::vector<std::size_t> hidden = {64, 32};
};

struct DiscriminatorModel {
    DiscriminatorConfig cfg;
    ParamStore store;
    Mlp mlp;
};

inline DiscriminatorModel make_discriminator(const DiscriminatorConfig& cfg) {
    DiscriminatorModel m;
    m.cfg = cfg;
    std::vector<std::size_t> widths;
    widths.push_back(cfg.input);
    for (std::size_t w : cfg.hidden) widths.push_back(w);
    widths.push_back(1);
    m.mlp = make_mlp(m.store, "disc", widths);
    return m;
}

inline void init_discriminator(DiscriminatorModel& m, Rng& rng) {
    init_mlp(m.store, m.mlp, rng);
}

struct DiscriminatorCache {
    MlpCache mlp;
    double prob = 0.0;
};

// Probability that x is a real (not generated) sample.
inline double discriminate(const DiscriminatorModel& m, const Vec& x,
                           DiscriminatorCache* cache = nullptr) {
    require(x.size() == m.cfg.input, "discriminate: input width does not match model");
    DiscriminatorCache local;
    DiscriminatorCache& c = cache ? *cache : local;
    const Vec z = mlp_forward(m.store, m.mlp, x, &c.mlp);
    c.prob = logistic(z[0]);
    return c.prob;
}

// Backpropagates d loss / d prob; returns d loss / d input so generator
// gradients can flow through the discriminator.
inline Vec discriminate_backward(DiscriminatorModel& m, const DiscriminatorCache& cache,
                                 double d_prob) {
    const double p = cache.prob;
    const double d_z = d_prob * p * (1.0 - p);
    return mlp_backward(m.store, m.mlp, cache.mlp, Vec{d_z});
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------
//
// Layout: one magic line, one line of JSON (kind, format version, config
// echo, parameter table with names and shapes), then the raw parameter
// values as f64 little-endian in table order. Round trips are bit exact.

inline constexpr const char* kCheckpointMagic = "FMRNN-CKPT";
inline constexpr int kCheckpointVersion = 1;

struct CheckpointHeader {
    std::string kind;
    int version = 0;
    json config;
};

inline void save_checkpoint(const std::string& path, const std::string& kind,
                            const json& config, const ParamStore& store) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), "checkpoint: cannot open for writing: " + path);
    json table = json::array();
    for (std::size_t i = 0; i < store.count(); ++i) {
        const Tensor& t = store[ParamId{i}];
        table.push_back({{"name", store.name(ParamId{i})}, {"shape", t.shape}});
    }
    json header = {{"kind", kind},
                   {"version", kCheckpointVersion},
                   {"config", config},
                   {"params", table}};
    os << kCheckpointMagic << "\n" << header.dump() << "\n";
    for (std::size_t i = 0; i < store.count(); ++i) {
        for (double v : store[ParamId{i}].value) serial::write_f64le(os, v);
    }
    require(os.good(), "checkpoint: write failed: " + path);
}

inline CheckpointHeader read_checkpoint_header(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "checkpoint: cannot open: " + path);
    std::string magic;
    std::getline(is, magic);
    require(magic == kCheckpointMagic, "checkpoint: malformed file (bad magic): " + path);
    std::string header_line;
    std::getline(is, header_line);
    json header;
    try {
        header = json::parse(header_line);
    } catch (const json::exception&) {
        throw std::runtime_error("checkpoint: malformed file (bad header): " + path);
    }
    CheckpointHeader out;
    out.kind = header.value("kind", std::string{});
    out.version = header.value("version", 0);
    out.config = header.value("config", json::object());
    return out;
}

// Fills an already-shaped ParamStore. The stored parameter table must match
// the store's names and shapes exactly.
inline CheckpointHeader load_checkpoint(const std::string& path, const std::string& expect_kind,
                                        ParamStore& store) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "checkpoint: cannot open: " + path);
    std::string magic;
    std::getline(is, magic);
    require(magic == kCheckpointMagic, "checkpoint: malformed file (bad magic): " + path);
    std::string header_line;
    std::getline(is, header_line);
    json header;
    try {
        header = json::parse(header_line);
    } catch (const json::exception&) {
        throw std::runtime_error("checkpoint: malformed file (bad header): " + path);
    }
    const std::string kind = header.value("kind", std::string{});
    require(kind == expect_kind,
            "checkpoint: kind mismatch (expected " + expect_kind + ", found " + kind + "): " + path);
    const int version = header.value("version", 0);
    require(version == kCheckpointVersion,
            "checkpoint: unsupported format version " + std::to_string(version) + ": " + path);
    const json table = header.value("params", json::array());
    require(table.size() == store.count(), "checkpoint: parameter table mismatch: " + path);
    for (std::size_t i = 0; i < store.count(); ++i) {
        const Tensor& t = store[ParamId{i}];
        const std::string name = table[i].value("name", std::string{});
        const std::vector<std::size_t> shape =
            table[i].value("shape", std::vector<std::size_t>{});
        require(name == store.name(ParamId{i}) && shape == t.shape,
                "checkpoint: parameter table mismatch at entry " + std::to_string(i) + " (" +
                    name + "): " + path);
    }
    for (std::size_t i = 0; i < store.count(); ++i) {
        Tensor& t = store[ParamId{i}];
        for (double& v : t.value)
            require(serial::read_f64le(is, v), "checkpoint: truncated payload: " + path);
    }
    CheckpointHeader out;
    out.kind = kind;
    out.version = version;
    out.config = header.value("config", json::object());
    return out;
}

// ---------------------------------------------------------------------------
// Model config <-> JSON and typed save/load wrappers
// ---------------------------------------------------------------------------

inline json to_json(const ForecasterConfig& c) {
    return {{"mode", to_string(c.mode)}, {"readout", to_string(c.readout)},
            {"d", c.d},                  {"feature_step", c.D},
            {"stride", c.S},             {"hidden", c.H},
            {"kernels", c.rbf_kernels},  {"horizon", c.k}};
}

inline ForecasterConfig forecaster_config_from_json(const json& j) {
    ForecasterConfig c;
    c.mode = forecast_mode_from_string(j.value("mode", std::string{"flattened"}));
    c.readout = readout_kind_from_string(j.value("readout", std::string{"rbf"}));
    c.d = j.value("d", c.d);
    c.D = j.value("feature_step", c.D);
    c.S = j.value("stride", c.S);
    c.H = j.value("hidden", c.H);
    c.rbf_kernels = j.value("kernels", c.rbf_kernels);
    c.k = j.value("horizon", c.k);
    return c;
}

inline json to_json(const ClassifierConfig& c) {
    return {{"d", c.d}, {"classes", c.classes}, {"trunk", c.trunk}, {"kernels", c.rbf_kernels}};
}

inline ClassifierConfig classifier_config_from_json(const json& j) {
    ClassifierConfig c;
    c.d = j.value("d", c.d);
    c.classes = j.value("classes", c.classes);
    c.trunk = j.value("trunk", c.trunk);
    c.rbf_kernels = j.value("kernels", c.rbf_kernels);
    return c;
}

inline json to_json(const DiscriminatorConfig& c) {
    return {{"input", c.input}, {"hidden", c.hidden}};
}

inline DiscriminatorConfig discriminator_config_from_json(const json& j) {
    DiscriminatorConfig c;
    c.input = j.value("input", c.input);
    c.hidden = j.value("hidden", c.hidden);
    return c;
}

inline void save_forecaster(const std::string& path, const ForecasterModel& m) {
    save_checkpoint(path, "forecaster", to_json(m.cfg), m.store);
}

inline ForecasterModel load_forecaster(const std::string& path) {
    const CheckpointHeader h = read_checkpoint_header(path);
    require(h.kind == "forecaster",
            "checkpoint: kind mismatch (expected forecaster, found " + h.kind + "): " + path);
    ForecasterModel m = make_forecaster(forecaster_config_from_json(h.config));
    load_checkpoint(path, "forecaster", m.store);
    return m;
}

inline void save_classifier(const std::string& path, const ClassifierModel& m) {
    save_checkpoint(path, "classifier", to_json(m.cfg), m.store);
}

inline ClassifierModel load_classifier(const std::string& path) {
    const CheckpointHeader h = read_checkpoint_header(path);
    require(h.kind == "classifier",
            "checkpoint: kind mismatch (expected classifier, found " + h.kind + "): " + path);
    ClassifierModel m = make_classifier(classifier_config_from_json(h.config));
    load_checkpoint(path, "classifier", m.store);
    return m;
}

inline void save_discriminator(const std::string& path, const DiscriminatorModel& m) {
    save_checkpoint(path, "discriminator", to_json(m.cfg), m.store);
}

inline DiscriminatorModel load_discriminator(const std::string& path) {
    const CheckpointHeader h = read_checkpoint_header(path);
    require(h.kind == "discriminator",
            "checkpoint: kind mismatch (expected discriminator, found " + h.kind + "): " + path);
    DiscriminatorModel m = make_discriminator(discriminator_config_from_json(h.config));
    load_checkpoint(path, "discriminator", m.store);
    return m;
}

}  // namespace fmrnn
