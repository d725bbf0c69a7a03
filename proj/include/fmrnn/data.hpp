#pragma once

// Feature-file ingestion (manifest + per-video binary matrices with a text
// fallback), deterministic synthetic dataset generation, split handling, and
// the block-correlation analysis.

#include "fmrnn/numcore.hpp"
#include "fmrnn/serial.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fmrnn {

using nlohmann::json;

struct FeatureSequence {
    std::string video_id;
    std::size_t label = 0;
    Matrix frames;  // T x d, row = frame feature x_t
};

struct ManifestEntry {
    std::string video_id;
    std::size_t label = 0;
    std::string file;  // relative to the manifest's directory
    std::size_t frames = 0;
    std::string split;  // "train" or "test"
};

struct DatasetManifest {
    std::string name;
    std::size_t d = 0;
    std::vector<std::string> class_names;
    std::vector<ManifestEntry> entries;
};

struct Dataset {
    std::string name;
    std::size_t d = 0;
    std::vector<std::string> class_names;
    std::vector<FeatureSequence> train;
    std::vector<FeatureSequence> test;

    std::size_t classes() const { return class_names.size(); }

    std::vector<const FeatureSequence*> all() const {
        std::vector<const FeatureSequence*> out;
        out.reserve(train.size() + test.size());
        for (const auto& s : train) out.push_back(&s);
        for (const auto& s : test) out.push_back(&s);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Feature files
// ---------------------------------------------------------------------------
//
// Binary layout: magic "FMF1", u32 LE frame count T, u32 LE width d, then
// T*d IEEE-754 f32 LE values, frame-major. Text fallback: one frame per
// line, comma-separated decimals, no header.

inline constexpr char kFeatureMagic[4] = {'F', 'M', 'F', '1'};

inline void save_feature_file(const std::string& path, const Matrix& frames) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), "feature file: cannot open for writing: " + path);
    os.write(kFeatureMagic, 4);
    serial::write_u32le(os, static_cast<std::uint32_t>(frames.rows));
    serial::write_u32le(os, static_cast<std::uint32_t>(frames.cols));
    for (double v : frames.a) serial::write_f32le(os, static_cast<float>(v));
    require(os.good(), "feature file: write failed: " + path);
}

inline Matrix load_feature_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "feature file: cannot open: " + path);
    char magic[4] = {};
    is.read(magic, 4);
    require(is.good() && std::equal(magic, magic + 4, kFeatureMagic),
            "feature file: bad magic: " + path);
    std::uint32_t T = 0, d = 0;
    require(serial::read_u32le(is, T) && serial::read_u32le(is, d),
            "feature file: truncated header: " + path);
    require(T >= 1 && d >= 1, "feature file: empty dimensions: " + path);
    Matrix m(T, d);
    for (auto& v : m.a) {
        float f;
        require(serial::read_f32le(is, f), "feature file: truncated payload: " + path);
        v = static_cast<double>(f);
    }
    return m;
}

inline void save_feature_text(const std::string& path, const Matrix& frames) {
    std::ofstream os(path);
    require(os.good(), "feature file: cannot open for writing: " + path);
    os.precision(17);
    for (std::size_t r = 0; r < frames.rows; ++r) {
        for (std::size_t c = 0; c < frames.cols; ++c) {
            if (c) os << ',';
            os << frames.at(r, c);
        }
        os << '\n';
    }
    require(os.good(), "feature file: write failed: " + path);
}

inline Matrix load_feature_text(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "feature file: cannot open: " + path);
    std::vector<Vec> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        Vec row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error("feature file: unparseable value '" + cell +
                                         "' in " + path);
            }
        }
        require(rows.empty() || row.size() == rows.front().size(),
                "feature file: ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), "feature file: no frames in " + path);
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), m.row(r));
    return m;
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

// ---------------------------------------------------------------------------
// Manifest + dataset IO
// ---------------------------------------------------------------------------

inline void save_dataset(const std::string& dir, const Dataset& ds, bool text_format = false) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    DatasetManifest man;
    man.name = ds.name;
    man.d = ds.d;
    man.class_names = ds.class_names;
    auto emit = [&](const FeatureSequence& s, const char* split) {
        ManifestEntry e;
        e.video_id = s.video_id;
        e.label = s.label;
        e.file = s.video_id + (text_format ? ".txt" : ".fmf");
        e.frames = s.frames.rows;
        e.split = split;
        const std::string path = (fs::path(dir) / e.file).string();
        if (text_format)
            save_feature_text(path, s.frames);
        else
            save_feature_file(path, s.frames);
        man.entries.push_back(std::move(e));
    };
    for (const auto& s : ds.train) emit(s, "train");
    for (const auto& s : ds.test) emit(s, "test");

    json jman = {{"name", man.name}, {"d", man.d}, {"classes", man.class_names}};
    json videos = json::array();
    for (const auto& e : man.entries) {
        videos.push_back({{"id", e.video_id},
                          {"label", e.label},
                          {"file", e.file},
                          {"frames", e.frames},
                          {"split", e.split}});
    }
    jman["videos"] = videos;
    const std::string mpath = (fs::path(dir) / "manifest.json").string();
    std::ofstream os(mpath);
    require(os.good(), "dataset manifest: cannot open for writing: " + mpath);
    os << jman.dump(2) << "\n";
    require(os.good(), "dataset manifest: write failed: " + mpath);
}

inline Dataset load_dataset(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream is(manifest_path);
    require(is.good(), "dataset manifest: cannot open: " + manifest_path);
    json jman;
    try {
        is >> jman;
    } catch (const json::exception& e) {
        throw std::runtime_error("dataset manifest: parse error in " + manifest_path + ": " +
                                 e.what());
    }
    Dataset ds;
    ds.name = jman.value("name", std::string{"dataset"});
    ds.d = jman.value("d", std::size_t{0});
    ds.class_names = jman.value("classes", std::vector<std::string>{});
    require(ds.d >= 1, "dataset manifest: missing or zero d: " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    for (const auto& jv : jman.value("videos", json::array())) {
        const std::string id = jv.value("id", std::string{});
        const std::size_t label = jv.value("label", std::size_t{0});
        const std::string file = jv.value("file", std::string{});
        const std::size_t frames = jv.value("frames", std::size_t{0});
        const std::string split = jv.value("split", std::string{"train"});
        require(!id.empty() && !file.empty(),
                "dataset manifest: entry missing id or file: " + manifest_path);
        require(label < ds.class_names.size() || ds.class_names.empty(),
                "dataset manifest: label out of range for video " + id);
        const std::string path = (base / file).string();
        FeatureSequence seq;
        seq.video_id = id;
        seq.label = label;
        seq.frames = has_suffix(file, ".txt") ? load_feature_text(path) : load_feature_file(path);
        require(seq.frames.rows == frames,
                "dataset: header mismatch for file " + path + " (manifest frames=" +
                    std::to_string(frames) + ", file frames=" + std::to_string(seq.frames.rows) +
                    ")");
        require(seq.frames.cols == ds.d,
                "dataset: header mismatch for file " + path + " (manifest d=" +
                    std::to_string(ds.d) + ", file d=" + std::to_string(seq.frames.cols) + ")");
        for (std::size_t r = 0; r < seq.frames.rows; ++r)
            for (std::size_t c = 0; c < seq.frames.cols; ++c)
                require(std::isfinite(seq.frames.at(r, c)),
                        "dataset: non-finite value in video " + id + " at frame " +
                            std::to_string(r));
        (split == "test" ? ds.test : ds.train).push_back(std::move(seq));
    }
    require(!ds.train.empty() || !ds.test.empty(),
            "dataset manifest: no videos listed: " + manifest_path);
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic dataset
// ---------------------------------------------------------------------------
//
// Per video: one latent path per coordinate block, drifting from a
// class-independent start toward a class-dependent fixed point tau_c at a
// class-dependent rate a_c. Innovations and starts are spatially mixed
// across blocks (AR(1) in block index), so latent correlation between blocks
// m and m' is block_corr^|m-m'|. Coordinates are positive-affine copies of
// their block latent plus observation noise. The class signal therefore
// strengthens over time and lives in every block, while cross-block
// correlation decays with distance.

struct SynthSpec {
    std::string name = "synth";
    std::size_t classes = 4;
    std::size_t d = 64;
    std::size_t frames = 30;  // T
    std::size_t videos_per_class = 50;
    std::size_t block = 8;  // B
    double tau_scale = 1.0;
    std::vector<double> rates;  // per-class a_c; empty -> cycle over defaults
    double latent_noise = 0.15;
    double init_scale = 0.5;
    double block_corr = 0.6;
    double obs_noise = 0.1;
    double alpha_lo = 0.5;
    double alpha_hi = 1.5;
    double beta_range = 0.5;
    double test_fraction = 0.3;
    std::uint64_t seed = 1;
    // Bimodal payload for adversarial-training probes: 1-d videos with a
    // constant first frame and a second frame drawn from {v1, v2}.
    bool bimodal = false;
    double v1 = -1.0;
    double v2 = 1.0;
    std::size_t bimodal_videos = 256;
};

inline double synth_rate(const SynthSpec& spec, std::size_t c) {
    static const double kDefault[4] = {0.90, 0.84, 0.93, 0.87};
    if (!spec.rates.empty()) return spec.rates[c % spec.rates.size()];
    return kDefault[c % 4];
}

inline double synth_tau(const SynthSpec& spec, std::size_t c) {
    return spec.tau_scale * (static_cast<double>(c) - (static_cast<double>(spec.classes) - 1.0) / 2.0);
}

// Quantizes through f32 so saved files reload bit-identically.
inline double f32q(double v) { return static_cast<double>(static_cast<float>(v)); }

inline Dataset synth_generate(const SynthSpec& spec) {
    Dataset ds;
    ds.name = spec.name;

    if (spec.bimodal) {
        require(spec.v1 != spec.v2, "synth_generate: bimodal payload needs v1 != v2");
        ds.d = 1;
        ds.class_names = {"mode"};
        Rng root(spec.seed);
        for (std::size_t v = 0; v < spec.bimodal_videos; ++v) {
            Rng r = root.derive(v);
            FeatureSequence seq;
            seq.video_id = "bimodal_" + std::to_string(v);
            seq.label = 0;
            seq.frames = Matrix(2, 1);
            seq.frames.at(0, 0) = 0.0;
            seq.frames.at(1, 0) = f32q(r.uniform() < 0.5 ? spec.v1 : spec.v2);
            ds.train.push_back(std::move(seq));
        }
        return ds;
    }

    require(spec.classes >= 1, "synth_generate: need at least one class");
    require(spec.block >= 1 && spec.d % spec.block == 0,
            "synth_generate: block size must divide d");
    require(spec.frames >= 2, "synth_generate: need at least two frames");
    for (std::size_t c = 0; c < spec.classes; ++c)
        require(std::fabs(synth_rate(spec, c)) <= 1.0,
                "synth_generate: dynamics rate magnitude must be <= 1");
    require(spec.block_corr > -1.0 && spec.block_corr < 1.0,
            "synth_generate: block correlation must lie in (-1, 1)");

    ds.d = spec.d;
    for (std::size_t c = 0; c < spec.classes; ++c)
        ds.class_names.push_back("class_" + std::to_string(c));

    const std::size_t M = spec.d / spec.block;
    const double mix = std::sqrt(1.0 - spec.block_corr * spec.block_corr);

    Rng root(spec.seed);
    // Coordinate affine maps are dataset-level: shared by every video.
    Rng coord_rng = root.derive(0xC00DULL);
    Vec alpha(spec.d), beta(spec.d);
    for (std::size_t i = 0; i < spec.d; ++i) {
        alpha[i] = coord_rng.uniform(spec.alpha_lo, spec.alpha_hi);
        beta[i] = coord_rng.uniform(-spec.beta_range, spec.beta_range);
    }

    const std::size_t n_train =
        spec.videos_per_class -
        static_cast<std::size_t>(std::floor(spec.test_fraction * static_cast<double>(spec.videos_per_class)));

    std::size_t global = 0;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        const double tau = synth_tau(spec, c);
        const double rate = synth_rate(spec, c);
        for (std::size_t v = 0; v < spec.videos_per_class; ++v, ++global) {
            Rng r = root.derive(1 + global);
            FeatureSequence seq;
            seq.video_id = "c" + std::to_string(c) + "_v" + std::to_string(v);
            seq.label = c;
            seq.frames = Matrix(spec.frames, spec.d);

            // Spatially mixed class-independent starts.
            Vec z(M);
            double prev = 0.0;
            for (std::size_t m = 0; m < M; ++m) {
                const double raw = r.gaussian();
                const double mixed = m == 0 ? raw : spec.block_corr * prev + mix * raw;
                prev = mixed;
                z[m] = spec.init_scale * mixed;
            }

            for (std::size_t t = 0; t < spec.frames; ++t) {
                if (t > 0) {
                    double prev_eta = 0.0;
                    for (std::size_t m = 0; m < M; ++m) {
                        const double raw = r.gaussian();
                        const double eta =
                            m == 0 ? raw : spec.block_corr * prev_eta + mix * raw;
                        prev_eta = eta;
                        z[m] = tau + rate * (z[m] - tau) + spec.latent_noise * eta;
                    }
                }
                for (std::size_t i = 0; i < spec.d; ++i) {
                    const std::size_t m = i / spec.block;
                    const double x = alpha[i] * z[m] + beta[i] + spec.obs_noise * r.gaussian();
                    seq.frames.at(t, i) = f32q(x);
                }
            }
            (v < n_train ? ds.train : ds.test).push_back(std::move(seq));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Block-correlation analysis
// ---------------------------------------------------------------------------

// Pearson correlation between pooled scalar samples of contiguous D-blocks,
// pooled across every frame of every sequence and every within-block
// position. Diagonal entries are zeroed.
inline Matrix correlation_matrix(const Dataset& ds, std::size_t D) {
    require(D >= 1 && ds.d % D == 0, "correlation: D must divide d");
    const std::size_t M = ds.d / D;
    require(M >= 2, "correlation: D leaves a single block; choose a smaller D");
    const auto seqs = ds.all();
    std::size_t total_frames = 0;
    for (const auto* s : seqs) total_frames += s->frames.rows;
    require(total_frames >= 2, "correlation: need at least two frames in the dataset");

    const std::size_t n = total_frames * D;  // pooled samples per block
    Vec mean(M, 0.0);
    for (const auto* s : seqs)
        for (std::size_t r = 0; r < s->frames.rows; ++r)
            for (std::size_t m = 0; m < M; ++m)
                for (std::size_t j = 0; j < D; ++j) mean[m] += s->frames.at(r, m * D + j);
    for (auto& v : mean) v /= static_cast<double>(n);

    Matrix cov(M, M);
    for (const auto* s : seqs) {
        for (std::size_t r = 0; r < s->frames.rows; ++r) {
            for (std::size_t j = 0; j < D; ++j) {
                for (std::size_t a = 0; a < M; ++a) {
                    const double da = s->frames.at(r, a * D + j) - mean[a];
                    for (std::size_t b = a; b < M; ++b) {
                        const double db = s->frames.at(r, b * D + j) - mean[b];
                        cov.at(a, b) += da * db;
                    }
                }
            }
        }
    }
    for (std::size_t a = 0; a < M; ++a)
        require(cov.at(a, a) > 0.0,
                "correlation: zero-variance block " + std::to_string(a));

    Matrix corr(M, M);
    for (std::size_t a = 0; a < M; ++a) {
        for (std::size_t b = a + 1; b < M; ++b) {
            const double c = cov.at(a, b) / std::sqrt(cov.at(a, a) * cov.at(b, b));
            corr.at(a, b) = c;
            corr.at(b, a) = c;
        }
        corr.at(a, a) = 0.0;
    }
    return corr;
}

struct CorrelationPoint {
    std::size_t D = 0;
    double mean_abs_offdiag = 0.0;
};

inline std::vector<CorrelationPoint> avg_correlation_vs_stepsize(
    const Dataset& ds, const std::vector<std::size_t>& D_values) {
    std::vector<CorrelationPoint> out;
    for (std::size_t D : D_values) {
        const Matrix corr = correlation_matrix(ds, D);
        const std::size_t M = corr.rows;
        double sum = 0.0;
        for (std::size_t a = 0; a < M; ++a)
            for (std::size_t b = 0; b < M; ++b)
                if (a != b) sum += std::fabs(corr.at(a, b));
        out.push_back({D, sum / static_cast<double>(M * M - M)});
    }
    return out;
}

}  // namespace fmrnn
