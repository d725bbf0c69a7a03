#pragma once

// Anticipation inference: observe a prefix of a video's frames, recursively
// generate a further fraction, classify every available frame, pool the
// per-frame probabilities into one decision, and score accuracy over a split.

#include "fmrnn/data.hpp"
#include "fmrnn/featmap.hpp"
#include "fmrnn/models.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace fmrnn {

enum class Pooling { average, max, none };

inline const char* to_string(Pooling p) {
    switch (p) {
        case Pooling::average: return "average";
        case Pooling::max: return "max";
        case Pooling::none: return "none";
    }
    return "?";
}

inline Pooling pooling_from_string(const std::string& s) {
    if (s == "average") return Pooling::average;
    if (s == "max") return Pooling::max;
    if (s == "none") return Pooling::none;
    throw std::runtime_error("unknown pooling mode: " + s);
}

struct AnticipationConfig {
    double observe_frac = 0.5;  // r in (0, 1]
    double predict_frac = 0.0;  // p in [0, 1)
    Pooling pooling = Pooling::max;
};

inline void validate(const AnticipationConfig& c) {
    require(c.observe_frac > 0.0 && c.observe_frac <= 1.0,
            "AnticipationConfig: observe fraction must lie in (0, 1]");
    require(c.predict_frac >= 0.0 && c.predict_frac < 1.0,
            "AnticipationConfig: predict fraction must lie in [0, 1)");
}

struct PredictionTrace {
    std::string video_id;
    std::size_t true_label = 0;
    Matrix prob_rows;             // (T_obs + T_gen) x C, each row sums to 1
    std::vector<bool> generated;  // origin flag per row
    Vec pooled;
    std::size_t label = 0;
    std::size_t T = 0;
    std::size_t T_obs = 0;
    std::size_t T_gen = 0;
};

// Average: elementwise mean then argmax. Max: elementwise max then argmax
// (the pooled vector need not sum to 1). None: argmax of the last row.
inline std::pair<Vec, std::size_t> pool_predictions(const std::vector<Vec>& rows,
                                                    Pooling method) {
    require(!rows.empty(), "pool_predictions: no probability rows");
    const std::size_t C = rows.front().size();
    for (const auto& r : rows)
        require(r.size() == C, "pool_predictions: rows have mismatched widths");

    Vec pooled(C, 0.0);
    switch (method) {
        case Pooling::average:
            for (const auto& r : rows)
                for (std::size_t c = 0; c < C; ++c) pooled[c] += r[c];
            for (auto& v : pooled) v /= static_cast<double>(rows.size());
            break;
        case Pooling::max:
            pooled = rows.front();
            for (const auto& r : rows)
                for (std::size_t c = 0; c < C; ++c) pooled[c] = std::max(pooled[c], r[c]);
            break;
        case Pooling::none:
            pooled = rows.back();
            break;
    }
    std::size_t label = 0;
    for (std::size_t c = 1; c < C; ++c)
        if (pooled[c] > pooled[label]) label = c;
    return {pooled, label};
}

inline PredictionTrace anticipate(const FeatureSequence& video, const ForecasterModel& forecaster,
                                  const ClassifierModel& classifier,
                                  const AnticipationConfig& cfg) {
    validate(cfg);
    require(video.frames.rows >= 1, "anticipate: video has no frames");
    require(video.frames.cols == classifier.cfg.d,
            "anticipate: feature width mismatch between video and classifier");
    if (cfg.predict_frac > 0.0) {
        require(video.frames.cols == forecaster.cfg.d,
                "anticipate: feature width mismatch between video and forecaster");
        require(forecaster.cfg.k == 1,
                "anticipate: recursive generation requires a forecaster with horizon k=1");
    }

    const std::size_t T = video.frames.rows;
    const std::size_t T_obs = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(cfg.observe_frac * static_cast<double>(T))));
    const std::size_t T_gen =
        static_cast<std::size_t>(std::floor(cfg.predict_frac * static_cast<double>(T)));

    Matrix observed(T_obs, video.frames.cols);
    std::copy(video.frames.a.begin(), video.frames.a.begin() + T_obs * video.frames.cols,
              observed.a.begin());
    const Matrix features = T_gen > 0 ? generate_future(observed, forecaster, T_gen) : observed;

    PredictionTrace trace;
    trace.video_id = video.video_id;
    trace.true_label = video.label;
    trace.T = T;
    trace.T_obs = T_obs;
    trace.T_gen = T_gen;
    trace.prob_rows = Matrix(features.rows, classifier.cfg.classes);
    trace.generated.assign(features.rows, false);
    std::vector<Vec> rows;
    rows.reserve(features.rows);
    for (std::size_t r = 0; r < features.rows; ++r) {
        const Vec probs = softmax(classify_frame(classifier, features.row_vec(r)));
        std::copy(probs.begin(), probs.end(), trace.prob_rows.row(r));
        trace.generated[r] = r >= T_obs;
        rows.push_back(probs);
    }
    auto [pooled, label] = pool_predictions(rows, cfg.pooling);
    trace.pooled = std::move(pooled);
    trace.label = label;
    return trace;
}

struct EvalResult {
    double accuracy = 0.0;
    std::vector<PredictionTrace> traces;
};

inline EvalResult evaluate(const std::vector<FeatureSequence>& split,
                           const ForecasterModel& forecaster, const ClassifierModel& classifier,
                           const AnticipationConfig& cfg) {
    require(!split.empty(), "evaluate: empty split");
    EvalResult out;
    std::size_t correct = 0;
    for (const auto& video : split) {
        PredictionTrace t = anticipate(video, forecaster, classifier, cfg);
        if (t.label == video.label) ++correct;
        out.traces.push_back(std::move(t));
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(split.size());
    return out;
}

}  // namespace fmrnn
