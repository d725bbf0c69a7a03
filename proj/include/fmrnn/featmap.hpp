#pragma once

// Feature-mapping forecaster: segmentation of a d-dimensional frame feature
// into D-sized sub-vectors with stride S, flattening to scalar sequences, a
// scalar-input LSTM shared across all feature coordinates, overlap-averaged
// reassembly, and recursive multi-step rollout. Baseline modes (per-segment
// linear map, vector-input LSTM) share the same interface.

#include "fmrnn/layers.hpp"
#include "fmrnn/numcore.hpp"

#include <string>
#include <vector>

namespace fmrnn {

enum class ForecastMode { flattened, per_channel, linear, vanilla };

enum class ReadoutKind { linear, rbf };

inline const char* to_string(ForecastMode m) {
    switch (m) {
        case ForecastMode::flattened: return "flattened";
        case ForecastMode::per_channel: return "per_channel";
        case ForecastMode::linear: return "linear";
        case ForecastMode::vanilla: return "vanilla";
    }
    return "?";
}

inline const char* to_string(ReadoutKind k) {
    return k == ReadoutKind::linear ? "linear" : "rbf";
}

inline ForecastMode forecast_mode_from_string(const std::string& s) {
    if (s == "flattened") return ForecastMode::flattened;
    if (s == "per_channel") return ForecastMode::per_channel;
    if (s == "linear") return ForecastMode::linear;
    if (s == "vanilla") return ForecastMode::vanilla;
    throw std::runtime_error("unknown forecast mode: " + s);
}

inline ReadoutKind readout_kind_from_string(const std::string& s) {
    if (s == "linear") return ReadoutKind::linear;
    if (s == "rbf") return ReadoutKind::rbf;
    throw std::runtime_error("unknown readout kind: " + s);
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

struct SegmentationPlan {
    std::size_t dim = 0;     // d
    std::size_t step = 0;    // D, sub-vector length
    std::size_t stride = 0;  // S, offset between consecutive sub-vectors
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> overlap;  // per-coordinate covering-segment count

    std::size_t segments() const { return offsets.size(); }
};

inline SegmentationPlan plan_segments(std::size_t d, std::size_t D, std::size_t S) {
    require(D >= 1 && D <= d, "plan_segments: need 1 <= D <= d");
    require(S >= 1 && S <= D, "plan_segments: need 1 <= S <= D");
    require((d - D) % S == 0,
            "plan_segments: (d - D) must be divisible by S; change the feature step or stride "
            "(d=" + std::to_string(d) + ", D=" + std::to_string(D) + ", S=" + std::to_string(S) +
            ")");
    SegmentationPlan plan;
    plan.dim = d;
    plan.step = D;
    plan.stride = S;
    for (std::size_t off = 0; off + D <= d; off += S) plan.offsets.push_back(off);
    plan.overlap.assign(d, 0);
    for (std::size_t off : plan.offsets)
        for (std::size_t j = 0; j < D; ++j) plan.overlap[off + j] += 1;
    return plan;
}

// Time-major, coordinate-minor serialization of a t x D segment history.
inline Vec flatten_scalars(const Matrix& segment_history) {
    return segment_history.a;
}

inline Matrix unflatten_scalars(const Vec& scalars, std::size_t t, std::size_t D) {
    require(scalars.size() == t * D, "unflatten_scalars: size does not match t*D");
    Matrix m(t, D);
    m.a = scalars;
    return m;
}

// Mean of the covering predictions per coordinate, accumulated in segment
// order as first-value-plus-mean-of-deviations. Averaging identical copies is
// then exact for every overlap count, which plain sum-then-divide does not
// guarantee for odd counts.
inline Vec merge_segment_predictions(const SegmentationPlan& plan,
                                     const std::vector<Vec>& predictions) {
    require(predictions.size() == plan.segments(),
            "merge_segment_predictions: prediction count does not match plan");
    Vec first(plan.dim, 0.0);
    Vec dev_sum(plan.dim, 0.0);
    std::vector<std::size_t> seen(plan.dim, 0);
    for (std::size_t s = 0; s < plan.segments(); ++s) {
        require(predictions[s].size() == plan.step,
                "merge_segment_predictions: prediction width does not match step");
        const std::size_t off = plan.offsets[s];
        for (std::size_t j = 0; j < plan.step; ++j) {
            const std::size_t coord = off + j;
            if (seen[coord] == 0) {
                first[coord] = predictions[s][j];
            } else {
                dev_sum[coord] += predictions[s][j] - first[coord];
            }
            seen[coord] += 1;
        }
    }
    Vec out(plan.dim);
    for (std::size_t coord = 0; coord < plan.dim; ++coord) {
        out[coord] = seen[coord] == 1
                         ? first[coord]
                         : first[coord] + dev_sum[coord] / static_cast<double>(seen[coord]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Forecaster model
// ---------------------------------------------------------------------------

struct ForecasterConfig {
    ForecastMode mode = ForecastMode::flattened;
    ReadoutKind readout = ReadoutKind::rbf;
    std::size_t d = 2048;
    std::size_t D = 128;
    std::size_t S = 64;
    std::size_t H = 4;
    std::size_t rbf_kernels = 6;
    std::size_t k = 1;  // prediction horizon in frames
};

struct ForecasterModel {
    ForecasterConfig cfg;
    SegmentationPlan plan;
    ParamStore store;
    LstmCell cell;        // LSTM modes only
    ParamId readout_w;    // scalar-linear: H vector; vanilla linear: H x d; linear mode: D x D
    ParamId readout_b;    // scalar-linear bias only
    RbfLayer rbf;         // ReadoutKind::rbf only

    bool has_cell() const {
        return cfg.mode != ForecastMode::linear;
    }
    // Width of the unit the model maps: a segment for segment-level modes,
    // the whole frame for the vector-input LSTM.
    std::size_t unit_width() const {
        return cfg.mode == ForecastMode::vanilla ? cfg.d : cfg.D;
    }
};

inline ForecasterModel make_forecaster(const ForecasterConfig& cfg) {
    require(cfg.k >= 1, "make_forecaster: horizon k must be >= 1");
    ForecasterModel m;
    m.cfg = cfg;
    m.plan = plan_segments(cfg.d, cfg.D, cfg.S);
    switch (cfg.mode) {
        case ForecastMode::flattened:
        case ForecastMode::per_channel:
            m.cell = make_lstm_cell(m.store, "cell", 1, cfg.H);
            if (cfg.readout == ReadoutKind::linear) {
                m.readout_w = m.store.add("readout.w", {cfg.H});
                m.readout_b = m.store.add("readout.b", {1});
            } else {
                m.rbf = make_rbf_layer(m.store, "readout", cfg.rbf_kernels, cfg.H, 1);
            }
            break;
        case ForecastMode::vanilla:
            m.cell = make_lstm_cell(m.store, "cell", cfg.d, cfg.H);
            if (cfg.readout == ReadoutKind::linear) {
                m.readout_w = m.store.add("readout.w", {cfg.H, cfg.d});
            } else {
                m.rbf = make_rbf_layer(m.store, "readout", cfg.rbf_kernels, cfg.H, cfg.d);
            }
            break;
        case ForecastMode::linear:
            m.readout_w = m.store.add("readout.matrix", {cfg.D, cfg.D});
            break;
    }
    return m;
}

inline void init_forecaster(ForecasterModel& m, Rng& rng) {
    switch (m.cfg.mode) {
        case ForecastMode::flattened:
        case ForecastMode::per_channel:
            init_lstm_cell(m.store, m.cell, rng);
            if (m.cfg.readout == ReadoutKind::linear) {
                init_glorot(m.store[m.readout_w], m.cfg.H, 1, rng);
            } else {
                init_rbf_layer(m.store, m.rbf, rng);
            }
            break;
        case ForecastMode::vanilla:
            init_lstm_cell(m.store, m.cell, rng);
            if (m.cfg.readout == ReadoutKind::linear) {
                init_glorot(m.store[m.readout_w], m.cfg.H, m.cfg.d, rng);
            } else {
                init_rbf_layer(m.store, m.rbf, rng);
            }
            break;
        case ForecastMode::linear:
            init_glorot(m.store[m.readout_w], m.cfg.D, m.cfg.D, rng);
            break;
    }
}

// ---------------------------------------------------------------------------
// Forward / backward over one unit (segment history or full-frame history)
// ---------------------------------------------------------------------------

struct ForecastCache {
    std::size_t t = 0;
    std::vector<LstmStepCache> steps;
    std::vector<Vec> readout_h;  // hidden states fed to the readout
    Vec last_input;              // linear mode only
};

namespace detail {

inline double scalar_readout(const ForecasterModel& m, const Vec& h) {
    if (m.cfg.readout == ReadoutKind::linear) {
        const Tensor& w = m.store[m.readout_w];
        double y = m.store[m.readout_b].value[0];
        for (std::size_t r = 0; r < m.cfg.H; ++r) y += w.value[r] * h[r];
        return y;
    }
    return rbf_forward(m.store, m.rbf, h)[0];
}

// Returns d loss / d h for one scalar readout position.
inline Vec scalar_readout_backward(ForecasterModel& m, const Vec& h, double d_pred) {
    if (m.cfg.readout == ReadoutKind::linear) {
        Tensor& w = m.store[m.readout_w];
        Tensor& b = m.store[m.readout_b];
        Vec d_h(m.cfg.H);
        for (std::size_t r = 0; r < m.cfg.H; ++r) {
            d_h[r] = d_pred * w.value[r];
            w.grad[r] += d_pred * h[r];
        }
        b.grad[0] += d_pred;
        return d_h;
    }
    return rbf_backward(m.store, m.rbf, h, Vec{d_pred});
}

}  // namespace detail

// Forward pass over one unit history (t x unit_width). For the scalar modes
// the unit is a segment; for the vector-input LSTM it is the whole frame.
inline Vec forecast_unit(const ForecasterModel& m, const Matrix& history,
                         ForecastCache* cache = nullptr) {
    require(history.rows >= 1, "forecast_unit: history must have at least one frame");
    require(history.cols == m.unit_width(), "forecast_unit: history width does not match model");
    const std::size_t t = history.rows;
    if (cache) {
        cache->t = t;
        cache->steps.clear();
        cache->readout_h.clear();
    }

    switch (m.cfg.mode) {
        case ForecastMode::flattened: {
            // One scalar stream; state carried across all t*D scalars. The D
            // hidden states reached inside the final frame feed the readout.
            const std::size_t D = m.cfg.D;
            const Vec seq = flatten_scalars(history);
            if (cache) cache->steps.resize(seq.size());
            LstmState state(m.cfg.H);
            Vec pred(D, 0.0);
            for (std::size_t p = 0; p < seq.size(); ++p) {
                state = lstm_step(m.store, m.cell, Vec{seq[p]}, state,
                                  cache ? &cache->steps[p] : nullptr);
                if (p >= (t - 1) * D) {
                    const std::size_t l = p - (t - 1) * D;
                    pred[l] = detail::scalar_readout(m, state.h);
                    if (cache) cache->readout_h.push_back(state.h);
                }
            }
            return pred;
        }
        case ForecastMode::per_channel: {
            // Independent scalar stream per coordinate, shared parameters.
            const std::size_t D = m.cfg.D;
            if (cache) cache->steps.resize(D * t);
            Vec pred(D, 0.0);
            for (std::size_t l = 0; l < D; ++l) {
                LstmState state(m.cfg.H);
                for (std::size_t f = 0; f < t; ++f) {
                    state = lstm_step(m.store, m.cell, Vec{history.at(f, l)}, state,
                                      cache ? &cache->steps[l * t + f] : nullptr);
                }
                pred[l] = detail::scalar_readout(m, state.h);
                if (cache) cache->readout_h.push_back(state.h);
            }
            return pred;
        }
        case ForecastMode::vanilla: {
            LstmState state(m.cfg.H);
            if (cache) cache->steps.resize(t);
            for (std::size_t f = 0; f < t; ++f) {
                state = lstm_step(m.store, m.cell, history.row_vec(f), state,
                                  cache ? &cache->steps[f] : nullptr);
            }
            if (cache) cache->readout_h.push_back(state.h);
            if (m.cfg.readout == ReadoutKind::linear) {
                const Tensor& W = m.store[m.readout_w];  // H x d
                Vec pred(m.cfg.d, 0.0);
                for (std::size_t r = 0; r < m.cfg.H; ++r) {
                    const double hr = state.h[r];
                    const double* wr = W.value.data() + r * m.cfg.d;
                    for (std::size_t j = 0; j < m.cfg.d; ++j) pred[j] += hr * wr[j];
                }
                return pred;
            }
            return rbf_forward(m.store, m.rbf, state.h);
        }
        case ForecastMode::linear: {
            const Vec x = history.row_vec(t - 1);
            if (cache) cache->last_input = x;
            const Tensor& M = m.store[m.readout_w];  // D x D
            Vec pred(m.cfg.D, 0.0);
            for (std::size_t j = 0; j < m.cfg.D; ++j) {
                const double* mj = M.value.data() + j * m.cfg.D;
                double y = 0.0;
                for (std::size_t i = 0; i < m.cfg.D; ++i) y += mj[i] * x[i];
                pred[j] = y;
            }
            return pred;
        }
    }
    throw std::logic_error("forecast_unit: unreachable");
}

// Backpropagates d loss / d prediction through the unit forward pass,
// accumulating parameter gradients.
inline void forecast_unit_backward(ForecasterModel& m, const ForecastCache& cache,
                                   const Vec& d_pred) {
    const std::size_t H = m.cfg.H;
    switch (m.cfg.mode) {
        case ForecastMode::flattened: {
            const std::size_t D = m.cfg.D;
            require(d_pred.size() == D, "forecast_unit_backward: gradient width mismatch");
            const std::size_t total = cache.steps.size();
            Vec d_h(H, 0.0), d_c(H, 0.0), d_h_prev, d_c_prev;
            for (std::size_t p = total; p-- > 0;) {
                if (p >= (cache.t - 1) * D) {
                    const std::size_t l = p - (cache.t - 1) * D;
                    const Vec extra =
                        detail::scalar_readout_backward(m, cache.readout_h[l], d_pred[l]);
                    for (std::size_t r = 0; r < H; ++r) d_h[r] += extra[r];
                }
                lstm_step_backward(m.store, m.cell, cache.steps[p], d_h, d_c, d_h_prev, d_c_prev);
                d_h = d_h_prev;
                d_c = d_c_prev;
            }
            return;
        }
        case ForecastMode::per_channel: {
            const std::size_t D = m.cfg.D;
            require(d_pred.size() == D, "forecast_unit_backward: gradient width mismatch");
            const std::size_t t = cache.t;
            Vec d_h_prev, d_c_prev;
            for (std::size_t l = 0; l < D; ++l) {
                Vec d_h = detail::scalar_readout_backward(m, cache.readout_h[l], d_pred[l]);
                Vec d_c(H, 0.0);
                for (std::size_t f = t; f-- > 0;) {
                    lstm_step_backward(m.store, m.cell, cache.steps[l * t + f], d_h, d_c, d_h_prev,
                                       d_c_prev);
                    d_h = d_h_prev;
                    d_c = d_c_prev;
                }
            }
            return;
        }
        case ForecastMode::vanilla: {
            require(d_pred.size() == m.cfg.d, "forecast_unit_backward: gradient width mismatch");
            const Vec& h_final = cache.readout_h[0];
            Vec d_h(H, 0.0);
            if (m.cfg.readout == ReadoutKind::linear) {
                Tensor& W = m.store[m.readout_w];
                for (std::size_t r = 0; r < H; ++r) {
                    const double* wr = W.value.data() + r * m.cfg.d;
                    double* gr = W.grad.data() + r * m.cfg.d;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < m.cfg.d; ++j) {
                        acc += d_pred[j] * wr[j];
                        gr[j] += h_final[r] * d_pred[j];
                    }
                    d_h[r] = acc;
                }
            } else {
                d_h = rbf_backward(m.store, m.rbf, h_final, d_pred);
            }
            Vec d_c(H, 0.0), d_h_prev, d_c_prev;
            for (std::size_t f = cache.steps.size(); f-- > 0;) {
                lstm_step_backward(m.store, m.cell, cache.steps[f], d_h, d_c, d_h_prev, d_c_prev);
                d_h = d_h_prev;
                d_c = d_c_prev;
            }
            return;
        }
        case ForecastMode::linear: {
            require(d_pred.size() == m.cfg.D, "forecast_unit_backward: gradient width mismatch");
            Tensor& M = m.store[m.readout_w];
            for (std::size_t j = 0; j < m.cfg.D; ++j) {
                double* gj = M.grad.data() + j * m.cfg.D;
                for (std::size_t i = 0; i < m.cfg.D; ++i) gj[i] += d_pred[j] * cache.last_input[i];
            }
            return;
        }
    }
}

// Segment-level forecast, scalar LSTM modes only.
inline Vec forecast_subvector(const Matrix& segment_history, const ForecasterModel& m,
                              ForecastCache* cache = nullptr) {
    require(m.cfg.mode == ForecastMode::flattened || m.cfg.mode == ForecastMode::per_channel,
            "forecast_subvector: model must be a scalar-LSTM mode");
    return forecast_unit(m, segment_history, cache);
}

inline Matrix slice_segment(const Matrix& history, std::size_t offset, std::size_t width) {
    Matrix out(history.rows, width);
    for (std::size_t r = 0; r < history.rows; ++r)
        for (std::size_t j = 0; j < width; ++j) out.at(r, j) = history.at(r, offset + j);
    return out;
}

// Full-frame forecast: per-segment predictions merged by overlap averaging
// (the vector-input LSTM maps the whole frame in one unit).
inline Vec forecast_frame(const Matrix& history, const ForecasterModel& m) {
    require(history.rows >= 1, "forecast_frame: history must have at least one frame");
    require(history.cols == m.cfg.d, "forecast_frame: history width does not match model d");
    if (m.cfg.mode == ForecastMode::vanilla) return forecast_unit(m, history);
    std::vector<Vec> preds;
    preds.reserve(m.plan.segments());
    for (std::size_t off : m.plan.offsets)
        preds.push_back(forecast_unit(m, slice_segment(history, off, m.cfg.D)));
    return merge_segment_predictions(m.plan, preds);
}

// Recursive rollout: appends forecast_frame over the growing history.
// Contiguous rollout is defined only for horizon k = 1.
inline Matrix generate_future(const Matrix& observed, const ForecasterModel& m,
                              std::size_t steps) {
    require(observed.rows >= 1, "generate_future: need at least one observed frame");
    require(observed.cols == m.cfg.d, "generate_future: width does not match model d");
    if (steps == 0) return observed;
    require(m.cfg.k == 1,
            "generate_future: contiguous rollout requires horizon k=1; call forecast_frame "
            "directly for multi-horizon prediction");
    Matrix out(observed.rows + steps, observed.cols);
    std::copy(observed.a.begin(), observed.a.end(), out.a.begin());
    for (std::size_t s = 0; s < steps; ++s) {
        Matrix grown(observed.rows + s, observed.cols);
        std::copy(out.a.begin(), out.a.begin() + grown.a.size(), grown.a.begin());
        const Vec next = forecast_frame(grown, m);
        std::copy(next.begin(), next.end(), out.row(observed.rows + s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parameter counting
// ---------------------------------------------------------------------------

struct ParamCountReport {
    std::size_t cell = 0;
    std::size_t readout = 0;
    std::size_t total = 0;
    // The approximate closed form quoted for this architecture family:
    // 4(H+1) for the scalar-shared LSTM, 4(dH+d^2) for the vector-input LSTM,
    // D^2 for the per-segment linear map.
    std::size_t formula_echo = 0;
};

inline ParamCountReport param_count(const ForecasterModel& m) {
    ParamCountReport r;
    if (m.has_cell()) {
        r.cell = lstm_param_count(m.cell);
        if (m.cfg.readout == ReadoutKind::linear) {
            r.readout = m.store[m.readout_w].size() +
                        (m.cfg.mode == ForecastMode::vanilla ? 0 : m.store[m.readout_b].size());
        } else {
            r.readout = m.store[m.rbf.centers].size() + m.store[m.rbf.log_widths].size() +
                        m.store[m.rbf.coeffs].size();
        }
    } else {
        r.readout = m.store[m.readout_w].size();
    }
    r.total = m.store.total_size();
    switch (m.cfg.mode) {
        case ForecastMode::flattened:
        case ForecastMode::per_channel:
            r.formula_echo = 4 * (m.cfg.H + 1);
            break;
        case ForecastMode::vanilla:
            r.formula_echo = 4 * (m.cfg.d * m.cfg.H + m.cfg.d * m.cfg.d);
            break;
        case ForecastMode::linear:
            r.formula_echo = m.cfg.D * m.cfg.D;
            break;
    }
    return r;
}

}  // namespace fmrnn
