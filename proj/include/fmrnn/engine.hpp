#pragma once

// Training loops: forecaster with L2-only or L2+adversarial objectives
// (alternating discriminator/generator updates), classifier training on real
// frames, and the bimodal probe that demonstrates mode-seeking versus
// mean-seeking behaviour of the two objectives.

#include "fmrnn/data.hpp"
#include "fmrnn/featmap.hpp"
#include "fmrnn/models.hpp"
#include "fmrnn/numcore.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fmrnn {

struct TrainConfig {
    double w_l2 = 10.0;
    double w_adv = 1.0;  // 0 disables adversarial training entirely
    double base_lr = 0.001;
    double decay_rate = 0.9;
    std::size_t epochs = 5;
    std::size_t batch_forecaster = 128;
    std::size_t batch_classifier = 256;
    std::size_t steps_per_epoch = 0;  // 0: one dataset pass worth of batches
    std::uint64_t seed = 1;
};

inline json to_json(const TrainConfig& c) {
    return {{"w_l2", c.w_l2},
            {"w_adv", c.w_adv},
            {"base_lr", c.base_lr},
            {"decay_rate", c.decay_rate},
            {"epochs", c.epochs},
            {"batch_forecaster", c.batch_forecaster},
            {"batch_classifier", c.batch_classifier},
            {"steps_per_epoch", c.steps_per_epoch},
            {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.w_l2 = j.value("w_l2", c.w_l2);
    c.w_adv = j.value("w_adv", c.w_adv);
    c.base_lr = j.value("base_lr", c.base_lr);
    c.decay_rate = j.value("decay_rate", c.decay_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_forecaster = j.value("batch_forecaster", c.batch_forecaster);
    c.batch_classifier = j.value("batch_classifier", c.batch_classifier);
    c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
    c.seed = j.value("seed", c.seed);
    return c;
}

inline void validate(const TrainConfig& c) {
    require(c.w_l2 >= 0.0 && c.w_adv >= 0.0, "TrainConfig: loss weights must be non-negative");
    require(c.base_lr >= 0.0 && c.decay_rate >= 0.0,
            "TrainConfig: rates must be non-negative");
    require(c.epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(c.batch_forecaster >= 1 && c.batch_classifier >= 1,
            "TrainConfig: batch sizes must be >= 1");
}

struct LossStep {
    std::size_t epoch = 0;
    std::size_t step = 0;  // global step index, monotone
    double l2 = 0.0;
    double adv = 0.0;
    double disc = 0.0;
    double total = 0.0;

    bool operator==(const LossStep&) const = default;
};

struct LossHistory {
    bool has_adv = false;  // adv/disc columns present only when w_adv > 0
    std::vector<LossStep> steps;
    std::vector<double> epoch_mean_l2;
    std::vector<double> epoch_mean_total;

    bool operator==(const LossHistory&) const = default;
};

// ---------------------------------------------------------------------------
// Forecaster training
// ---------------------------------------------------------------------------

struct ForecastTrainResult {
    ForecasterModel model;
    std::optional<DiscriminatorModel> discriminator;
    LossHistory history;
    std::vector<std::string> warnings;
};

namespace detail {

// Uniform sampling space over (video, history length, segment).
struct PairSpace {
    const std::vector<FeatureSequence>* seqs = nullptr;
    std::size_t horizon = 1;
    std::size_t segments = 1;  // 1 for whole-frame units
    std::vector<std::size_t> cum;  // cumulative pair counts per video
    std::size_t total = 0;

    struct Pair {
        std::size_t video = 0;
        std::size_t history = 0;  // frames observed before the target
        std::size_t segment = 0;
    };

    Pair decode(std::size_t idx) const {
        std::size_t v = 0;
        while (idx >= cum[v + 1]) ++v;
        const std::size_t local = idx - cum[v];
        Pair p;
        p.video = v;
        p.history = 1 + local / segments;
        p.segment = local % segments;
        return p;
    }
};

inline PairSpace make_pair_space(const std::vector<FeatureSequence>& seqs, std::size_t k,
                                 std::size_t segments) {
    PairSpace ps;
    ps.seqs = &seqs;
    ps.horizon = k;
    ps.segments = segments;
    ps.cum.push_back(0);
    for (const auto& s : seqs) {
        require(s.frames.rows >= k + 1,
                "train_forecaster: sequence " + s.video_id + " too short for horizon k=" +
                    std::to_string(k));
        ps.cum.push_back(ps.cum.back() + (s.frames.rows - k) * segments);
    }
    ps.total = ps.cum.back();
    return ps;
}

// History rows [0, h) and the target row h-1+k of one unit (segment slice or
// whole frame).
inline void extract_pair(const PairSpace& ps, const SegmentationPlan& plan, bool whole_frame,
                         const PairSpace::Pair& p, Matrix& history, Vec& target) {
    const FeatureSequence& s = (*ps.seqs)[p.video];
    const std::size_t target_row = p.history - 1 + ps.horizon;
    if (whole_frame) {
        history = Matrix(p.history, s.frames.cols);
        std::copy(s.frames.a.begin(), s.frames.a.begin() + p.history * s.frames.cols,
                  history.a.begin());
        target = s.frames.row_vec(target_row);
        return;
    }
    const std::size_t off = plan.offsets[p.segment];
    history = Matrix(p.history, plan.step);
    for (std::size_t r = 0; r < p.history; ++r)
        for (std::size_t j = 0; j < plan.step; ++j)
            history.at(r, j) = s.frames.at(r, off + j);
    target.resize(plan.step);
    for (std::size_t j = 0; j < plan.step; ++j) target[j] = s.frames.at(target_row, off + j);
}

}  // namespace detail

inline ForecastTrainResult train_forecaster(const std::vector<FeatureSequence>& train,
                                            const ForecasterConfig& fc, const TrainConfig& tc) {
    validate(tc);
    require(!train.empty(), "train_forecaster: empty dataset");
    for (const auto& s : train)
        require(s.frames.cols == fc.d,
                "train_forecaster: video " + s.video_id + " width does not match model d");

    ForecastTrainResult out;
    out.model = make_forecaster(fc);
    Rng root(tc.seed);
    Rng init_rng = root.derive(1);
    init_forecaster(out.model, init_rng);

    const bool gan = tc.w_adv > 0.0;
    if (gan) {
        DiscriminatorConfig dc;
        dc.input = out.model.unit_width();
        out.discriminator = make_discriminator(dc);
        Rng disc_rng = root.derive(2);
        init_discriminator(*out.discriminator, disc_rng);
        if (fc.mode == ForecastMode::vanilla && fc.readout == ReadoutKind::rbf)
            out.warnings.push_back(
                "vanilla LSTM with RBF readout under adversarial training is typically "
                "unstable; expect divergence");
    }

    const bool whole_frame = fc.mode == ForecastMode::vanilla;
    const std::size_t segments = whole_frame ? 1 : out.model.plan.segments();
    const auto space = detail::make_pair_space(train, fc.k, segments);
    const std::size_t steps_per_epoch =
        tc.steps_per_epoch > 0
            ? tc.steps_per_epoch
            : std::max<std::size_t>(1, space.total / tc.batch_forecaster);

    out.history.has_adv = gan;
    OptimState opt{tc.base_lr, tc.decay_rate, 0};

    Matrix history;
    Vec target;
    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        opt.epoch = epoch;
        Rng erng = root.derive(1000 + epoch);
        double el2 = 0.0, etotal = 0.0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            std::vector<std::size_t> batch(tc.batch_forecaster);
            for (auto& b : batch) b = erng.index(space.total);

            double mean_disc = 0.0;
            if (gan) {
                // Discriminator step on this batch: real targets vs the
                // current generator's predictions.
                DiscriminatorModel& disc = *out.discriminator;
                for (std::size_t b : batch) {
                    const auto p = space.decode(b);
                    detail::extract_pair(space, out.model.plan, whole_frame, p, history, target);
                    const Vec pred = forecast_unit(out.model, history);
                    DiscriminatorCache cr, cf;
                    const double d_real = discriminate(disc, target, &cr);
                    const double d_fake = discriminate(disc, pred, &cf);
                    mean_disc += disc_loss(d_real, d_fake);
                    const auto [g_real, g_fake] = disc_loss_grad(d_real, d_fake);
                    const double scale = 1.0 / static_cast<double>(batch.size());
                    discriminate_backward(disc, cr, g_real * scale);
                    discriminate_backward(disc, cf, g_fake * scale);
                }
                mean_disc /= static_cast<double>(batch.size());
                sgd_step(disc.store, opt);
            }

            // Generator step (the only step when w_adv = 0).
            double mean_l2 = 0.0, mean_adv = 0.0;
            const double scale = 1.0 / static_cast<double>(batch.size());
            for (std::size_t b : batch) {
                const auto p = space.decode(b);
                detail::extract_pair(space, out.model.plan, whole_frame, p, history, target);
                ForecastCache cache;
                const Vec pred = forecast_unit(out.model, history, &cache);
                mean_l2 += l2_loss(target, pred);
                Vec d_pred = l2_loss_grad(target, pred);
                for (auto& g : d_pred) g *= tc.w_l2 * scale;
                if (gan) {
                    DiscriminatorCache cf;
                    const double d_fake = discriminate(*out.discriminator, pred, &cf);
                    mean_adv += gen_adv_loss(d_fake);
                    const double g_prob = gen_adv_loss_grad(d_fake) * tc.w_adv * scale;
                    const Vec d_input = discriminate_backward(*out.discriminator, cf, g_prob);
                    for (std::size_t i = 0; i < d_pred.size(); ++i) d_pred[i] += d_input[i];
                }
                forecast_unit_backward(out.model, cache, d_pred);
            }
            mean_l2 *= scale;
            mean_adv *= scale;
            sgd_step(out.model.store, opt);
            if (gan) out.discriminator->store.zero_grad();  // stray grads from the adv path

            LossStep ls;
            ls.epoch = epoch;
            ls.step = global_step++;
            ls.l2 = mean_l2;
            ls.adv = gan ? mean_adv : 0.0;
            ls.disc = gan ? mean_disc : 0.0;
            ls.total = tc.w_l2 * mean_l2 + tc.w_adv * ls.adv;
            out.history.steps.push_back(ls);
            el2 += mean_l2;
            etotal += ls.total;
        }
        out.history.epoch_mean_l2.push_back(el2 / static_cast<double>(steps_per_epoch));
        out.history.epoch_mean_total.push_back(etotal / static_cast<double>(steps_per_epoch));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classifier training
// ---------------------------------------------------------------------------

struct ClassifierTrainResult {
    ClassifierModel model;
    LossHistory history;  // cross-entropy recorded in the total column
};

inline ClassifierTrainResult train_classifier(const std::vector<FeatureSequence>& train,
                                              const ClassifierConfig& cc, const TrainConfig& tc) {
    validate(tc);
    require(!train.empty(), "train_classifier: empty dataset");
    std::vector<bool> present(cc.classes, false);
    for (const auto& s : train) {
        require(s.frames.cols == cc.d,
                "train_classifier: video " + s.video_id + " width does not match model d");
        require(s.label < cc.classes, "train_classifier: label out of range for " + s.video_id);
        present[s.label] = true;
    }
    std::size_t distinct = 0;
    for (bool p : present) distinct += p ? 1 : 0;
    require(distinct >= 2, "train_classifier: need at least two classes present");

    ClassifierTrainResult out;
    out.model = make_classifier(cc);
    Rng root(tc.seed);
    Rng init_rng = root.derive(1);
    init_classifier(out.model, init_rng);

    // Uniform sampling over individual real frames (video, t).
    std::vector<std::size_t> cum{0};
    for (const auto& s : train) cum.push_back(cum.back() + s.frames.rows);
    const std::size_t total = cum.back();
    const std::size_t steps_per_epoch =
        tc.steps_per_epoch > 0 ? tc.steps_per_epoch
                               : std::max<std::size_t>(1, total / tc.batch_classifier);

    OptimState opt{tc.base_lr, tc.decay_rate, 0};
    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        opt.epoch = epoch;
        Rng erng = root.derive(1000 + epoch);
        double etotal = 0.0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            double mean_ce = 0.0;
            const double scale = 1.0 / static_cast<double>(tc.batch_classifier);
            for (std::size_t b = 0; b < tc.batch_classifier; ++b) {
                const std::size_t idx = erng.index(total);
                std::size_t v = 0;
                while (idx >= cum[v + 1]) ++v;
                const std::size_t t = idx - cum[v];
                const FeatureSequence& s = train[v];
                ClassifierCache cache;
                const Vec scores = classify_frame(out.model, s.frames.row_vec(t), &cache);
                const auto [ce, probs] = softmax_cross_entropy(scores, s.label);
                mean_ce += ce;
                Vec d_scores = softmax_cross_entropy_grad(probs, s.label);
                for (auto& g : d_scores) g *= scale;
                classify_frame_backward(out.model, cache, d_scores);
            }
            mean_ce *= scale;
            sgd_step(out.model.store, opt);
            LossStep ls;
            ls.epoch = epoch;
            ls.step = global_step++;
            ls.total = mean_ce;
            out.history.steps.push_back(ls);
            etotal += mean_ce;
        }
        out.history.epoch_mean_l2.push_back(0.0);
        out.history.epoch_mean_total.push_back(etotal / static_cast<double>(steps_per_epoch));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bimodal probe
// ---------------------------------------------------------------------------
//
// Trains a minimal generator on 1-d two-frame videos whose second frame is
// drawn uniformly from {v1, v2} while the conditioning first frame is held
// constant. The L2-only run converges to the sample mean (maximally far from
// both modes); the adversarial run moves toward one mode.

struct BimodalProbeResult {
    double l2_distance = 0.0;   // mean distance to the nearest mode, L2-only run
    double gan_distance = 0.0;  // same, adversarial run
    double l2_output = 0.0;
    double gan_output = 0.0;
};

inline BimodalProbeResult bimodal_gan_probe(double v1, double v2, const TrainConfig& cfg) {
    require(v1 != v2, "bimodal_gan_probe: v1 and v2 must differ");

    SynthSpec spec;
    spec.bimodal = true;
    spec.v1 = v1;
    spec.v2 = v2;
    spec.seed = cfg.seed;
    const Dataset ds = synth_generate(spec);

    ForecasterConfig fc;
    fc.mode = ForecastMode::flattened;
    fc.readout = ReadoutKind::rbf;
    fc.d = 1;
    fc.D = 1;
    fc.S = 1;
    fc.H = 4;
    fc.rbf_kernels = 4;
    fc.k = 1;

    auto generated = [&](const ForecasterModel& m) {
        Matrix obs(1, 1);
        obs.at(0, 0) = 0.0;
        return forecast_frame(obs, m)[0];
    };
    auto nearest = [&](double g) { return std::min(std::fabs(g - v1), std::fabs(g - v2)); };

    TrainConfig l2_cfg = cfg;
    l2_cfg.w_l2 = 1.0;
    l2_cfg.w_adv = 0.0;
    const auto l2_run = train_forecaster(ds.train, fc, l2_cfg);

    const auto gan_run = train_forecaster(ds.train, fc, cfg);

    BimodalProbeResult r;
    r.l2_output = generated(l2_run.model);
    r.gan_output = generated(gan_run.model);
    r.l2_distance = nearest(r.l2_output);
    r.gan_distance = nearest(r.gan_output);
    return r;
}

// Probe defaults tuned for the 2-minute budget: an adversarial weight that
// dominates the reconstruction pull, and a learning rate scaled for the
// 1-d toy problem.
inline TrainConfig bimodal_probe_defaults(std::uint64_t seed) {
    TrainConfig tc;
    tc.w_l2 = 0.05;
    tc.w_adv = 1.0;
    tc.base_lr = 0.03;
    tc.decay_rate = 0.99;
    tc.epochs = 200;
    tc.batch_forecaster = 64;
    tc.seed = seed;
    return tc;
}

}  // namespace fmrnn
