#pragma once

// Self-verification suite: finite-difference gradient checks for every layer
// and composed model, parameter-count assertions, segmentation/merge and
// pooling oracles, the bimodal adversarial probe, and a harness self-test
// with a deliberately corrupted backward pass.

#include "fmrnn/engine.hpp"
#include "fmrnn/featmap.hpp"
#include "fmrnn/layers.hpp"
#include "fmrnn/models.hpp"
#include "fmrnn/numcore.hpp"
#include "fmrnn/pipeline.hpp"

#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace fmrnn {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

inline constexpr double kGradTol = 1e-4;
inline constexpr double kGradEps = 1e-5;
inline constexpr int kGradPoints = 5;
// Minimum |pre-activation| a ReLU unit must keep for a probe point to count
// as differentiable. Must stay well above kGradEps times the activation scale
// so no unit changes sign during the central-difference perturbations.
inline constexpr double kKinkMargin = 1e-3;

namespace verify_detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Minimum |pre-activation| over the hidden ReLU units of the MLP on input x.
inline double min_hidden_preact_gap(const ParamStore& store, const Mlp& m, const Vec& x) {
    double gap = std::numeric_limits<double>::infinity();
    Vec cur = x;
    for (std::size_t l = 0; l < m.w.size(); ++l) {
        const Tensor& W = store[m.w[l]];
        const Tensor& B = store[m.b[l]];
        const std::size_t out_w = m.widths[l + 1];
        const std::size_t in_w = m.widths[l];
        const bool last = (l + 1 == m.w.size());
        Vec next(out_w);
        for (std::size_t r = 0; r < out_w; ++r) {
            double z = B.value[r];
            const double* wr = W.value.data() + r * in_w;
            for (std::size_t c = 0; c < in_w; ++c) z += wr[c] * cur[c];
            if (!last) gap = std::min(gap, std::fabs(z));
            next[r] = last ? z : std::max(0.0, z);
        }
        cur = std::move(next);
    }
    return gap;
}

// Gaussian input that keeps every hidden unit of the MLP at least kKinkMargin
// away from its ReLU kink. Central differences are one-sided on the kink and
// no subgradient convention matches them, so gradient probes must stay clear.
// Biases start at zero, which makes exact kinks reachable with real
// probability: an input that silences a whole layer pins every preactivation
// downstream at exactly zero.
inline Vec draw_off_kink(Rng& rng, const ParamStore& store, const Mlp& m, std::size_t n) {
    for (int tries = 0; tries < 64; ++tries) {
        Vec x = rng.gaussian_vec(n);
        if (min_hidden_preact_gap(store, m, x) >= kKinkMargin) return x;
    }
    require(false, "verify: no input clear of every ReLU kink after 64 draws");
    return {};
}

// Runs the scalar/vector LSTM over a fixed input sequence and returns a
// random linear functional of the final hidden state.
inline double lstm_probe_loss(ParamStore& store, const LstmCell& cell,
                              const std::vector<Vec>& inputs, const Vec& weights,
                              bool backward) {
    std::vector<LstmStepCache> caches(inputs.size());
    LstmState state(cell.hidden);
    for (std::size_t i = 0; i < inputs.size(); ++i)
        state = lstm_step(store, cell, inputs[i], state, &caches[i]);
    double loss = 0.0;
    for (std::size_t r = 0; r < cell.hidden; ++r) loss += weights[r] * state.h[r];
    if (backward) {
        Vec d_h = weights, d_c(cell.hidden, 0.0), d_h_prev, d_c_prev;
        for (std::size_t i = inputs.size(); i-- > 0;) {
            lstm_step_backward(store, cell, caches[i], d_h, d_c, d_h_prev, d_c_prev);
            d_h = d_h_prev;
            d_c = d_c_prev;
        }
    }
    return loss;
}

inline CheckResult grad_point_suite(const std::string& name,
                                    const std::function<double(std::uint64_t)>& run_point) {
    CheckResult r;
    r.name = name;
    double worst = 0.0;
    for (int p = 0; p < kGradPoints; ++p) worst = std::max(worst, run_point(p));
    r.passed = worst < kGradTol;
    r.detail = "max relative error " + fmt(worst) + " (tolerance " + fmt(kGradTol) + ")";
    return r;
}

}  // namespace verify_detail

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

inline std::vector<CheckResult> check_gradients(std::uint64_t seed = 7) {
    using verify_detail::draw_off_kink;
    using verify_detail::grad_point_suite;
    using verify_detail::lstm_probe_loss;
    std::vector<CheckResult> out;
    Rng root(seed);

    out.push_back(grad_point_suite("grad/lstm_scalar", [&](std::uint64_t p) {
        Rng rng = root.derive(10 + p);
        ParamStore store;
        LstmCell cell = make_lstm_cell(store, "cell", 1, 3);
        init_lstm_cell(store, cell, rng);
        std::vector<Vec> inputs;
        for (int i = 0; i < 4; ++i) inputs.push_back(rng.gaussian_vec(1));
        const Vec w = rng.gaussian_vec(3);
        return grad_check(
            [&](ParamStore& s) { return lstm_probe_loss(s, cell, inputs, w, true); }, store,
            kGradEps);
    }));

    out.push_back(grad_point_suite("grad/lstm_vector", [&](std::uint64_t p) {
        Rng rng = root.derive(20 + p);
        ParamStore store;
        LstmCell cell = make_lstm_cell(store, "cell", 3, 4);
        init_lstm_cell(store, cell, rng);
        std::vector<Vec> inputs;
        for (int i = 0; i < 3; ++i) inputs.push_back(rng.gaussian_vec(3));
        const Vec w = rng.gaussian_vec(4);
        return grad_check(
            [&](ParamStore& s) { return lstm_probe_loss(s, cell, inputs, w, true); }, store,
            kGradEps);
    }));

    out.push_back(grad_point_suite("grad/rbf", [&](std::uint64_t p) {
        Rng rng = root.derive(30 + p);
        ParamStore store;
        RbfLayer rbf = make_rbf_layer(store, "rbf", 4, 3, 2);
        init_rbf_layer(store, rbf, rng);
        const Vec h = rng.gaussian_vec(3);
        const Vec w = rng.gaussian_vec(2);
        return grad_check(
            [&](ParamStore& s) {
                const Vec y = rbf_forward(s, rbf, h);
                double loss = w[0] * y[0] + w[1] * y[1];
                rbf_backward(s, rbf, h, w);
                return loss;
            },
            store, kGradEps);
    }));

    out.push_back(grad_point_suite("grad/mlp", [&](std::uint64_t p) {
        Rng rng = root.derive(40 + p);
        ParamStore store;
        Mlp mlp = make_mlp(store, "mlp", {4, 5, 3});
        init_mlp(store, mlp, rng);
        const Vec x = draw_off_kink(rng, store, mlp, 4);
        const Vec w = rng.gaussian_vec(3);
        return grad_check(
            [&](ParamStore& s) {
                MlpCache cache;
                const Vec y = mlp_forward(s, mlp, x, &cache);
                double loss = 0.0;
                for (std::size_t i = 0; i < 3; ++i) loss += w[i] * y[i];
                mlp_backward(s, mlp, cache, w);
                return loss;
            },
            store, kGradEps);
    }));

    out.push_back(grad_point_suite("grad/softmax_ce", [&](std::uint64_t p) {
        Rng rng = root.derive(50 + p);
        ParamStore store;
        Mlp mlp = make_mlp(store, "mlp", {4, 5, 3});
        init_mlp(store, mlp, rng);
        const Vec x = draw_off_kink(rng, store, mlp, 4);
        const std::size_t label = p % 3;
        return grad_check(
            [&](ParamStore& s) {
                MlpCache cache;
                const Vec logits = mlp_forward(s, mlp, x, &cache);
                const auto [loss, probs] = softmax_cross_entropy(logits, label);
                mlp_backward(s, mlp, cache, softmax_cross_entropy_grad(probs, label));
                return loss;
            },
            store, kGradEps);
    }));

    // Composed forecaster variants: loss = w_l2 * l2(target, prediction).
    struct Variant {
        const char* name;
        ForecastMode mode;
        ReadoutKind readout;
    };
    const Variant variants[] = {
        {"grad/forecaster_flattened_rbf", ForecastMode::flattened, ReadoutKind::rbf},
        {"grad/forecaster_flattened_linear", ForecastMode::flattened, ReadoutKind::linear},
        {"grad/forecaster_per_channel_rbf", ForecastMode::per_channel, ReadoutKind::rbf},
        {"grad/forecaster_per_channel_linear", ForecastMode::per_channel, ReadoutKind::linear},
        {"grad/forecaster_vanilla_linear", ForecastMode::vanilla, ReadoutKind::linear},
        {"grad/forecaster_vanilla_rbf", ForecastMode::vanilla, ReadoutKind::rbf},
        {"grad/forecaster_linear_mode", ForecastMode::linear, ReadoutKind::linear},
    };
    std::uint64_t tag = 100;
    for (const auto& v : variants) {
        const std::uint64_t base = tag;
        tag += 10;
        out.push_back(grad_point_suite(v.name, [&, v, base](std::uint64_t p) {
            Rng rng = root.derive(base + p);
            ForecasterConfig fc;
            fc.mode = v.mode;
            fc.readout = v.readout;
            fc.d = 6;
            fc.D = 4;
            fc.S = 2;
            fc.H = 3;
            fc.rbf_kernels = 3;
            ForecasterModel model = make_forecaster(fc);
            init_forecaster(model, rng);
            const std::size_t width = model.unit_width();
            Matrix history(3, width);
            for (auto& x : history.a) x = rng.gaussian();
            const Vec target = rng.gaussian_vec(width);
            const double w_l2 = 10.0;
            return grad_check(
                [&](ParamStore&) {
                    ForecastCache cache;
                    const Vec pred = forecast_unit(model, history, &cache);
                    const double loss = w_l2 * l2_loss(target, pred);
                    Vec d_pred = l2_loss_grad(target, pred);
                    for (auto& g : d_pred) g *= w_l2;
                    forecast_unit_backward(model, cache, d_pred);
                    return loss;
                },
                model.store, kGradEps);
        }));
    }

    out.push_back(grad_point_suite("grad/classifier", [&](std::uint64_t p) {
        Rng rng = root.derive(200 + p);
        ClassifierConfig cc;
        cc.d = 6;
        cc.classes = 3;
        cc.trunk = {5, 4};
        cc.rbf_kernels = 4;
        ClassifierModel model = make_classifier(cc);
        init_classifier(model, rng);
        const Vec frame = draw_off_kink(rng, model.store, model.trunk, 6);
        const std::size_t label = p % 3;
        return grad_check(
            [&](ParamStore&) {
                ClassifierCache cache;
                const Vec scores = classify_frame(model, frame, &cache);
                const auto [loss, probs] = softmax_cross_entropy(scores, label);
                classify_frame_backward(model, cache, softmax_cross_entropy_grad(probs, label));
                return loss;
            },
            model.store, kGradEps);
    }));

    out.push_back(grad_point_suite("grad/discriminator", [&](std::uint64_t p) {
        Rng rng = root.derive(300 + p);
        DiscriminatorConfig dc;
        dc.input = 4;
        dc.hidden = {5, 3};
        DiscriminatorModel model = make_discriminator(dc);
        init_discriminator(model, rng);
        const Vec real = draw_off_kink(rng, model.store, model.mlp, 4);
        const Vec fake = draw_off_kink(rng, model.store, model.mlp, 4);
        return grad_check(
            [&](ParamStore&) {
                DiscriminatorCache cr, cf;
                const double d_real = discriminate(model, real, &cr);
                const double d_fake = discriminate(model, fake, &cf);
                const double loss = disc_loss(d_real, d_fake);
                const auto [g_real, g_fake] = disc_loss_grad(d_real, d_fake);
                discriminate_backward(model, cr, g_real);
                discriminate_backward(model, cf, g_fake);
                return loss;
            },
            model.store, kGradEps);
    }));

    // Generator gradients through a frozen discriminator (the adversarial
    // training path).
    out.push_back(grad_point_suite("grad/adversarial_path", [&](std::uint64_t p) {
        Rng rng = root.derive(400 + p);
        ForecasterConfig fc;
        fc.mode = ForecastMode::flattened;
        fc.readout = ReadoutKind::rbf;
        fc.d = 4;
        fc.D = 4;
        fc.S = 4;
        fc.H = 3;
        fc.rbf_kernels = 3;
        ForecasterModel gen = make_forecaster(fc);
        init_forecaster(gen, rng);
        DiscriminatorConfig dc;
        dc.input = 4;
        dc.hidden = {5, 3};
        DiscriminatorModel disc = make_discriminator(dc);
        init_discriminator(disc, rng);
        Matrix history(2, 4);
        for (auto& x : history.a) x = rng.gaussian();
        const Vec target = rng.gaussian_vec(4);
        const double w_l2 = 10.0, w_adv = 1.0;
        return grad_check(
            [&](ParamStore&) {
                ForecastCache cache;
                const Vec pred = forecast_unit(gen, history, &cache);
                DiscriminatorCache cf;
                const double d_fake = discriminate(disc, pred, &cf);
                const double loss = w_l2 * l2_loss(target, pred) + w_adv * gen_adv_loss(d_fake);
                Vec d_pred = l2_loss_grad(target, pred);
                for (auto& g : d_pred) g *= w_l2;
                const Vec d_in =
                    discriminate_backward(disc, cf, w_adv * gen_adv_loss_grad(d_fake));
                for (std::size_t i = 0; i < d_pred.size(); ++i) d_pred[i] += d_in[i];
                forecast_unit_backward(gen, cache, d_pred);
                disc.store.zero_grad();
                return loss;
            },
            gen.store, kGradEps);
    }));

    return out;
}

// ---------------------------------------------------------------------------
// Parameter-count assertions
// ---------------------------------------------------------------------------

inline std::vector<CheckResult> check_param_counts() {
    using verify_detail::fmt;
    std::vector<CheckResult> out;

    auto scalar_cfg = [](std::size_t d) {
        ForecasterConfig fc;
        fc.mode = ForecastMode::flattened;
        fc.readout = ReadoutKind::linear;
        fc.d = d;
        fc.D = 32;
        fc.S = 16;
        fc.H = 4;
        return fc;
    };
    const auto r128 = param_count(make_forecaster(scalar_cfg(128)));
    const auto r2048 = param_count(make_forecaster(scalar_cfg(2048)));
    {
        CheckResult c;
        c.name = "param/scalar_cell_independent_of_d";
        c.passed = r128.cell == 96 && r2048.cell == 96 && r128.formula_echo == 20;
        c.detail = "exact cell count " + std::to_string(r128.cell) + " (d=128) / " +
                   std::to_string(r2048.cell) + " (d=2048), approximate formula 4(H+1) = " +
                   std::to_string(r128.formula_echo);
        out.push_back(c);
    }
    {
        CheckResult c;
        c.name = "param/flattened_total_101";
        c.passed = r128.readout == 5 && r128.total == 101;
        c.detail = "cell " + std::to_string(r128.cell) + " + readout " +
                   std::to_string(r128.readout) + " = total " + std::to_string(r128.total);
        out.push_back(c);
    }

    ForecasterConfig vc;
    vc.mode = ForecastMode::vanilla;
    vc.readout = ReadoutKind::linear;
    vc.d = 2048;
    vc.D = 2048;
    vc.S = 2048;
    vc.H = 512;
    const auto rv = param_count(make_forecaster(vc));
    {
        CheckResult c;
        c.name = "param/vanilla_cell_exact";
        c.passed = rv.cell == 5244928 && rv.formula_echo == 20971520;
        c.detail = "exact cell count " + std::to_string(rv.cell) +
                   ", approximate formula 4(dH+d^2) = " + std::to_string(rv.formula_echo);
        out.push_back(c);
    }
    {
        CheckResult c;
        c.name = "param/sharing_ratio";
        const double ratio = static_cast<double>(rv.cell) / static_cast<double>(r2048.cell);
        c.passed = ratio > 5e4;
        c.detail = "vanilla/scalar cell ratio " + fmt(ratio) + " (require > 5e4)";
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Segmentation / merge oracle
// ---------------------------------------------------------------------------

// Independent per-coordinate gather: scan segments in ascending order,
// collect covering predictions, average in deviation form.
inline Vec merge_oracle(std::size_t d, std::size_t D, std::size_t S,
                        const std::vector<Vec>& preds) {
    Vec out(d, 0.0);
    for (std::size_t coord = 0; coord < d; ++coord) {
        bool seen = false;
        double first = 0.0, dev_sum = 0.0;
        std::size_t count = 0;
        std::size_t idx = 0;
        for (std::size_t off = 0; off + D <= d; off += S, ++idx) {
            if (coord >= off && coord < off + D) {
                const double v = preds[idx][coord - off];
                if (!seen) {
                    seen = true;
                    first = v;
                } else {
                    dev_sum += v - first;
                }
                ++count;
            }
        }
        out[coord] = count == 1 ? first : first + dev_sum / static_cast<double>(count);
    }
    return out;
}

inline CheckResult check_segmentation_oracle(std::uint64_t seed = 11) {
    CheckResult r;
    r.name = "oracle/segmentation_merge";
    Rng rng(seed);
    std::size_t trials = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 2 + rng.index(95);
        std::size_t D = 1 + rng.index(d);
        std::size_t S = 1 + rng.index(D);
        while ((d - D) % S != 0) S = 1 + rng.index(D);
        const SegmentationPlan plan = plan_segments(d, D, S);

        if (plan.segments() != (d - D) / S + 1) {
            r.detail = "segment-count formula failed at d=" + std::to_string(d);
            return r;
        }
        if (plan.offsets.back() + D != d) {
            r.detail = "last offset mismatch at d=" + std::to_string(d);
            return r;
        }

        std::vector<Vec> preds;
        for (std::size_t s = 0; s < plan.segments(); ++s) preds.push_back(rng.gaussian_vec(D));
        const Vec merged = merge_segment_predictions(plan, preds);
        const Vec oracle = merge_oracle(d, D, S, preds);
        if (merged != oracle) {
            r.detail = "merge differs from brute-force oracle at d=" + std::to_string(d) +
                       " D=" + std::to_string(D) + " S=" + std::to_string(S);
            return r;
        }

        // Reassembly identity: merging the true sub-vectors returns the input
        // bit-for-bit.
        const Vec x = rng.gaussian_vec(d);
        std::vector<Vec> subs;
        for (std::size_t off : plan.offsets)
            subs.emplace_back(x.begin() + off, x.begin() + off + D);
        if (merge_segment_predictions(plan, subs) != x) {
            r.detail = "reassembly identity failed at d=" + std::to_string(d) +
                       " D=" + std::to_string(D) + " S=" + std::to_string(S);
            return r;
        }
        ++trials;
    }
    r.passed = true;
    r.detail = std::to_string(trials) + " random plans matched bit-for-bit";
    return r;
}

// ---------------------------------------------------------------------------
// Pooling oracle
// ---------------------------------------------------------------------------

inline CheckResult check_pooling_oracle(std::uint64_t seed = 13) {
    CheckResult r;
    r.name = "oracle/pooling";
    Rng rng(seed);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.index(8);
        const std::size_t C = 2 + rng.index(5);
        std::vector<Vec> rows;
        for (std::size_t i = 0; i < n; ++i) {
            Vec row(C);
            double sum = 0.0;
            for (auto& v : row) {
                v = rng.uniform() + 1e-3;
                sum += v;
            }
            for (auto& v : row) v /= sum;
            rows.push_back(std::move(row));
        }

        Vec avg(C, 0.0), mx(C, 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0, m = rows[0][c];
            for (const auto& row : rows) {
                s += row[c];
                m = std::max(m, row[c]);
            }
            avg[c] = s / static_cast<double>(n);
            mx[c] = m;
        }
        auto argmax = [](const Vec& v) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < v.size(); ++i)
                if (v[i] > v[best]) best = i;
            return best;
        };

        const auto [pa, la] = pool_predictions(rows, Pooling::average);
        const auto [pm, lm] = pool_predictions(rows, Pooling::max);
        const auto [pn, ln] = pool_predictions(rows, Pooling::none);
        if (pa != avg || la != argmax(avg)) {
            r.detail = "average pooling mismatch at trial " + std::to_string(trial);
            return r;
        }
        if (pm != mx || lm != argmax(mx)) {
            r.detail = "max pooling mismatch at trial " + std::to_string(trial);
            return r;
        }
        if (pn != rows.back() || ln != argmax(rows.back())) {
            r.detail = "no-pooling mismatch at trial " + std::to_string(trial);
            return r;
        }
    }

    // Constructed disagreement: average and max pooling choose different
    // labels on the same stack.
    const std::vector<Vec> stack = {
        {0.95, 0.05}, {0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}};
    const auto [pa, la] = pool_predictions(stack, Pooling::average);
    const auto [pm, lm] = pool_predictions(stack, Pooling::max);
    if (la != 1 || lm != 0) {
        r.detail = "disagreement case produced labels avg=" + std::to_string(la) +
                   " max=" + std::to_string(lm) + " (want 1 and 0)";
        return r;
    }
    r.passed = true;
    r.detail = "1000 random stacks exact; disagreement case: average->1, max->0";
    return r;
}

// ---------------------------------------------------------------------------
// Bimodal probe and harness self-test
// ---------------------------------------------------------------------------

inline CheckResult check_bimodal_probe(std::uint64_t seed = 17) {
    using verify_detail::fmt;
    CheckResult r;
    r.name = "probe/bimodal_adversarial";
    const double v1 = -1.0, v2 = 1.0;
    const auto res = bimodal_gan_probe(v1, v2, bimodal_probe_defaults(seed));
    const double half_gap = std::fabs(v1 - v2) / 2.0;
    const bool l2_ok = std::fabs(res.l2_distance - half_gap) <= 0.2 * half_gap;
    const bool gan_ok = res.gan_distance < res.l2_distance;
    r.passed = l2_ok && gan_ok;
    r.detail = "L2-only output " + fmt(res.l2_output) + " (distance " + fmt(res.l2_distance) +
               ", expect ~" + fmt(half_gap) + "); adversarial output " + fmt(res.gan_output) +
               " (distance " + fmt(res.gan_distance) + ", must be strictly smaller)";
    return r;
}

// A 5% error injected into one gradient must trip the checker; guards
// against a harness that silently passes everything.
inline CheckResult check_corrupted_backward(std::uint64_t seed = 19) {
    using verify_detail::fmt;
    CheckResult r;
    r.name = "self/corrupted_backward";
    Rng rng(seed);
    ParamStore store;
    Mlp mlp = make_mlp(store, "mlp", {3, 4, 2});
    init_mlp(store, mlp, rng);
    const Vec x = rng.gaussian_vec(3);
    const Vec w = rng.gaussian_vec(2);
    const double err = grad_check(
        [&](ParamStore& s) {
            MlpCache cache;
            const Vec y = mlp_forward(s, mlp, x, &cache);
            double loss = w[0] * y[0] + w[1] * y[1];
            mlp_backward(s, mlp, cache, w);
            Tensor& t = s[mlp.w[0]];
            for (auto& g : t.grad) g *= 1.05;  // the deliberate corruption
            return loss;
        },
        store, kGradEps);
    r.passed = err > kGradTol;
    r.detail = "corrupted pass reports error " + fmt(err) + " (must exceed " + fmt(kGradTol) + ")";
    return r;
}

inline std::vector<CheckResult> run_verification(std::uint64_t seed = 7,
                                                 bool include_probe = true) {
    std::vector<CheckResult> out = check_gradients(seed);
    for (auto& c : check_param_counts()) out.push_back(std::move(c));
    out.push_back(check_segmentation_oracle(seed + 1));
    out.push_back(check_pooling_oracle(seed + 2));
    if (include_probe) out.push_back(check_bimodal_probe(seed + 3));
    out.push_back(check_corrupted_backward(seed + 4));
    return out;
}

}  // namespace fmrnn
