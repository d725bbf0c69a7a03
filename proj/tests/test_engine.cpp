#include "fmrnn/engine.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace fmrnn;

namespace {

// Noiseless decaying dynamics: x_{t+1} is an exact affine function of x_t.
Dataset noiseless_linear_set() {
    SynthSpec spec;
    spec.classes = 1;
    spec.d = 8;
    spec.block = 4;
    spec.frames = 10;
    spec.videos_per_class = 20;
    spec.rates = {0.9};
    spec.latent_noise = 0.0;
    spec.obs_noise = 0.0;
    spec.init_scale = 1.0;
    spec.test_fraction = 0.0;
    return synth_generate(spec);
}

ForecasterConfig small_fc(ReadoutKind ro = ReadoutKind::rbf) {
    ForecasterConfig fc;
    fc.mode = ForecastMode::flattened;
    fc.readout = ro;
    fc.d = 8;
    fc.D = 4;
    fc.S = 2;
    fc.H = 4;
    fc.rbf_kernels = 4;
    return fc;
}

// Two tight clouds at +/-1: linearly separable by construction.
Dataset separable_clouds() {
    Rng rng(31);
    Dataset ds;
    ds.d = 8;
    ds.class_names = {"neg", "pos"};
    for (std::size_t c = 0; c < 2; ++c) {
        const double mu = c == 0 ? -1.0 : 1.0;
        for (std::size_t v = 0; v < 20; ++v) {
            FeatureSequence s;
            s.video_id = "c" + std::to_string(c) + "_" + std::to_string(v);
            s.label = c;
            s.frames = Matrix(5, 8);
            for (auto& x : s.frames.a) x = mu + 0.2 * rng.gaussian();
            ds.train.push_back(std::move(s));
        }
    }
    return ds;
}

double frame_accuracy(const ClassifierModel& m, const std::vector<FeatureSequence>& seqs) {
    std::size_t hit = 0, n = 0;
    for (const auto& s : seqs)
        for (std::size_t t = 0; t < s.frames.rows; ++t, ++n) {
            const Vec sc = classify_frame(m, s.frames.row_vec(t));
            std::size_t best = 0;
            for (std::size_t c = 1; c < sc.size(); ++c)
                if (sc[c] > sc[best]) best = c;
            if (best == s.label) ++hit;
        }
    return static_cast<double>(hit) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("TrainConfig: defaults, json round trip, validation") {
    TrainConfig tc;
    CHECK(tc.w_l2 == 10.0);
    CHECK(tc.w_adv == 1.0);
    CHECK(tc.base_lr == 0.001);
    CHECK(tc.decay_rate == 0.9);
    CHECK(tc.batch_forecaster == 128);
    CHECK(tc.batch_classifier == 256);

    tc.w_adv = 0.25;
    tc.epochs = 7;
    tc.seed = 99;
    TrainConfig back = train_config_from_json(to_json(tc));
    CHECK(back.w_adv == 0.25);
    CHECK(back.epochs == 7);
    CHECK(back.seed == 99);

    TrainConfig bad;
    bad.w_l2 = -1.0;
    CHECK_THROWS(validate(bad));
    TrainConfig bad2;
    bad2.epochs = 0;
    CHECK_THROWS(validate(bad2));
    TrainConfig bad3;
    bad3.batch_forecaster = 0;
    CHECK_THROWS(validate(bad3));
}

TEST_CASE("train_forecaster: noiseless linear dynamics regression baseline") {
    // Frozen at first implementation: 200 steps must cut epoch-mean L2 to
    // under 0.2x the first epoch (measured 0.089 with this exact config).
    Dataset ds = noiseless_linear_set();
    TrainConfig tc;
    tc.w_l2 = 1.0;
    tc.w_adv = 0.0;
    tc.base_lr = 0.1;
    tc.decay_rate = 0.98;
    tc.epochs = 50;
    tc.batch_forecaster = 128;
    tc.seed = 5;

    auto r = train_forecaster(ds.train, small_fc(ReadoutKind::linear), tc);
    REQUIRE(r.history.steps.size() == 200);
    CHECK_FALSE(r.discriminator.has_value());
    CHECK_FALSE(r.history.has_adv);
    CHECK(r.warnings.empty());

    const double first = r.history.epoch_mean_l2.front();
    const double last = r.history.epoch_mean_l2.back();
    CHECK(last < 0.2 * first);
    CHECK(last < first);  // strictly lower, the weaker invariant

    // Monotone step indices, adv/disc columns zeroed, all values finite.
    for (std::size_t i = 0; i < r.history.steps.size(); ++i) {
        const LossStep& s = r.history.steps[i];
        CHECK(s.step == i);
        CHECK(s.adv == 0.0);
        CHECK(s.disc == 0.0);
        CHECK(std::isfinite(s.l2));
        CHECK(std::isfinite(s.total));
        CHECK(s.total == Catch::Approx(tc.w_l2 * s.l2).margin(1e-12));
    }
}

TEST_CASE("train_forecaster: bit-identical across runs with one seed") {
    Dataset ds = noiseless_linear_set();
    TrainConfig tc;
    tc.w_adv = 1.0;  // exercise the adversarial path too
    tc.base_lr = 0.01;
    tc.epochs = 3;
    tc.batch_forecaster = 32;
    tc.steps_per_epoch = 4;
    tc.seed = 11;

    auto a = train_forecaster(ds.train, small_fc(), tc);
    auto b = train_forecaster(ds.train, small_fc(), tc);
    CHECK(a.history == b.history);
    REQUIRE(a.model.store.count() == b.model.store.count());
    for (std::size_t i = 0; i < a.model.store.count(); ++i)
        CHECK(a.model.store[ParamId{i}].value == b.model.store[ParamId{i}].value);  // bitwise
    REQUIRE(a.discriminator.has_value());
    REQUIRE(b.discriminator.has_value());
    for (std::size_t i = 0; i < a.discriminator->store.count(); ++i)
        CHECK(a.discriminator->store[ParamId{i}].value ==
              b.discriminator->store[ParamId{i}].value);

    TrainConfig other = tc;
    other.seed = 12;
    auto c = train_forecaster(ds.train, small_fc(), other);
    CHECK(a.model.store[ParamId{0}].value != c.model.store[ParamId{0}].value);
}

TEST_CASE("train_forecaster: adversarial schedule populates the GAN columns") {
    Dataset ds = noiseless_linear_set();
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_forecaster = 16;
    tc.steps_per_epoch = 3;
    tc.seed = 2;
    auto r = train_forecaster(ds.train, small_fc(), tc);
    REQUIRE(r.discriminator.has_value());
    CHECK(r.history.has_adv);
    REQUIRE(r.history.steps.size() == 6);
    // An untrained discriminator sits near 1/2 on both inputs.
    CHECK(r.history.steps[0].disc == Catch::Approx(2.0 * std::log(2.0)).margin(0.2));
    CHECK(r.history.steps[0].adv == Catch::Approx(std::log(2.0)).margin(0.15));
    for (const LossStep& s : r.history.steps) {
        CHECK(std::isfinite(s.disc));
        CHECK(std::isfinite(s.adv));
        CHECK(std::isfinite(s.total));
        CHECK(s.total == Catch::Approx(tc.w_l2 * s.l2 + tc.w_adv * s.adv).margin(1e-12));
    }
}

TEST_CASE("train_forecaster: vanilla LSTM with RBF readout warns under GAN") {
    Dataset ds = noiseless_linear_set();
    ForecasterConfig fc;
    fc.mode = ForecastMode::vanilla;
    fc.readout = ReadoutKind::rbf;
    fc.d = 8;
    fc.D = 8;
    fc.S = 8;
    fc.H = 4;
    fc.rbf_kernels = 4;
    TrainConfig tc;
    tc.epochs = 1;
    tc.steps_per_epoch = 1;
    tc.batch_forecaster = 8;
    auto r = train_forecaster(ds.train, fc, tc);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("unstable") != std::string::npos);

    // No warning without the adversarial objective.
    TrainConfig quiet = tc;
    quiet.w_adv = 0.0;
    CHECK(train_forecaster(ds.train, fc, quiet).warnings.empty());
}

TEST_CASE("train_forecaster: input validation") {
    TrainConfig tc;
    CHECK_THROWS_WITH(train_forecaster({}, small_fc(), tc),
                      Catch::Matchers::ContainsSubstring("empty dataset"));

    // Too short for the horizon: k=1 needs at least 2 frames.
    FeatureSequence stub;
    stub.video_id = "stub";
    stub.frames = Matrix(1, 8, 0.5);
    CHECK_THROWS_WITH(train_forecaster({stub}, small_fc(), tc),
                      Catch::Matchers::ContainsSubstring("stub") &&
                          Catch::Matchers::ContainsSubstring("too short for horizon"));

    FeatureSequence wrong;
    wrong.video_id = "wrong_width";
    wrong.frames = Matrix(4, 5, 0.5);
    CHECK_THROWS_WITH(train_forecaster({wrong}, small_fc(), tc),
                      Catch::Matchers::ContainsSubstring("wrong_width"));
}

TEST_CASE("train_classifier: separable clouds reach 0.99 training accuracy") {
    Dataset ds = separable_clouds();

    // Separability oracle: plain logistic regression on the frames converges
    // to >= 0.99 before the model under test is trained.
    {
        Vec w(8, 0.0);
        double b = 0.0;
        std::vector<std::pair<Vec, double>> frames;
        for (const auto& s : ds.train)
            for (std::size_t t = 0; t < s.frames.rows; ++t)
                frames.push_back({s.frames.row_vec(t), s.label == 1 ? 1.0 : 0.0});
        for (int it = 0; it < 300; ++it) {
            Vec gw(8, 0.0);
            double gb = 0.0;
            for (const auto& [x, y] : frames) {
                double z = b;
                for (std::size_t i = 0; i < 8; ++i) z += w[i] * x[i];
                const double e = logistic(z) - y;
                for (std::size_t i = 0; i < 8; ++i) gw[i] += e * x[i];
                gb += e;
            }
            for (std::size_t i = 0; i < 8; ++i) w[i] -= 0.05 * gw[i] / frames.size();
            b -= 0.05 * gb / frames.size();
        }
        std::size_t hit = 0;
        for (const auto& [x, y] : frames) {
            double z = b;
            for (std::size_t i = 0; i < 8; ++i) z += w[i] * x[i];
            if ((z > 0.0 ? 1.0 : 0.0) == y) ++hit;
        }
        REQUIRE(static_cast<double>(hit) / frames.size() >= 0.99);
    }

    ClassifierConfig cc;
    cc.d = 8;
    cc.classes = 2;
    cc.trunk = {8, 6};
    cc.rbf_kernels = 8;
    TrainConfig tc;
    tc.base_lr = 0.05;
    tc.decay_rate = 0.98;
    tc.epochs = 50;
    tc.batch_classifier = 64;
    tc.seed = 5;
    auto r = train_classifier(ds.train, cc, tc);

    CHECK(frame_accuracy(r.model, ds.train) >= 0.99);
    // Balanced classes, near-zero initial scores: first step sits at ln C.
    CHECK(r.history.steps.front().total == Catch::Approx(std::log(2.0)).margin(0.05));
    CHECK(r.history.epoch_mean_total.back() < r.history.epoch_mean_total.front());
    for (const LossStep& s : r.history.steps) {
        CHECK(s.l2 == 0.0);
        CHECK(std::isfinite(s.total));
    }

    auto again = train_classifier(ds.train, cc, tc);
    for (std::size_t i = 0; i < r.model.store.count(); ++i)
        CHECK(again.model.store[ParamId{i}].value == r.model.store[ParamId{i}].value);
}

TEST_CASE("train_classifier: input validation") {
    TrainConfig tc;
    ClassifierConfig cc;
    cc.d = 8;
    cc.classes = 2;
    cc.trunk = {4};
    cc.rbf_kernels = 2;
    CHECK_THROWS_WITH(train_classifier({}, cc, tc),
                      Catch::Matchers::ContainsSubstring("empty dataset"));

    FeatureSequence only;
    only.video_id = "solo";
    only.label = 0;
    only.frames = Matrix(3, 8, 0.1);
    CHECK_THROWS_WITH(train_classifier({only}, cc, tc),
                      Catch::Matchers::ContainsSubstring("two classes"));

    FeatureSequence bad_label = only;
    bad_label.video_id = "over";
    bad_label.label = 5;
    CHECK_THROWS_WITH(train_classifier({only, bad_label}, cc, tc),
                      Catch::Matchers::ContainsSubstring("label out of range"));
}

TEST_CASE("train: steps_per_epoch override is honored") {
    Dataset ds = noiseless_linear_set();
    TrainConfig tc;
    tc.w_adv = 0.0;
    tc.epochs = 4;
    tc.steps_per_epoch = 7;
    tc.batch_forecaster = 8;
    auto r = train_forecaster(ds.train, small_fc(), tc);
    CHECK(r.history.steps.size() == 28);
    CHECK(r.history.epoch_mean_l2.size() == 4);
}

TEST_CASE("bimodal_gan_probe: L2 finds the mean, the GAN finds a mode") {
    TrainConfig tc = bimodal_probe_defaults(7);
    CHECK(tc.w_l2 == 0.05);
    CHECK(tc.w_adv == 1.0);
    BimodalProbeResult r = bimodal_gan_probe(-1.0, 1.0, tc);
    // Half-gap is 1.0; the L2 solution is the mean, one half-gap from both
    // modes. 20% tolerance per the probe contract.
    CHECK(r.l2_distance == Catch::Approx(1.0).margin(0.2));
    CHECK(r.gan_distance < r.l2_distance);
    CHECK(r.gan_distance < 0.5);  // measured 0.022; generous headroom
    CHECK_THROWS(bimodal_gan_probe(0.5, 0.5, tc));
}
