#include "fmrnn/featmap.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace fmrnn;

namespace {

// Shared regression fixture: 3 frames of d=6 with a fixed deterministic fill.
Matrix fixture_history() {
    Matrix hist(3, 6);
    double v = -0.9;
    for (auto& x : hist.a) {
        x = v;
        v += 0.31;
        if (v > 1.0) v -= 2.0;
    }
    return hist;
}

ForecasterModel seeded_model(ForecastMode mode, ReadoutKind readout = ReadoutKind::rbf) {
    ForecasterConfig cfg;
    cfg.mode = mode;
    cfg.readout = readout;
    cfg.d = 6;
    cfg.D = 4;
    cfg.S = 2;
    cfg.H = 3;
    cfg.rbf_kernels = 3;
    ForecasterModel m = make_forecaster(cfg);
    Rng rng(2024);
    init_forecaster(m, rng);
    return m;
}

}  // namespace

TEST_CASE("plan_segments: reference geometry d=2048 D=128 S=64") {
    SegmentationPlan plan = plan_segments(2048, 128, 64);
    REQUIRE(plan.segments() == 31);
    for (std::size_t s = 0; s < 31; ++s) CHECK(plan.offsets[s] == s * 64);
    CHECK(plan.offsets.back() + plan.step == 2048);
    // Interior coordinates are covered by exactly D/S = 2 segments.
    CHECK(plan.overlap[0] == 1);
    CHECK(plan.overlap[64] == 2);
    CHECK(plan.overlap[1024] == 2);
    CHECK(plan.overlap[2047] == 1);
}

TEST_CASE("plan_segments: disjoint tiling when S equals D") {
    SegmentationPlan plan = plan_segments(4, 2, 2);
    REQUIRE(plan.segments() == 2);
    CHECK(plan.offsets == std::vector<std::size_t>{0, 2});
    for (std::size_t c = 0; c < 4; ++c) CHECK(plan.overlap[c] == 1);
}

TEST_CASE("plan_segments: misaligned geometry is rejected with guidance") {
    CHECK_THROWS_WITH(plan_segments(5, 2, 2),
                      Catch::Matchers::ContainsSubstring("divisible") &&
                          Catch::Matchers::ContainsSubstring("d=5") &&
                          Catch::Matchers::ContainsSubstring("D=2") &&
                          Catch::Matchers::ContainsSubstring("S=2"));
    CHECK_THROWS(plan_segments(4, 5, 1));   // D > d
    CHECK_THROWS(plan_segments(8, 4, 5));   // S > D
    CHECK_THROWS(plan_segments(8, 4, 0));   // S = 0
}

TEST_CASE("flatten_scalars: time-major coordinate-minor order and round trip") {
    Matrix hist(3, 2);
    hist.a = {1, 2, 3, 4, 5, 6};  // frames (1,2), (3,4), (5,6)
    Vec flat = flatten_scalars(hist);
    CHECK(flat == Vec{1, 2, 3, 4, 5, 6});
    Matrix back = unflatten_scalars(flat, 3, 2);
    CHECK(back == hist);
    CHECK_THROWS(unflatten_scalars(flat, 2, 2));
}

TEST_CASE("merge_segment_predictions: overlap averaging example") {
    // d=4, D=2, S=1: segments at offsets 0,1,2. Predictions (1,2), (3,5),
    // (7,9) merge to (1, (2+3)/2, (5+7)/2, 9); every value is exactly
    // representable, so comparisons are exact.
    SegmentationPlan plan = plan_segments(4, 2, 1);
    REQUIRE(plan.segments() == 3);
    Vec merged = merge_segment_predictions(plan, {{1, 2}, {3, 5}, {7, 9}});
    CHECK(merged == Vec{1.0, 2.5, 6.0, 9.0});
}

TEST_CASE("merge_segment_predictions: S=D concatenates") {
    SegmentationPlan plan = plan_segments(6, 2, 2);
    Vec merged = merge_segment_predictions(plan, {{1, 2}, {3, 4}, {5, 6}});
    CHECK(merged == Vec{1, 2, 3, 4, 5, 6});
}

TEST_CASE("merge_segment_predictions: matches per-coordinate gather oracle bitwise") {
    // Oracle built independently: for each coordinate, walk segments in order,
    // collect covering predictions, accumulate first + deviations.
    SegmentationPlan plan = plan_segments(8, 4, 2);
    Rng rng(314);
    std::vector<Vec> preds;
    for (std::size_t s = 0; s < plan.segments(); ++s) preds.push_back(rng.gaussian_vec(4));

    Vec merged = merge_segment_predictions(plan, preds);

    for (std::size_t coord = 0; coord < 8; ++coord) {
        bool have_first = false;
        double first = 0.0, dev = 0.0;
        std::size_t n = 0;
        for (std::size_t s = 0; s < plan.segments(); ++s) {
            const std::size_t off = plan.offsets[s];
            if (coord >= off && coord < off + plan.step) {
                const double v = preds[s][coord - off];
                if (!have_first) {
                    first = v;
                    have_first = true;
                } else {
                    dev += v - first;
                }
                ++n;
            }
        }
        REQUIRE(n == plan.overlap[coord]);
        const double expect = n == 1 ? first : first + dev / static_cast<double>(n);
        CHECK(merged[coord] == expect);  // bitwise
    }
}

TEST_CASE("merge_segment_predictions: identical copies reassemble exactly") {
    SegmentationPlan plan = plan_segments(10, 4, 2);
    Rng rng(77);
    Vec frame = rng.gaussian_vec(10);
    std::vector<Vec> preds;
    for (std::size_t off : plan.offsets) preds.emplace_back(frame.begin() + off, frame.begin() + off + 4);
    Vec merged = merge_segment_predictions(plan, preds);
    CHECK(merged == frame);  // bitwise identity
}

TEST_CASE("merge_segment_predictions: shape errors") {
    SegmentationPlan plan = plan_segments(4, 2, 2);
    CHECK_THROWS(merge_segment_predictions(plan, {{1, 2}}));
    CHECK_THROWS(merge_segment_predictions(plan, {{1, 2}, {3}}));
}

TEST_CASE("forecast: zero parameters give zero predictions in every mode") {
    Matrix hist = fixture_history();
    for (ForecastMode mode : {ForecastMode::flattened, ForecastMode::per_channel,
                              ForecastMode::linear, ForecastMode::vanilla}) {
        for (ReadoutKind ro : {ReadoutKind::linear, ReadoutKind::rbf}) {
            if (mode == ForecastMode::linear && ro == ReadoutKind::rbf) continue;
            ForecasterConfig cfg;
            cfg.mode = mode;
            cfg.readout = ro;
            cfg.d = 6;
            cfg.D = 4;
            cfg.S = 2;
            cfg.H = 3;
            cfg.rbf_kernels = 3;
            ForecasterModel m = make_forecaster(cfg);  // params default to zero
            Vec out = forecast_frame(hist, m);
            REQUIRE(out.size() == 6);
            for (double v : out) CHECK(v == 0.0);
        }
    }
}

TEST_CASE("forecast: zero cell with centered kernel emits the coefficient") {
    // A zero-parameter cell keeps h = 0 for any input, so an RBF kernel
    // centered at the origin fires at full strength and the prediction equals
    // its coefficient everywhere.
    ForecasterConfig cfg;
    cfg.mode = ForecastMode::flattened;
    cfg.readout = ReadoutKind::rbf;
    cfg.d = 6;
    cfg.D = 4;
    cfg.S = 2;
    cfg.H = 3;
    cfg.rbf_kernels = 1;
    ForecasterModel m = make_forecaster(cfg);
    m.store[m.rbf.coeffs].value = {0.625};
    Matrix hist = fixture_history();
    Vec out = forecast_frame(hist, m);
    for (double v : out) CHECK(v == Catch::Approx(0.625).epsilon(1e-15));
}

TEST_CASE("forecast_frame: frozen regression values for the scalar modes") {
    Matrix hist = fixture_history();

    ForecasterModel flat = seeded_model(ForecastMode::flattened);
    Vec fo = forecast_frame(hist, flat);
    const Vec flat_expect = {0.084487273252747033, 0.080496901769112381, 0.078920627740352217,
                             0.07959687918734458,  0.080740467725536752, 0.081549723122197992};
    REQUIRE(fo.size() == 6);
    for (std::size_t j = 0; j < 6; ++j)
        CHECK(fo[j] == Catch::Approx(flat_expect[j]).epsilon(1e-10));

    ForecasterModel chan = seeded_model(ForecastMode::per_channel);
    Vec co = forecast_frame(hist, chan);
    const Vec chan_expect = {0.082976019185618172, 0.077037530232188692, 0.079421463640969539,
                             0.080793556225282157, 0.080341790037910518, 0.079329580321884002};
    for (std::size_t j = 0; j < 6; ++j)
        CHECK(co[j] == Catch::Approx(chan_expect[j]).epsilon(1e-10));

    // Same parameters, different serialization: the modes must not coincide.
    double diff = 0.0;
    for (std::size_t j = 0; j < 6; ++j) diff += std::fabs(fo[j] - co[j]);
    CHECK(diff > 1e-6);
}

TEST_CASE("forecast_unit: per-channel coordinates are independent") {
    ForecasterModel m = seeded_model(ForecastMode::per_channel);
    Matrix seg(3, 4);
    Rng rng(55);
    for (auto& v : seg.a) v = rng.uniform(-1.0, 1.0);
    Vec base = forecast_subvector(seg, m);

    Matrix bumped = seg;
    bumped.at(1, 2) += 0.5;  // frame 1, coordinate 2
    Vec out = forecast_subvector(bumped, m);
    for (std::size_t l = 0; l < 4; ++l) {
        if (l == 2)
            CHECK(out[l] != base[l]);
        else
            CHECK(out[l] == base[l]);
    }

    // Flattened mode carries state across coordinates, so the same bump
    // propagates to later positions as well.
    ForecasterModel fm = seeded_model(ForecastMode::flattened);
    Vec fbase = forecast_subvector(seg, fm);
    Vec fout = forecast_subvector(bumped, fm);
    CHECK(fout[3] != fbase[3]);
}

TEST_CASE("forecast_subvector: rejects non-scalar modes") {
    ForecasterModel lin = seeded_model(ForecastMode::linear, ReadoutKind::linear);
    Matrix seg(2, 4, 0.1);
    CHECK_THROWS(forecast_subvector(seg, lin));
}

TEST_CASE("forecast: linear mode uses only the last frame") {
    ForecasterModel m = seeded_model(ForecastMode::linear, ReadoutKind::linear);
    Matrix h1 = fixture_history();
    Matrix h2 = h1;
    h2.at(0, 0) += 10.0;  // earlier frames are ignored by the memoryless map
    CHECK(forecast_frame(h1, m) == forecast_frame(h2, m));
    Matrix h3 = h1;
    h3.at(2, 0) += 1.0;
    CHECK(forecast_frame(h1, m) != forecast_frame(h3, m));
}

TEST_CASE("generate_future: steps=0 returns the input unchanged") {
    ForecasterModel m = seeded_model(ForecastMode::flattened);
    Matrix hist = fixture_history();
    Matrix out = generate_future(hist, m, 0);
    CHECK(out == hist);
}

TEST_CASE("generate_future: rollout shape and composition oracle") {
    ForecasterModel m = seeded_model(ForecastMode::flattened);
    Matrix hist = fixture_history();
    Matrix out = generate_future(hist, m, 2);
    REQUIRE(out.rows == 5);
    REQUIRE(out.cols == 6);
    // Observed rows are copied through untouched.
    for (std::size_t r = 0; r < 3; ++r) CHECK(out.row_vec(r) == hist.row_vec(r));

    // Step 1 equals a direct one-frame forecast; step 2 equals the forecast of
    // the history grown by step 1.
    Vec step1 = forecast_frame(hist, m);
    CHECK(out.row_vec(3) == step1);
    Matrix grown(4, 6);
    std::copy(hist.a.begin(), hist.a.end(), grown.a.begin());
    std::copy(step1.begin(), step1.end(), grown.row(3));
    CHECK(out.row_vec(4) == forecast_frame(grown, m));
}

TEST_CASE("generate_future: multi-horizon models cannot roll out") {
    ForecasterConfig cfg;
    cfg.mode = ForecastMode::flattened;
    cfg.d = 6;
    cfg.D = 4;
    cfg.S = 2;
    cfg.H = 3;
    cfg.k = 3;
    ForecasterModel m = make_forecaster(cfg);
    Matrix hist = fixture_history();
    CHECK(generate_future(hist, m, 0) == hist);  // no rollout, no constraint
    CHECK_THROWS_WITH(generate_future(hist, m, 1),
                      Catch::Matchers::ContainsSubstring("horizon k=1"));
}

TEST_CASE("param_count: scalar cell size is independent of d and D") {
    ForecasterConfig a;
    a.mode = ForecastMode::flattened;
    a.readout = ReadoutKind::linear;
    a.d = 128;
    a.D = 32;
    a.S = 16;
    a.H = 4;
    ForecasterConfig b = a;
    b.d = 2048;
    b.D = 128;
    b.S = 64;
    ParamCountReport ra = param_count(make_forecaster(a));
    ParamCountReport rb = param_count(make_forecaster(b));
    CHECK(ra.cell == 96);
    CHECK(rb.cell == 96);
    CHECK(ra.readout == 5);  // H weights + bias
    CHECK(ra.total == 101);
    CHECK(rb.total == 101);
    CHECK(ra.formula_echo == 20);  // 4(H+1) at H=4
    CHECK(rb.formula_echo == 20);
}

TEST_CASE("param_count: vector-input LSTM scales with d") {
    ForecasterConfig cfg;
    cfg.mode = ForecastMode::vanilla;
    cfg.readout = ReadoutKind::linear;
    cfg.d = 16;
    cfg.D = 16;
    cfg.S = 16;
    cfg.H = 8;
    ForecasterModel m = make_forecaster(cfg);
    ParamCountReport r = param_count(m);
    CHECK(r.cell == 4 * (8 * 16 + 64 + 8));  // 800
    CHECK(r.readout == 128);                 // H x d, no bias
    CHECK(r.total == 928);
    CHECK(r.formula_echo == 4 * (16 * 8 + 256));  // 1536
}

TEST_CASE("param_count: linear baseline is the D x D map") {
    ForecasterConfig cfg;
    cfg.mode = ForecastMode::linear;
    cfg.d = 8;
    cfg.D = 4;
    cfg.S = 2;
    ForecasterModel m = make_forecaster(cfg);
    ParamCountReport r = param_count(m);
    CHECK(r.cell == 0);
    CHECK(r.readout == 16);
    CHECK(r.total == 16);
    CHECK(r.formula_echo == 16);
}

TEST_CASE("forecast_frame: shape errors") {
    ForecasterModel m = seeded_model(ForecastMode::flattened);
    Matrix wrong(2, 5, 0.0);
    CHECK_THROWS(forecast_frame(wrong, m));
    Matrix empty(0, 6);
    CHECK_THROWS(forecast_frame(empty, m));
}
