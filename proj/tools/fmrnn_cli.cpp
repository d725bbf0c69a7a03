// Command-line front end: dataset generation, training, evaluation, sweeps,
// correlation analysis, parameter counting, and the self-verification suite.
//
// Every command resolves its configuration as defaults < config file < flags
// and writes the resolved config into the output directory. Metrics are
// appended as line-delimited JSON; series are additionally exported as CSV.

#include "fmrnn/fmrnn.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using fmrnn::json;

namespace {

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    fmrnn::require(is.good(), "config: cannot open: " + path);
    json cfg;
    try {
        is >> cfg;
    } catch (const json::exception& e) {
        throw std::runtime_error("config: parse error in " + path + ": " + e.what());
    }
    fmrnn::require(cfg.is_object(), "config: top level must be an object: " + path);
    return cfg;
}

// flags win over file values; file values win over defaults.
template <typename T>
void overlay(const CLI::Option* opt, T& var, const json& cfg, const char* key) {
    if (opt->count() == 0 && cfg.contains(key)) var = cfg.at(key).get<T>();
}

void write_resolved_config(const std::string& out_dir, const json& resolved) {
    fs::create_directories(out_dir);
    const std::string path = (fs::path(out_dir) / "config.json").string();
    std::ofstream os(path);
    fmrnn::require(os.good(), "config: cannot write: " + path);
    os << resolved.dump(2) << "\n";
    fmrnn::require(os.good(), "config: write failed: " + path);
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(std::stod(cell));
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(static_cast<std::size_t>(std::stoull(cell)));
    return out;
}

void write_loss_csv(const std::string& path, const fmrnn::LossHistory& h, bool classifier) {
    std::ofstream os(path);
    fmrnn::require(os.good(), "loss log: cannot write: " + path);
    os.precision(17);
    if (classifier) {
        os << "epoch,step,ce\n";
        for (const auto& s : h.steps) os << s.epoch << "," << s.step << "," << s.total << "\n";
    } else if (h.has_adv) {
        os << "epoch,step,l2,adv,disc,total\n";
        for (const auto& s : h.steps)
            os << s.epoch << "," << s.step << "," << s.l2 << "," << s.adv << "," << s.disc << ","
               << s.total << "\n";
    } else {
        os << "epoch,step,l2,total\n";
        for (const auto& s : h.steps)
            os << s.epoch << "," << s.step << "," << s.l2 << "," << s.total << "\n";
    }
    fmrnn::require(os.good(), "loss log: write failed: " + path);
}

// Option bundle shared by train / sweep / param-count.
struct ModelOpts {
    std::string mode = "flattened";
    std::string readout = "rbf";
    std::size_t D = 128;
    std::size_t S = 64;
    std::size_t H = 4;
    std::size_t kernels = 6;
    std::size_t horizon = 1;

    CLI::Option *o_mode, *o_readout, *o_D, *o_S, *o_H, *o_kernels, *o_horizon;

    void attach(CLI::App* cmd) {
        o_mode = cmd->add_option("--mode", mode,
                                 "forecaster mode: flattened|per_channel|linear|vanilla");
        o_readout = cmd->add_option("--readout", readout, "readout kind: linear|rbf");
        o_D = cmd->add_option("--feature-step", D, "feature step size D");
        o_S = cmd->add_option("--stride", S, "feature stride S");
        o_H = cmd->add_option("--hidden", H, "LSTM hidden size H");
        o_kernels = cmd->add_option("--kernels", kernels, "RBF kernel count n");
        o_horizon = cmd->add_option("--horizon", horizon, "prediction horizon k");
    }

    void resolve(const json& cfg) {
        overlay(o_mode, mode, cfg, "mode");
        overlay(o_readout, readout, cfg, "readout");
        overlay(o_D, D, cfg, "feature_step");
        overlay(o_S, S, cfg, "stride");
        overlay(o_H, H, cfg, "hidden");
        overlay(o_kernels, kernels, cfg, "kernels");
        overlay(o_horizon, horizon, cfg, "horizon");
    }

    fmrnn::ForecasterConfig to_config(std::size_t d) const {
        fmrnn::ForecasterConfig fc;
        fc.mode = fmrnn::forecast_mode_from_string(mode);
        fc.readout = fmrnn::readout_kind_from_string(readout);
        fc.d = d;
        fc.D = fc.mode == fmrnn::ForecastMode::vanilla ? d : D;
        fc.S = fc.mode == fmrnn::ForecastMode::vanilla ? d : S;
        fc.H = H;
        fc.rbf_kernels = kernels;
        fc.k = horizon;
        return fc;
    }
};

struct TrainOpts {
    double w_l2 = 10.0;
    double w_adv = 1.0;
    double base_lr = 0.001;
    double decay_rate = 0.9;
    std::size_t epochs = 5;
    std::size_t batch_forecaster = 128;
    std::size_t batch_classifier = 256;
    std::size_t steps_per_epoch = 0;

    CLI::Option *o_wl2, *o_wadv, *o_lr, *o_decay, *o_epochs, *o_bf, *o_bc, *o_spe;

    void attach(CLI::App* cmd) {
        o_wl2 = cmd->add_option("--w-l2", w_l2, "reconstruction loss weight");
        o_wadv = cmd->add_option("--w-adv", w_adv, "adversarial loss weight (0 disables GAN)");
        o_lr = cmd->add_option("--base-lr", base_lr, "base learning rate");
        o_decay = cmd->add_option("--decay-rate", decay_rate, "exponential lr decay per epoch");
        o_epochs = cmd->add_option("--epochs", epochs, "training epochs");
        o_bf = cmd->add_option("--batch-forecaster", batch_forecaster, "forecaster batch size");
        o_bc = cmd->add_option("--batch-classifier", batch_classifier, "classifier batch size");
        o_spe = cmd->add_option("--steps-per-epoch", steps_per_epoch,
                                "batches per epoch (0 = one dataset pass)");
    }

    void resolve(const json& cfg) {
        overlay(o_wl2, w_l2, cfg, "w_l2");
        overlay(o_wadv, w_adv, cfg, "w_adv");
        overlay(o_lr, base_lr, cfg, "base_lr");
        overlay(o_decay, decay_rate, cfg, "decay_rate");
        overlay(o_epochs, epochs, cfg, "epochs");
        overlay(o_bf, batch_forecaster, cfg, "batch_forecaster");
        overlay(o_bc, batch_classifier, cfg, "batch_classifier");
        overlay(o_spe, steps_per_epoch, cfg, "steps_per_epoch");
    }

    fmrnn::TrainConfig to_config(std::uint64_t seed) const {
        fmrnn::TrainConfig tc;
        tc.w_l2 = w_l2;
        tc.w_adv = w_adv;
        tc.base_lr = base_lr;
        tc.decay_rate = decay_rate;
        tc.epochs = epochs;
        tc.batch_forecaster = batch_forecaster;
        tc.batch_classifier = batch_classifier;
        tc.steps_per_epoch = steps_per_epoch;
        tc.seed = seed;
        return tc;
    }
};

struct EvalOpts {
    double observe_frac = 0.5;
    double predict_frac = 0.0;
    std::string pooling = "max";

    CLI::Option *o_r, *o_p, *o_pool;

    void attach(CLI::App* cmd) {
        o_r = cmd->add_option("--observe-frac", observe_frac, "observed fraction r in (0,1]");
        o_p = cmd->add_option("--predict-frac", predict_frac, "generated fraction p in [0,1)");
        o_pool = cmd->add_option("--pooling", pooling, "pooling: average|max|none");
    }

    void resolve(const json& cfg) {
        overlay(o_r, observe_frac, cfg, "observe_frac");
        overlay(o_p, predict_frac, cfg, "predict_frac");
        overlay(o_pool, pooling, cfg, "pooling");
    }

    fmrnn::AnticipationConfig to_config() const {
        fmrnn::AnticipationConfig ac;
        ac.observe_frac = observe_frac;
        ac.predict_frac = predict_frac;
        ac.pooling = fmrnn::pooling_from_string(pooling);
        return ac;
    }
};

json synth_to_json(const fmrnn::SynthSpec& s) {
    return {{"name", s.name},
            {"classes", s.classes},
            {"d", s.d},
            {"frames", s.frames},
            {"videos_per_class", s.videos_per_class},
            {"block", s.block},
            {"tau_scale", s.tau_scale},
            {"rates", s.rates},
            {"latent_noise", s.latent_noise},
            {"init_scale", s.init_scale},
            {"block_corr", s.block_corr},
            {"obs_noise", s.obs_noise},
            {"alpha_lo", s.alpha_lo},
            {"alpha_hi", s.alpha_hi},
            {"beta_range", s.beta_range},
            {"test_fraction", s.test_fraction},
            {"seed", s.seed},
            {"bimodal", s.bimodal},
            {"v1", s.v1},
            {"v2", s.v2},
            {"bimodal_videos", s.bimodal_videos}};
}

// ---------------------------------------------------------------------------
// gen-synthetic
// ---------------------------------------------------------------------------

struct GenArgs {
    std::string config_path, out;
    std::uint64_t seed = 1;
    fmrnn::SynthSpec spec;
    bool text = false;
    CLI::Option *o_seed, *o_classes, *o_d, *o_frames, *o_vpc, *o_block, *o_tau, *o_lnoise,
        *o_iscale, *o_bcorr, *o_onoise, *o_tfrac, *o_bimodal, *o_v1, *o_v2;
};

void cmd_gen_synthetic(GenArgs& a) {
    const json cfg = load_config_file(a.config_path);
    const json scfg = cfg.value("synth", cfg);  // accept flat or nested
    overlay(a.o_classes, a.spec.classes, scfg, "classes");
    overlay(a.o_d, a.spec.d, scfg, "d");
    overlay(a.o_frames, a.spec.frames, scfg, "frames");
    overlay(a.o_vpc, a.spec.videos_per_class, scfg, "videos_per_class");
    overlay(a.o_block, a.spec.block, scfg, "block");
    overlay(a.o_tau, a.spec.tau_scale, scfg, "tau_scale");
    overlay(a.o_lnoise, a.spec.latent_noise, scfg, "latent_noise");
    overlay(a.o_iscale, a.spec.init_scale, scfg, "init_scale");
    overlay(a.o_bcorr, a.spec.block_corr, scfg, "block_corr");
    overlay(a.o_onoise, a.spec.obs_noise, scfg, "obs_noise");
    overlay(a.o_tfrac, a.spec.test_fraction, scfg, "test_fraction");
    overlay(a.o_bimodal, a.spec.bimodal, scfg, "bimodal");
    overlay(a.o_v1, a.spec.v1, scfg, "v1");
    overlay(a.o_v2, a.spec.v2, scfg, "v2");
    overlay(a.o_seed, a.seed, cfg, "seed");
    a.spec.seed = a.seed;

    const fmrnn::Dataset ds = fmrnn::synth_generate(a.spec);
    fmrnn::save_dataset(a.out, ds, a.text);

    json resolved = {{"command", "gen-synthetic"}, {"synth", synth_to_json(a.spec)},
                     {"seed", a.seed},             {"text", a.text},
                     {"out", a.out}};
    write_resolved_config(a.out, resolved);
    std::cout << "wrote " << ds.train.size() + ds.test.size() << " videos ("
              << ds.train.size() << " train, " << ds.test.size() << " test) to " << a.out
              << "\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config_path, dataset, out;
    std::uint64_t seed = 1;
    ModelOpts model;
    TrainOpts train;
    bool with_classifier = false;
    bool classifier_only = false;
    std::size_t classifier_kernels = 256;
    CLI::Option *o_seed, *o_dataset, *o_ck;
};

void cmd_train(TrainArgs& a) {
    const json cfg = load_config_file(a.config_path);
    a.model.resolve(cfg);
    a.train.resolve(cfg);
    overlay(a.o_seed, a.seed, cfg, "seed");
    overlay(a.o_dataset, a.dataset, cfg, "dataset");
    overlay(a.o_ck, a.classifier_kernels, cfg, "classifier_kernels");
    fmrnn::require(!a.dataset.empty(), "train: --dataset is required");

    const fmrnn::Dataset ds = fmrnn::load_dataset(a.dataset);
    const fmrnn::TrainConfig tc = a.train.to_config(a.seed);
    fs::create_directories(a.out);

    json resolved = {{"command", "train"},
                     {"dataset", a.dataset},
                     {"dataset_name", ds.name},
                     {"seed", a.seed},
                     {"train", to_json(tc)},
                     {"out", a.out}};
    json semantic = {{"command", "train"}, {"dataset_name", ds.name}, {"train", to_json(tc)}};

    if (!a.classifier_only) {
        const fmrnn::ForecasterConfig fc = a.model.to_config(ds.d);
        resolved["forecaster"] = to_json(fc);
        semantic["forecaster"] = to_json(fc);
        auto res = fmrnn::train_forecaster(ds.train, fc, tc);
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        fmrnn::save_forecaster((fs::path(a.out) / "forecaster.ckpt").string(), res.model);
        if (res.discriminator)
            fmrnn::save_discriminator((fs::path(a.out) / "discriminator.ckpt").string(),
                                      *res.discriminator);
        write_loss_csv((fs::path(a.out) / "losses_forecaster.csv").string(), res.history,
                       false);
        fmrnn::MetricsRecord rec = fmrnn::make_metrics_record("train-forecaster", semantic);
        rec.scalars["final_epoch_mean_l2"] = res.history.epoch_mean_l2.back();
        rec.scalars["final_epoch_mean_total"] = res.history.epoch_mean_total.back();
        rec.scalars["param_total"] =
            static_cast<double>(fmrnn::param_count(res.model).total);
        for (const auto& s : res.history.steps)
            rec.series["loss_vs_step"].push_back(
                {static_cast<double>(s.step), s.total});
        fmrnn::append_metrics((fs::path(a.out) / "metrics.jsonl").string(), rec);
        fmrnn::write_series_csv(a.out, "forecaster_", rec);
        std::cout << "forecaster trained: final epoch mean l2 "
                  << res.history.epoch_mean_l2.back() << "\n";
    }

    if (a.with_classifier || a.classifier_only) {
        fmrnn::ClassifierConfig cc;
        cc.d = ds.d;
        cc.classes = ds.classes();
        cc.rbf_kernels = a.classifier_kernels;
        resolved["classifier"] = to_json(cc);
        semantic["classifier"] = to_json(cc);
        auto res = fmrnn::train_classifier(ds.train, cc, tc);
        fmrnn::save_classifier((fs::path(a.out) / "classifier.ckpt").string(), res.model);
        write_loss_csv((fs::path(a.out) / "losses_classifier.csv").string(), res.history, true);
        fmrnn::MetricsRecord rec = fmrnn::make_metrics_record("train-classifier", semantic);
        rec.scalars["final_epoch_mean_ce"] = res.history.epoch_mean_total.back();
        for (const auto& s : res.history.steps)
            rec.series["ce_vs_step"].push_back({static_cast<double>(s.step), s.total});
        fmrnn::append_metrics((fs::path(a.out) / "metrics.jsonl").string(), rec);
        fmrnn::write_series_csv(a.out, "classifier_", rec);
        std::cout << "classifier trained: final epoch mean ce "
                  << res.history.epoch_mean_total.back() << "\n";
    }

    write_resolved_config(a.out, resolved);
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string config_path, dataset, forecaster, classifier, out, split = "test";
    std::string p_values;
    std::uint64_t seed = 1;
    EvalOpts eval;
    CLI::Option *o_seed, *o_dataset, *o_forecaster, *o_classifier, *o_split, *o_pvalues;
};

void cmd_evaluate(EvalArgs& a) {
    const json cfg = load_config_file(a.config_path);
    a.eval.resolve(cfg);
    overlay(a.o_seed, a.seed, cfg, "seed");
    overlay(a.o_dataset, a.dataset, cfg, "dataset");
    overlay(a.o_forecaster, a.forecaster, cfg, "forecaster");
    overlay(a.o_classifier, a.classifier, cfg, "classifier");
    overlay(a.o_split, a.split, cfg, "split");
    overlay(a.o_pvalues, a.p_values, cfg, "p_values");
    fmrnn::require(!a.dataset.empty(), "evaluate: --dataset is required");
    fmrnn::require(!a.classifier.empty(), "evaluate: --classifier checkpoint is required");

    const fmrnn::Dataset ds = fmrnn::load_dataset(a.dataset);
    const auto& split = a.split == "train" ? ds.train : ds.test;
    fmrnn::require(!split.empty(), "evaluate: split '" + a.split + "' is empty");
    const fmrnn::ClassifierModel classifier = fmrnn::load_classifier(a.classifier);

    const bool needs_forecaster = a.eval.predict_frac > 0.0 || !a.p_values.empty();
    fmrnn::ForecasterModel forecaster;
    if (needs_forecaster) {
        fmrnn::require(!a.forecaster.empty(),
                       "evaluate: --forecaster checkpoint is required when p > 0");
        forecaster = fmrnn::load_forecaster(a.forecaster);
    } else {
        fmrnn::ForecasterConfig fc;
        fc.d = ds.d;
        fc.D = ds.d;
        fc.S = ds.d;
        fc.mode = fmrnn::ForecastMode::linear;
        forecaster = fmrnn::make_forecaster(fc);  // placeholder, unused at p=0
    }

    json semantic = {{"command", "evaluate"},
                     {"dataset_name", ds.name},
                     {"split", a.split},
                     {"observe_frac", a.eval.observe_frac},
                     {"predict_frac", a.eval.predict_frac},
                     {"pooling", a.eval.pooling}};
    if (needs_forecaster) semantic["forecaster"] = to_json(forecaster.cfg);
    semantic["classifier"] = to_json(classifier.cfg);
    fmrnn::MetricsRecord rec = fmrnn::make_metrics_record("evaluate", semantic);

    const auto base = fmrnn::evaluate(split, forecaster, classifier, a.eval.to_config());
    rec.scalars["accuracy"] = base.accuracy;
    std::cout << "accuracy " << base.accuracy << " (r=" << a.eval.observe_frac
              << ", p=" << a.eval.predict_frac << ", pooling=" << a.eval.pooling << ")\n";

    if (!a.p_values.empty()) {
        for (double p : parse_double_list(a.p_values)) {
            fmrnn::AnticipationConfig ac = a.eval.to_config();
            ac.predict_frac = p;
            const auto r = fmrnn::evaluate(split, forecaster, classifier, ac);
            rec.series["accuracy_vs_p"].push_back({p, r.accuracy});
            std::cout << "  p=" << p << " accuracy " << r.accuracy << "\n";
        }
    }

    if (!a.out.empty()) {
        json resolved = semantic;
        resolved["dataset"] = a.dataset;
        resolved["forecaster_checkpoint"] = a.forecaster;
        resolved["classifier_checkpoint"] = a.classifier;
        resolved["p_values"] = a.p_values;
        resolved["seed"] = a.seed;
        resolved["out"] = a.out;
        write_resolved_config(a.out, resolved);
        fmrnn::append_metrics((fs::path(a.out) / "metrics.jsonl").string(), rec);
        fmrnn::write_series_csv(a.out, "evaluate_", rec);
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string config_path, dataset, out, axis, values;
    std::uint64_t seed = 1;
    ModelOpts model;
    TrainOpts train;
    EvalOpts eval;
    std::size_t classifier_kernels = 256;
    CLI::Option *o_seed, *o_dataset;
};

void cmd_sweep(SweepArgs& a) {
    const json cfg = load_config_file(a.config_path);
    a.model.resolve(cfg);
    a.train.resolve(cfg);
    a.eval.resolve(cfg);
    overlay(a.o_seed, a.seed, cfg, "seed");
    overlay(a.o_dataset, a.dataset, cfg, "dataset");
    fmrnn::require(!a.dataset.empty(), "sweep: --dataset is required");
    fmrnn::require(a.axis == "D" || a.axis == "S" || a.axis == "H" || a.axis == "n" ||
                       a.axis == "p",
                   "sweep: axis must be one of D, S, H, n, p");

    const fmrnn::Dataset ds = fmrnn::load_dataset(a.dataset);
    const fmrnn::TrainConfig tc = a.train.to_config(a.seed);
    fmrnn::ClassifierConfig cc;
    cc.d = ds.d;
    cc.classes = ds.classes();
    cc.rbf_kernels = a.classifier_kernels;

    json semantic = {{"command", "sweep"},
                     {"axis", a.axis},
                     {"values", a.values},
                     {"dataset_name", ds.name},
                     {"train", to_json(tc)},
                     {"observe_frac", a.eval.observe_frac},
                     {"predict_frac", a.eval.predict_frac},
                     {"pooling", a.eval.pooling}};
    fmrnn::MetricsRecord rec = fmrnn::make_metrics_record("sweep", semantic);

    // The classifier does not depend on the swept forecaster axis; train once.
    const auto cls = fmrnn::train_classifier(ds.train, cc, tc);

    if (a.axis == "p") {
        // p is evaluation-time; the trained model is identical at every point.
        const fmrnn::ForecasterConfig fc = a.model.to_config(ds.d);
        const auto fres = fmrnn::train_forecaster(ds.train, fc, tc);
        for (double p : parse_double_list(a.values)) {
            fmrnn::AnticipationConfig ac = a.eval.to_config();
            ac.predict_frac = p;
            const auto r = fmrnn::evaluate(ds.test, fres.model, cls.model, ac);
            rec.series["accuracy_vs_p"].push_back({p, r.accuracy});
            std::cout << "p=" << p << " accuracy " << r.accuracy << "\n";
        }
    } else {
        for (std::size_t v : parse_size_list(a.values)) {
            ModelOpts point = a.model;
            if (a.axis == "D") point.D = v;
            if (a.axis == "S") point.S = v;
            if (a.axis == "H") point.H = v;
            if (a.axis == "n") point.kernels = v;
            try {
                const fmrnn::ForecasterConfig fc = point.to_config(ds.d);
                const auto fres = fmrnn::train_forecaster(ds.train, fc, tc);
                const auto r = fmrnn::evaluate(ds.test, fres.model, cls.model,
                                               a.eval.to_config());
                rec.series["accuracy_vs_" + a.axis].push_back(
                    {static_cast<double>(v), r.accuracy});
                std::cout << a.axis << "=" << v << " accuracy " << r.accuracy << "\n";
            } catch (const std::exception& e) {
                std::cerr << "sweep: skipping " << a.axis << "=" << v << ": " << e.what()
                          << "\n";
            }
        }
    }

    if (!a.out.empty()) {
        json resolved = semantic;
        resolved["dataset"] = a.dataset;
        resolved["seed"] = a.seed;
        resolved["out"] = a.out;
        resolved["forecaster"] = to_json(a.model.to_config(ds.d));
        write_resolved_config(a.out, resolved);
        fmrnn::append_metrics((fs::path(a.out) / "metrics.jsonl").string(), rec);
        fmrnn::write_series_csv(a.out, "sweep_", rec);
    }
}

// ---------------------------------------------------------------------------
// corr-analysis
// ---------------------------------------------------------------------------

struct CorrArgs {
    std::string config_path, dataset, out, step_values = "4,8,16,32";
    CLI::Option *o_dataset, *o_steps;
};

void cmd_corr_analysis(CorrArgs& a) {
    const json cfg = load_config_file(a.config_path);
    overlay(a.o_dataset, a.dataset, cfg, "dataset");
    overlay(a.o_steps, a.step_values, cfg, "step_values");
    fmrnn::require(!a.dataset.empty(), "corr-analysis: --dataset is required");

    const fmrnn::Dataset ds = fmrnn::load_dataset(a.dataset);
    std::vector<std::size_t> valid;
    for (std::size_t D : parse_size_list(a.step_values)) {
        if (D >= 1 && ds.d % D == 0 && ds.d / D >= 2) {
            valid.push_back(D);
        } else {
            std::cerr << "corr-analysis: skipping D=" << D
                      << " (must divide d and leave at least two blocks)\n";
        }
    }
    fmrnn::require(!valid.empty(), "corr-analysis: no valid feature step values");

    const auto curve = fmrnn::avg_correlation_vs_stepsize(ds, valid);
    json semantic = {{"command", "corr-analysis"}, {"dataset_name", ds.name}};
    fmrnn::MetricsRecord rec = fmrnn::make_metrics_record("corr-analysis", semantic);
    for (const auto& pt : curve) {
        rec.series["correlation_vs_D"].push_back(
            {static_cast<double>(pt.D), pt.mean_abs_offdiag});
        std::cout << "D=" << pt.D << " mean |off-diagonal| correlation " << pt.mean_abs_offdiag
                  << "\n";
    }

    if (!a.out.empty()) {
        json resolved = semantic;
        resolved["dataset"] = a.dataset;
        resolved["step_values"] = a.step_values;
        resolved["out"] = a.out;
        write_resolved_config(a.out, resolved);
        fmrnn::append_metrics((fs::path(a.out) / "metrics.jsonl").string(), rec);
        fmrnn::write_series_csv(a.out, "corr_", rec);
    }
}

// ---------------------------------------------------------------------------
// param-count
// ---------------------------------------------------------------------------

struct ParamArgs {
    std::string config_path;
    std::size_t d = 2048;
    ModelOpts model;
    CLI::Option* o_d;
};

void cmd_param_count(ParamArgs& a) {
    const json cfg = load_config_file(a.config_path);
    a.model.resolve(cfg);
    overlay(a.o_d, a.d, cfg, "d");
    const fmrnn::ForecasterConfig fc = a.model.to_config(a.d);
    const auto r = fmrnn::param_count(fmrnn::make_forecaster(fc));
    std::cout << "mode            " << fmrnn::to_string(fc.mode) << " ("
              << fmrnn::to_string(fc.readout) << " readout)\n"
              << "exact cell      " << r.cell << "\n"
              << "exact readout   " << r.readout << "\n"
              << "exact total     " << r.total << "\n"
              << "formula echo    " << r.formula_echo << "\n";
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
    std::uint64_t seed = 7;
    bool skip_probe = false;
};

int cmd_verify(const VerifyArgs& a) {
    const auto results = fmrnn::run_verification(a.seed, !a.skip_probe);
    bool all_ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " — " << r.detail << "\n";
        all_ok = all_ok && r.passed;
    }
    std::cout << (all_ok ? "all checks passed" : "CHECKS FAILED") << " (" << results.size()
              << " checks)\n";
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature-mapping RNN toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cgen = app.add_subcommand("gen-synthetic", "generate a synthetic dataset");
    cgen->add_option("--config", gen.config_path, "JSON config file");
    cgen->add_option("--out", gen.out, "output directory")->required();
    gen.o_seed = cgen->add_option("--seed", gen.seed, "RNG seed");
    gen.o_classes = cgen->add_option("--classes", gen.spec.classes, "class count");
    gen.o_d = cgen->add_option("--dim", gen.spec.d, "feature dimension d");
    gen.o_frames = cgen->add_option("--frames", gen.spec.frames, "frames per video");
    gen.o_vpc = cgen->add_option("--videos-per-class", gen.spec.videos_per_class, "");
    gen.o_block = cgen->add_option("--block", gen.spec.block, "correlated block size B");
    gen.o_tau = cgen->add_option("--tau-scale", gen.spec.tau_scale, "class offset scale");
    gen.o_lnoise = cgen->add_option("--latent-noise", gen.spec.latent_noise, "");
    gen.o_iscale = cgen->add_option("--init-scale", gen.spec.init_scale, "");
    gen.o_bcorr = cgen->add_option("--block-corr", gen.spec.block_corr, "");
    gen.o_onoise = cgen->add_option("--obs-noise", gen.spec.obs_noise, "");
    gen.o_tfrac = cgen->add_option("--test-fraction", gen.spec.test_fraction, "");
    gen.o_bimodal = cgen->add_flag("--bimodal", gen.spec.bimodal, "bimodal probe payload");
    gen.o_v1 = cgen->add_option("--v1", gen.spec.v1, "");
    gen.o_v2 = cgen->add_option("--v2", gen.spec.v2, "");
    cgen->add_flag("--text", gen.text, "write text feature files");

    TrainArgs tr;
    auto* ctr = app.add_subcommand("train", "train forecaster and/or classifier");
    ctr->add_option("--config", tr.config_path, "JSON config file");
    tr.o_dataset = ctr->add_option("--dataset", tr.dataset, "dataset manifest path");
    ctr->add_option("--out", tr.out, "output directory")->required();
    tr.o_seed = ctr->add_option("--seed", tr.seed, "RNG seed");
    tr.model.attach(ctr);
    tr.train.attach(ctr);
    ctr->add_flag("--with-classifier", tr.with_classifier, "also train the classifier");
    ctr->add_flag("--classifier-only", tr.classifier_only, "train only the classifier");
    tr.o_ck = ctr->add_option("--classifier-kernels", tr.classifier_kernels, "");

    EvalArgs ev;
    auto* cev = app.add_subcommand("evaluate", "evaluate the anticipation pipeline");
    cev->add_option("--config", ev.config_path, "JSON config file");
    ev.o_dataset = cev->add_option("--dataset", ev.dataset, "dataset manifest path");
    ev.o_forecaster = cev->add_option("--forecaster", ev.forecaster, "forecaster checkpoint");
    ev.o_classifier = cev->add_option("--classifier", ev.classifier, "classifier checkpoint");
    cev->add_option("--out", ev.out, "output directory (optional)");
    ev.o_seed = cev->add_option("--seed", ev.seed, "RNG seed");
    ev.o_split = cev->add_option("--split", ev.split, "train|test");
    ev.o_pvalues = cev->add_option("--p-values", ev.p_values,
                                   "comma list of p values for an accuracy-vs-p series");
    ev.eval.attach(cev);

    SweepArgs sw;
    auto* csw = app.add_subcommand("sweep", "train+evaluate across one axis");
    csw->add_option("--config", sw.config_path, "JSON config file");
    sw.o_dataset = csw->add_option("--dataset", sw.dataset, "dataset manifest path");
    csw->add_option("--out", sw.out, "output directory (optional)");
    csw->add_option("--axis", sw.axis, "sweep axis: D|S|H|n|p")->required();
    csw->add_option("--values", sw.values, "comma list of axis values")->required();
    sw.o_seed = csw->add_option("--seed", sw.seed, "RNG seed");
    sw.model.attach(csw);
    sw.train.attach(csw);
    sw.eval.attach(csw);
    csw->add_option("--classifier-kernels", sw.classifier_kernels, "");

    CorrArgs co;
    auto* cco = app.add_subcommand("corr-analysis", "block correlation vs feature step size");
    cco->add_option("--config", co.config_path, "JSON config file");
    co.o_dataset = cco->add_option("--dataset", co.dataset, "dataset manifest path");
    co.o_steps = cco->add_option("--step-values", co.step_values, "comma list of D values");
    cco->add_option("--out", co.out, "output directory (optional)");

    ParamArgs pa;
    auto* cpa = app.add_subcommand("param-count", "exact and approximate parameter counts");
    cpa->add_option("--config", pa.config_path, "JSON config file");
    pa.o_d = cpa->add_option("--dim", pa.d, "feature dimension d");
    pa.model.attach(cpa);

    VerifyArgs ve;
    auto* cve = app.add_subcommand("verify", "run the self-verification suite");
    cve->add_option("--seed", ve.seed, "RNG seed");
    cve->add_flag("--skip-probe", ve.skip_probe, "skip the (slower) bimodal probe");

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(cgen)) cmd_gen_synthetic(gen);
        if (app.got_subcommand(ctr)) cmd_train(tr);
        if (app.got_subcommand(cev)) cmd_evaluate(ev);
        if (app.got_subcommand(csw)) cmd_sweep(sw);
        if (app.got_subcommand(cco)) cmd_corr_analysis(co);
        if (app.got_subcommand(cpa)) cmd_param_count(pa);
        if (app.got_subcommand(cve)) return cmd_verify(ve);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
