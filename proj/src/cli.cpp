#include "gswan/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gswan/checkpoint.hpp"
#include "gswan/errors.hpp"
#include "gswan/pipeline.hpp"
#include "gswan/evaluation.hpp"
#include "gswan/rng.hpp"
#include "gswan/synthetic.hpp"
#include "gswan/training.hpp"

namespace fs = std::filesystem;

namespace gswan {

namespace {

void write_snapshot(CLI::App* sub, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream os(fs::path(dir) / "resolved_config.ini");
    os << "# resolved configuration for `gswan " << sub->get_name() << "`\n";
    os << sub->config_to_str(true, false);
}

// ---------------------------------------------------------------- generate

struct GenerateOpts {
    SynthConfig synth;
    std::string topology = "ring";
    std::string metric = "speed";
    std::string out;
    std::string scatter_out;
};

void cmd_generate(CLI::App* sub, GenerateOpts& o) {
    o.synth.topology = topology_from_name(o.topology);
    o.synth.metric = metric_kind_from_name(o.metric);
    o.synth.with_companion = !o.scatter_out.empty();
    o.synth.validate();

    const std::vector<Edge> edges = generate_graph(o.synth);
    TrafficDataset d = generate_traffic(o.synth, edges);
    fs::create_directories(o.out);
    if (!o.scatter_out.empty()) {
        export_scatter(d, 0, 0, 2, o.scatter_out);
    }
    // the directory format carries channels 0 and 1 only
    write_dataset(d, o.out);

    nlohmann::json manifest;
    manifest["sensors"] = o.synth.n_sensors;
    manifest["days"] = o.synth.days;
    manifest["topology"] = topology_name(o.synth.topology);
    manifest["metric"] = metric_kind_name(o.synth.metric);
    manifest["base_level"] = o.synth.base_level;
    manifest["amplitude"] = o.synth.amplitude;
    manifest["phase_spread_minutes"] = o.synth.phase_spread_minutes;
    manifest["coupling_gain"] = {o.synth.coupling_gain_min, o.synth.coupling_gain_max};
    manifest["coupling_lag"] = {o.synth.coupling_lag_min, o.synth.coupling_lag_max};
    manifest["weekend_factor"] = o.synth.weekend_factor;
    manifest["noise_std"] = o.synth.noise_std;
    manifest["seed"] = o.synth.seed;
    manifest["start_timestamp"] = o.synth.start_timestamp;
    std::ofstream ms(fs::path(o.out) / "synth_manifest.json");
    ms << manifest.dump(2) << '\n';

    write_snapshot(sub, o.out);
    std::cout << "wrote " << d.n_sensors() << " sensors x " << d.n_timesteps() << " timesteps to " << o.out << "\n";
}

// ----------------------------------------------------------------- inspect

void cmd_inspect(CLI::App* sub, const std::string& data_dir, const std::string& out) {
    TrafficDataset d = load_dataset(data_dir);
    DatasetSummary s = summarize(d);
    std::ostringstream os;
    os << "sensors    " << s.sensors << "\n"
       << "edges      " << s.edges << "\n"
       << "timesteps  " << s.timesteps << "\n"
       << "entries    " << s.entries << "\n"
       << "missing    " << s.missing << "\n"
       << "metric     " << metric_kind_name(d.metric_kind) << "\n"
       << "mean       " << s.mean << "\n"
       << "std        " << s.stddev << "\n"
       << "days       " << static_cast<double>(s.timesteps) / 288.0 << "\n";
    std::cout << os.str();
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream f(fs::path(out) / "summary.txt");
        f << os.str();
        write_snapshot(sub, out);
    }
}

// ------------------------------------------------------------------- train

struct TrainOpts {
    std::string data;
    std::string out;
    std::string split;  // empty = by metric kind
    std::string dilations = "1,2,1,2,1,2,1,2";
    std::string ablation = "none";
    ModelConfig model;
    TrainConfig train;
    AugmentConfig augment;
    std::uint64_t seed = 0;
    bool timing = false;
};

std::vector<int> parse_dilations(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("bad dilation list '" + text + "'");
        }
    }
    return out;
}

void apply_ablation(const std::string& name, ModelConfig& mcfg, AugmentConfig& acfg) {
    if (name == "none") return;
    if (name == "no-occlusion") {
        acfg.p_occlude = 0.0;
    } else if (name == "no-permutation") {
        acfg.p_permute = 0.0;
    } else if (name == "no-noise") {
        acfg.noise_scale = 0.0;
    } else if (name == "no-node-embeddings") {
        mcfg.use_node_embeddings = false;
    } else if (name == "single-head") {
        mcfg.n_heads = 1;
    } else if (name == "gcn") {
        mcfg.use_sgt = false;
    } else {
        throw ConfigError("unknown ablation '" + name + "'");
    }
}

int cmd_train(CLI::App* sub, TrainOpts& o) {
    o.model.dilations = parse_dilations(o.dilations);
    apply_ablation(o.ablation, o.model, o.augment);
    o.model.validate();
    o.train.seed = derive_seed(o.seed, "train");
    o.augment.seed = derive_seed(o.seed, "augment");

    TrafficDataset raw = load_dataset(o.data);
    const SplitRatio ratio = o.split.empty() ? default_ratio(raw.metric_kind) : parse_ratio(o.split);
    Pipeline p = prepare_pipeline(raw, ratio, o.model.input_len, o.model.horizon);

    TrainData data;
    data.train_windows = make_windows(p.scaled.train, o.model.input_len, o.model.horizon);
    data.val_windows = make_windows(p.scaled.val, o.model.input_len, o.model.horizon);
    data.a_r = p.a_r;
    data.scaler = p.scaler;

    ModelParams params = init_model(o.model, p.n_sensors, derive_seed(o.seed, "init-model"));
    std::cout << "training on " << data.train_windows.size() << " windows (" << params.total_parameters()
              << " parameters, ablation=" << o.ablation << ")\n";
    TrainResult result = train(std::move(params), data, o.train, o.augment);

    fs::create_directories(o.out);
    save_checkpoint(result.best, p.scaler, o.seed, (fs::path(o.out) / "checkpoint_best.json").string());
    save_checkpoint(result.final, p.scaler, o.seed, (fs::path(o.out) / "checkpoint_final.json").string());
    write_history_csv(result.history, (fs::path(o.out) / "history.csv").string(), o.timing);
    write_snapshot(sub, o.out);

    for (const EpochRecord& r : result.history.epochs) {
        std::printf("epoch %3lld  loss %.5f  val mae %.5f  rmse %.5f  lr %.3g\n", static_cast<long long>(r.epoch),
                    r.train_loss, r.val_mae, r.val_rmse, r.lr);
    }
    if (result.history.diverged) {
        std::cerr << "training aborted: " << result.history.note << "\n";
        return 3;
    }
    std::cout << "best epoch " << result.history.best_epoch << " with validation MAE " << result.history.best_val_mae
              << "\n";
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOpts {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
    std::string ratio;
    std::string out;
    std::int64_t batch = 64;
    int threads = 1;
};

void append_csv_rows(std::ostream& os, const std::string& series, const MetricsReport& rep) {
    auto row = [&](const std::string& step, const StepMetrics& m) {
        os << series << ',' << step << ',' << m.mae << ',';
        if (m.mape) os << *m.mape;
        os << ',' << m.rmse << '\n';
    };
    for (std::size_t f = 0; f < rep.per_step.size(); ++f) row(std::to_string(f + 1), rep.per_step[f]);
    if (rep.h15) row("15min", *rep.h15);
    if (rep.h30) row("30min", *rep.h30);
    if (rep.h60) row("60min", *rep.h60);
    row("avg", rep.average);
}

int cmd_evaluate(CLI::App* sub, EvaluateOpts& o) {
    LoadedCheckpoint ckpt = load_checkpoint(o.checkpoint);
    TrafficDataset raw = load_dataset(o.data);
    if (raw.n_sensors() != ckpt.params.n_sensors) {
        throw ConfigError("checkpoint was trained on " + std::to_string(ckpt.params.n_sensors) +
                          " sensors but the dataset has " + std::to_string(raw.n_sensors()));
    }
    const ModelConfig& cfg = ckpt.params.cfg;
    const SplitRatio ratio = o.ratio.empty() ? default_ratio(raw.metric_kind) : parse_ratio(o.ratio);
    Pipeline p = prepare_pipeline(raw, ratio, cfg.input_len, cfg.horizon);

    const TrafficDataset& eval_orig = pick_split(p.original, o.split);
    const TrafficDataset& eval_scaled = pick_split(p.scaled, o.split);
    std::vector<Window> orig_windows = make_windows(eval_orig, cfg.input_len, cfg.horizon);
    std::vector<Window> scaled_windows = make_windows(eval_scaled, cfg.input_len, cfg.horizon);
    Array target = window_targets(orig_windows);

    // baselines run first and stay independent of the model path
    HaModel ha = fit_ha(p.original.train);
    MetricsReport ha_rep = horizon_report(target, ha_predictions(ha, eval_orig, orig_windows), raw.metric_kind);
    MetricsReport ps_rep = horizon_report(target, persistence_predictions(eval_orig, orig_windows), raw.metric_kind);

    fs::create_directories(o.out);
    std::string model_error;
    std::ostringstream text;
    std::ofstream csv(fs::path(o.out) / "metrics.csv");
    csv << "series,step,mae,mape,rmse\n";
    int exit_code = 0;
    try {
        Array pred = model_predictions(ckpt.params, p.a_r, scaled_windows, ckpt.scaler, o.batch, o.threads);
        if (!pred.all_finite()) throw NumericError("model produced non-finite predictions");
        MetricsReport model_rep = horizon_report(target, pred, raw.metric_kind);
        text << render_report_table(model_rep, "model") << "\n";
        append_csv_rows(csv, "model", model_rep);
    } catch (const NumericError& e) {
        model_error = e.what();
        exit_code = 3;
    }
    text << render_report_table(ha_rep, "ha") << "\n";
    text << render_report_table(ps_rep, "persistence");
    append_csv_rows(csv, "ha", ha_rep);
    append_csv_rows(csv, "persistence", ps_rep);
    if (!model_error.empty()) text << "\nmodel unavailable: " << model_error << "\n";

    std::ofstream txt(fs::path(o.out) / "metrics.txt");
    txt << text.str();
    std::cout << text.str();
    write_snapshot(sub, o.out);
    return exit_code;
}

// ---------------------------------------------------------------- forecast

struct ForecastOpts {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
    std::string ratio;
    std::string out;
    std::int64_t index = -1;  // -1 = last window
};

void cmd_forecast(CLI::App* sub, ForecastOpts& o) {
    LoadedCheckpoint ckpt = load_checkpoint(o.checkpoint);
    TrafficDataset raw = load_dataset(o.data);
    if (raw.n_sensors() != ckpt.params.n_sensors) {
        throw ConfigError("checkpoint was trained on " + std::to_string(ckpt.params.n_sensors) +
                          " sensors but the dataset has " + std::to_string(raw.n_sensors()));
    }
    const ModelConfig& cfg = ckpt.params.cfg;
    const SplitRatio ratio = o.ratio.empty() ? default_ratio(raw.metric_kind) : parse_ratio(o.ratio);
    Pipeline p = prepare_pipeline(raw, ratio, cfg.input_len, cfg.horizon);
    const TrafficDataset& scaled = pick_split(p.scaled, o.split);
    std::vector<Window> windows = make_windows(scaled, cfg.input_len, cfg.horizon);
    const std::int64_t count = static_cast<std::int64_t>(windows.size());
    std::int64_t index = o.index < 0 ? count - 1 : o.index;
    if (index >= count) throw ConfigError("window index " + std::to_string(index) + " out of range (0.." +
                                          std::to_string(count - 1) + ")");
    std::vector<Window> one{windows[static_cast<std::size_t>(index)]};
    Array pred = model_predictions(ckpt.params, p.a_r, one, ckpt.scaler, 1);

    fs::create_directories(o.out);
    std::ofstream os(fs::path(o.out) / "forecast.csv");
    os << "timestamp";
    for (const std::string& id : raw.sensor_ids) os << ',' << id;
    os << '\n';
    const std::int64_t t0 = one[0].origin + cfg.input_len;
    for (std::int64_t f = 0; f < cfg.horizon; ++f) {
        os << scaled.timestamps[static_cast<std::size_t>(t0 + f)];
        for (std::int64_t s = 0; s < raw.n_sensors(); ++s) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", pred.at(0, f, s));
            os << ',' << buf;
        }
        os << '\n';
    }
    write_snapshot(sub, o.out);
    std::cout << "forecast for window " << index << " of split " << o.split << " written to " << o.out << "\n";
}

// ----------------------------------------------------------------- analyze

struct AnalyzeOpts {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string pair;     // "i,j" sensor indices
    std::string scatter;  // "sensor,cx,cy"
    std::int64_t range_begin = 0;
    std::int64_t range_end = -1;
};

void cmd_analyze(CLI::App* sub, AnalyzeOpts& o) {
    LoadedCheckpoint ckpt = load_checkpoint(o.checkpoint);
    TrafficDataset raw = load_dataset(o.data);
    fs::create_directories(o.out);
    std::vector<std::string> outputs;

    const Array& e1 = ckpt.params.at("nodes.e1");
    const Array& e2 = ckpt.params.at("nodes.e2");

    nlohmann::json probe_json;
    if (raw.has_coords && raw.n_sensors() == ckpt.params.n_sensors) {
        for (bool kernels : {false, true}) {
            ProbeResult res = probe_embeddings(e1, e2, raw.coords, kernels);
            nlohmann::json r;
            r["r2"] = res.r2;
            r["r2_lon"] = res.r2_per_target[0];
            r["r2_lat"] = res.r2_per_target[1];
            r["rank_warning"] = res.rank_warning;
            r["coefficients_lon"] = res.coefficients[0];
            r["coefficients_lat"] = res.coefficients[1];
            probe_json[kernels ? "kernel" : "linear"] = r;
        }
    } else {
        probe_json["skipped"] = "dataset has no coordinates";
        std::cerr << "notice: probe skipped; the dataset carries no coordinates\n";
    }
    {
        std::ofstream os(fs::path(o.out) / "probe.json");
        os << probe_json.dump(2) << '\n';
        outputs.push_back("probe.json");
    }

    const Array a_r = build_adjacency(raw.edges, raw.n_sensors()).a_r;
    const Array a_adp = adaptive_adjacency_value(ckpt.params);
    {
        nlohmann::json sim;
        const std::optional<double> cosine = adjacency_similarity(a_r, a_adp);
        if (cosine) {
            sim["cosine_similarity"] = *cosine;
        } else {
            sim["cosine_similarity"] = nullptr;
        }
        std::ofstream os(fs::path(o.out) / "adjacency_similarity.json");
        os << sim.dump(2) << '\n';
        outputs.push_back("adjacency_similarity.json");
    }
    {
        std::ofstream os(fs::path(o.out) / "a_adp.csv");
        for (std::int64_t i = 0; i < raw.n_sensors(); ++i) {
            if (i == 0) {
                for (std::int64_t j = 0; j < raw.n_sensors(); ++j) os << (j ? "," : "") << raw.sensor_ids[static_cast<std::size_t>(j)];
                os << '\n';
            }
            for (std::int64_t j = 0; j < raw.n_sensors(); ++j) {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", a_adp.at(i, j));
                os << (j ? "," : "") << buf;
            }
            os << '\n';
        }
        outputs.push_back("a_adp.csv");
    }
    if (!o.pair.empty()) {
        std::int64_t i = 0, j = 0;
        if (std::sscanf(o.pair.c_str(), "%lld,%lld", reinterpret_cast<long long*>(&i), reinterpret_cast<long long*>(&j)) != 2) {
            throw ConfigError("--pair expects 'i,j' sensor indices");
        }
        const std::int64_t end = o.range_end < 0 ? raw.n_timesteps() : o.range_end;
        export_pair_association(raw, i, j, o.range_begin, end, (fs::path(o.out) / "pair_association.csv").string());
        outputs.push_back("pair_association.csv");
    }
    if (!o.scatter.empty()) {
        std::int64_t s = 0;
        int cx = 0, cy = 0;
        if (std::sscanf(o.scatter.c_str(), "%lld,%d,%d", reinterpret_cast<long long*>(&s), &cx, &cy) != 3) {
            throw ConfigError("--scatter expects 'sensor,channel_x,channel_y'");
        }
        export_scatter(raw, s, cx, cy, (fs::path(o.out) / "scatter.csv").string());
        outputs.push_back("scatter.csv");
    }
    write_snapshot(sub, o.out);
    outputs.push_back("resolved_config.ini");
    {
        nlohmann::json manifest;
        manifest["files"] = outputs;
        std::ofstream os(fs::path(o.out) / "analysis_manifest.json");
        os << manifest.dump(2) << '\n';
    }
    std::cout << "analysis bundle written to " << o.out << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"spatiotemporal graph traffic forecasting"};
    app.require_subcommand(1);

    GenerateOpts gen;
    CLI::App* sub_gen = app.add_subcommand("generate", "write a synthetic dataset directory");
    sub_gen->set_config("--config");
    sub_gen->add_option("--sensors", gen.synth.n_sensors, "sensor count")->capture_default_str();
    sub_gen->add_option("--days", gen.synth.days, "number of days (288 steps each)")->capture_default_str();
    sub_gen->add_option("--topology", gen.topology, "ring|grid|random")->capture_default_str();
    sub_gen->add_option("--random-p", gen.synth.random_p, "edge probability for random topology")->capture_default_str();
    sub_gen->add_option("--metric", gen.metric, "speed|flow")->capture_default_str();
    sub_gen->add_option("--base", gen.synth.base_level, "base level")->capture_default_str();
    sub_gen->add_option("--amplitude", gen.synth.amplitude, "daily swing scale")->capture_default_str();
    sub_gen->add_option("--phase-spread", gen.synth.phase_spread_minutes, "max per-sensor peak offset (minutes)")
        ->capture_default_str();
    sub_gen->add_option("--coupling-gain-min", gen.synth.coupling_gain_min)->capture_default_str();
    sub_gen->add_option("--coupling-gain-max", gen.synth.coupling_gain_max)->capture_default_str();
    sub_gen->add_option("--coupling-lag-min", gen.synth.coupling_lag_min)->capture_default_str();
    sub_gen->add_option("--coupling-lag-max", gen.synth.coupling_lag_max)->capture_default_str();
    sub_gen->add_option("--weekend-factor", gen.synth.weekend_factor)->capture_default_str();
    sub_gen->add_option("--noise-std", gen.synth.noise_std)->capture_default_str();
    sub_gen->add_option("--start-timestamp", gen.synth.start_timestamp)->capture_default_str();
    sub_gen->add_option("--seed", gen.synth.seed, "master seed")->capture_default_str();
    sub_gen->add_option("--out", gen.out, "output dataset directory")->required();
    sub_gen->add_option("--scatter-out", gen.scatter_out, "also write a metric/companion scatter CSV");

    std::string inspect_dir, inspect_out;
    CLI::App* sub_inspect = app.add_subcommand("inspect", "print dataset statistics");
    sub_inspect->set_config("--config");
    sub_inspect->add_option("data", inspect_dir, "dataset directory")->required();
    sub_inspect->add_option("--out", inspect_out, "also write summary.txt there");

    TrainOpts tr;
    CLI::App* sub_train = app.add_subcommand("train", "train a forecasting model");
    sub_train->set_config("--config");
    sub_train->add_option("--data", tr.data, "dataset directory")->required();
    sub_train->add_option("--out", tr.out, "output directory")->required();
    sub_train->add_option("--split", tr.split, "ratio like 7:1:2 (default by metric)");
    sub_train->add_option("--hidden", tr.model.d_hidden)->capture_default_str();
    sub_train->add_option("--skip-width", tr.model.d_skip)->capture_default_str();
    sub_train->add_option("--dilations", tr.dilations, "comma list, kernel 2 per layer")->capture_default_str();
    sub_train->add_option("--k-hops", tr.model.k_hops)->capture_default_str();
    sub_train->add_option("--heads", tr.model.n_heads)->capture_default_str();
    sub_train->add_option("--tau", tr.model.tau)->capture_default_str();
    sub_train->add_option("--embed-dim", tr.model.d_embed)->capture_default_str();
    sub_train->add_flag("--mask-nonedges", tr.model.mask_nonedges, "drop non-edges from physical attention");
    sub_train->add_option("--input-len", tr.model.input_len)->capture_default_str();
    sub_train->add_option("--horizon", tr.model.horizon)->capture_default_str();
    sub_train->add_option("--epochs", tr.train.epochs)->capture_default_str();
    sub_train->add_option("--batch", tr.train.batch_size)->capture_default_str();
    sub_train->add_option("--lr", tr.train.lr0)->capture_default_str();
    sub_train->add_option("--weight-decay", tr.train.weight_decay)->capture_default_str();
    sub_train->add_option("--lr-decay", tr.train.lr_decay)->capture_default_str();
    sub_train->add_option("--clip", tr.train.clip_norm)->capture_default_str();
    sub_train->add_option("--p-occlude", tr.augment.p_occlude)->capture_default_str();
    sub_train->add_option("--occlude-scale", tr.augment.occlude_scale)->capture_default_str();
    sub_train->add_option("--p-permute", tr.augment.p_permute)->capture_default_str();
    sub_train->add_option("--noise-scale", tr.augment.noise_scale)->capture_default_str();
    sub_train->add_option("--ablation", tr.ablation,
                          "none|no-occlusion|no-permutation|no-noise|no-node-embeddings|single-head|gcn")
        ->capture_default_str();
    sub_train->add_option("--seed", tr.seed, "master seed")->capture_default_str();
    sub_train->add_flag("--timing", tr.timing, "record wall time in history.csv (breaks byte reproducibility)");

    EvaluateOpts ev;
    CLI::App* sub_eval = app.add_subcommand("evaluate", "score a checkpoint plus baselines on a split");
    sub_eval->set_config("--config");
    sub_eval->add_option("--checkpoint", ev.checkpoint)->required();
    sub_eval->add_option("--data", ev.data)->required();
    sub_eval->add_option("--split", ev.split, "train|val|test")->capture_default_str();
    sub_eval->add_option("--split-ratio", ev.ratio, "ratio like 7:1:2 (default by metric)");
    sub_eval->add_option("--out", ev.out)->required();
    sub_eval->add_option("--batch", ev.batch)->capture_default_str();
    sub_eval->add_option("--threads", ev.threads)->capture_default_str();

    ForecastOpts fc;
    CLI::App* sub_fore = app.add_subcommand("forecast", "emit one forecast window as CSV");
    sub_fore->set_config("--config");
    sub_fore->add_option("--checkpoint", fc.checkpoint)->required();
    sub_fore->add_option("--data", fc.data)->required();
    sub_fore->add_option("--split", fc.split)->capture_default_str();
    sub_fore->add_option("--split-ratio", fc.ratio, "ratio like 7:1:2 (default by metric)");
    sub_fore->add_option("--window", fc.index, "window index within the split (default last)");
    sub_fore->add_option("--out", fc.out)->required();

    AnalyzeOpts an;
    CLI::App* sub_an = app.add_subcommand("analyze", "probe embeddings and export analysis artifacts");
    sub_an->set_config("--config");
    sub_an->add_option("--checkpoint", an.checkpoint)->required();
    sub_an->add_option("--data", an.data)->required();
    sub_an->add_option("--out", an.out)->required();
    sub_an->add_option("--pair", an.pair, "sensor pair 'i,j' for an association export");
    sub_an->add_option("--scatter", an.scatter, "scatter export 'sensor,channel_x,channel_y'");
    sub_an->add_option("--range-begin", an.range_begin)->capture_default_str();
    sub_an->add_option("--range-end", an.range_end, "-1 = end of data")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (sub_gen->parsed()) {
            cmd_generate(sub_gen, gen);
            return 0;
        }
        if (sub_inspect->parsed()) {
            cmd_inspect(sub_inspect, inspect_dir, inspect_out);
            return 0;
        }
        if (sub_train->parsed()) return cmd_train(sub_train, tr);
        if (sub_eval->parsed()) return cmd_evaluate(sub_eval, ev);
        if (sub_fore->parsed()) {
            cmd_forecast(sub_fore, fc);
            return 0;
        }
        if (sub_an->parsed()) {
            cmd_analyze(sub_an, an);
            return 0;
        }
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace gswan
