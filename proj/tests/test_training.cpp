#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gswan/errors.hpp"
#include "gswan/synthetic.hpp"
#include "gswan/training.hpp"
#include "test_util.hpp"

using namespace gswan;
using diff::Tape;
using diff::Var;
using gswan::testutil::random_array;

TEST_CASE("mae loss values and symmetry") {
    Tape t;
    Var a = t.leaf(Array(Shape{2}, std::vector<double>{1.0, 5.0}));
    Var b = t.leaf(Array(Shape{2}, std::vector<double>{2.0, 4.0}));
    CHECK(mae_loss(a, b).value()[0] == doctest::Approx(1.0));
    CHECK(mae_loss(b, a).value()[0] == doctest::Approx(1.0));
    CHECK(mae_loss(a, a).value()[0] == 0.0);
    Var c = t.leaf(Array(Shape{3}));
    CHECK_THROWS_AS(mae_loss(a, c), std::invalid_argument);
}

TEST_CASE("gradient clipping scales to the target norm") {
    std::vector<Array> g;
    g.push_back(Array(Shape{2}, std::vector<double>{1.2, 1.6}));  // norm 2
    const double before = clip_gradients(g, 3.0);
    CHECK(before == doctest::Approx(2.0));
    CHECK(g[0][0] == doctest::Approx(1.2));

    std::vector<Array> big;
    big.push_back(Array(Shape{1}, std::vector<double>{6.0}));
    const double n6 = clip_gradients(big, 3.0);
    CHECK(n6 == doctest::Approx(6.0));
    CHECK(big[0][0] == doctest::Approx(3.0));
    double after = 0.0;
    for (std::int64_t i = 0; i < big[0].size(); ++i) after += big[0][i] * big[0][i];
    CHECK(std::sqrt(after) <= 3.0 + 1e-9);

    std::vector<Array> zero;
    zero.push_back(Array(Shape{4}));
    clip_gradients(zero, 3.0);
    for (std::int64_t i = 0; i < 4; ++i) CHECK(zero[0][i] == 0.0);

    std::vector<Array> bad;
    bad.push_back(Array(Shape{1}, std::vector<double>{std::numeric_limits<double>::quiet_NaN()}));
    CHECK_THROWS_AS(clip_gradients(bad, 3.0), NumericError);
}

TEST_CASE("global clipped norm is bounded over random draws") {
    Rng rng(71);
    for (int it = 0; it < 200; ++it) {
        std::vector<Array> g;
        const int parts = 1 + static_cast<int>(rng.uniform_int(4));
        for (int p = 0; p < parts; ++p) g.push_back(random_array(Shape{1 + static_cast<std::int64_t>(rng.uniform_int(6))}, rng, -9.0, 9.0));
        clip_gradients(g, 3.0);
        double sq = 0.0;
        for (const Array& a : g)
            for (std::int64_t i = 0; i < a.size(); ++i) sq += a[i] * a[i];
        CHECK(std::sqrt(sq) <= 3.0 + 1e-9);
    }
}

namespace {

ModelParams scalar_param(double value) {
    ModelParams p;
    p.cfg = ModelConfig{};
    p.n_sensors = 1;
    p.params.push_back({"w", Array(Shape{1}, std::vector<double>{value})});
    p.rebuild_index();
    return p;
}

}  // namespace

TEST_CASE("adamw decoupled decay and hand recursion") {
    TrainConfig cfg;
    cfg.lr0 = 0.1;

    // zero gradient, zero decay: parameters unchanged
    {
        TrainConfig c0 = cfg;
        c0.weight_decay = 0.0;
        ModelParams p = scalar_param(1.5);
        AdamState st = init_adam(p);
        adamw_step(p, {Array(Shape{1})}, st, c0, 0.1);
        CHECK(p.at("w")[0] == doctest::Approx(1.5));
    }
    // zero gradient, positive decay: exactly p*(1 - lr*wd)
    {
        TrainConfig c1 = cfg;
        c1.weight_decay = 1e-2;
        ModelParams p = scalar_param(2.0);
        AdamState st = init_adam(p);
        adamw_step(p, {Array(Shape{1})}, st, c1, 0.1);
        CHECK(p.at("w")[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 1e-2)).epsilon(1e-15));
    }
    // hand-evaluated recursion over three steps on p=1, g=1
    {
        TrainConfig c2 = cfg;
        c2.weight_decay = 1e-4;
        ModelParams p = scalar_param(1.0);
        AdamState st = init_adam(p);
        double w = 1.0, m = 0.0, v = 0.0;
        for (int step = 1; step <= 3; ++step) {
            adamw_step(p, {Array(Shape{1}, 1.0)}, st, c2, 0.1);
            w *= 1.0 - 0.1 * 1e-4;
            m = 0.9 * m + 0.1 * 1.0;
            v = 0.999 * v + 0.001 * 1.0;
            const double mh = m / (1.0 - std::pow(0.9, step));
            const double vh = v / (1.0 - std::pow(0.999, step));
            w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
            CHECK(p.at("w")[0] == doctest::Approx(w).epsilon(1e-14));
            if (step == 1) CHECK(p.at("w")[0] == doctest::Approx(0.9).epsilon(2e-4));
        }
    }
}

TEST_CASE("learning rate schedule") {
    TrainConfig cfg;
    cfg.lr0 = 1e-3;
    CHECK(lr_at(0, cfg) == doctest::Approx(1e-3));
    CHECK(lr_at(1, cfg) == doctest::Approx(0.97e-3));
    CHECK(lr_at(10, cfg) == doctest::Approx(7.374e-4).epsilon(1e-4));
    // strictly decreasing for decay < 1
    for (int e = 0; e < 20; ++e) CHECK(lr_at(e + 1, cfg) < lr_at(e, cfg));
    CHECK_THROWS_AS(lr_at(-1, cfg), std::invalid_argument);
}

namespace {

struct Pipeline {
    TrainData data;
    ModelParams params;
    AugmentConfig acfg;
    TrainConfig tcfg;
};

Pipeline desk_pipeline(std::uint64_t seed, std::int64_t epochs, double lr0 = 2e-3) {
    SynthConfig scfg;
    scfg.n_sensors = 4;
    scfg.days = 2;
    scfg.phase_spread_minutes = 60.0;
    scfg.coupling_gain_min = 0.1;
    scfg.coupling_gain_max = 0.3;
    scfg.noise_std = 0.5;
    scfg.seed = seed;
    const std::vector<Edge> edges = generate_graph(scfg);
    TrafficDataset raw = generate_traffic(scfg, edges);
    Splits sp = split_temporal(raw, SplitRatio{7, 1, 2}, 12, 12);
    Scaler scaler = fit_scaler(sp.train);
    TrafficDataset train = apply_scaler(scaler, sp.train, ScaleDir::Forward);
    TrafficDataset val = apply_scaler(scaler, sp.val, ScaleDir::Forward);

    Pipeline p;
    p.data.train_windows = make_windows(train, 12, 12);
    p.data.val_windows = make_windows(val, 12, 12);
    p.data.a_r = build_adjacency(edges, scfg.n_sensors).a_r;
    p.data.scaler = scaler;

    ModelConfig mcfg;
    mcfg.d_hidden = 4;
    mcfg.d_skip = 8;
    mcfg.dilations = {1, 2, 4, 4};
    mcfg.n_heads = 2;
    mcfg.d_embed = 4;
    mcfg.k_hops = 1;
    p.params = init_model(mcfg, scfg.n_sensors, seed);

    p.tcfg.batch_size = 32;
    p.tcfg.epochs = epochs;
    p.tcfg.lr0 = lr0;
    p.tcfg.seed = seed;
    p.acfg.seed = seed + 1;
    return p;
}

}  // namespace

TEST_CASE("training histories are reproducible and track the best epoch") {
    Pipeline p1 = desk_pipeline(3, 3);
    Pipeline p2 = desk_pipeline(3, 3);
    TrainResult r1 = train(p1.params, p1.data, p1.tcfg, p1.acfg);
    TrainResult r2 = train(p2.params, p2.data, p2.tcfg, p2.acfg);
    REQUIRE(r1.history.epochs.size() == 3);
    REQUIRE(r2.history.epochs.size() == 3);
    for (std::size_t e = 0; e < 3; ++e) {
        CHECK(r1.history.epochs[e].train_loss == r2.history.epochs[e].train_loss);
        CHECK(r1.history.epochs[e].val_mae == r2.history.epochs[e].val_mae);
        CHECK(r1.history.epochs[e].val_rmse == r2.history.epochs[e].val_rmse);
    }
    // best epoch holds the minimum validation MAE
    double best = 1e300;
    for (const EpochRecord& r : r1.history.epochs) best = std::min(best, r.val_mae);
    CHECK(r1.history.best_val_mae == doctest::Approx(best));
    CHECK(r1.history.best_epoch >= 0);

    // the saved best parameters reproduce the recorded validation MAE
    Array pred = model_predictions(r1.best, p1.data.a_r, p1.data.val_windows, p1.data.scaler, 32);
    Array target = window_targets(p1.data.val_windows);
    for (std::int64_t i = 0; i < target.size(); ++i) target[i] = inverse_metric(p1.data.scaler, target[i]);
    MetricsReport rep = horizon_report(target, pred, MetricKind::Speed);
    CHECK(rep.average.mae == doctest::Approx(r1.history.best_val_mae).epsilon(1e-12));
}

TEST_CASE("validation runs clean: eval-mode batch norm, no augmentation") {
    Pipeline p = desk_pipeline(4, 2);
    p.acfg.noise_scale = 50.0;  // absurd augmentation must not leak into validation
    p.acfg.p_occlude = 1.0;
    TrainResult r = train(p.params, p.data, p.tcfg, p.acfg);

    // recomputing validation metrics on the final params matches the last row
    Array pred = model_predictions(r.final, p.data.a_r, p.data.val_windows, p.data.scaler, 32);
    Array target = window_targets(p.data.val_windows);
    for (std::int64_t i = 0; i < target.size(); ++i) target[i] = inverse_metric(p.data.scaler, target[i]);
    MetricsReport rep = horizon_report(target, pred, MetricKind::Speed);
    CHECK(rep.average.mae == doctest::Approx(r.history.epochs.back().val_mae).epsilon(1e-12));

    // an evaluation pass must not move the running statistics
    ModelParams probe = r.final;
    const std::vector<diff::BatchNormState> before = probe.bn_states;
    model_predictions(probe, p.data.a_r, p.data.val_windows, p.data.scaler, 32);
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(bit_equal(probe.bn_states[i].running_mean, before[i].running_mean));
        CHECK(bit_equal(probe.bn_states[i].running_var, before[i].running_var));
    }
}

TEST_CASE("training loss falls on a learnable desk-scale task") {
    Pipeline p = desk_pipeline(5, 14, 5e-3);
    p.acfg.p_occlude = 0.0;
    p.acfg.p_permute = 0.0;
    p.acfg.noise_scale = 0.0;
    TrainResult r = train(p.params, p.data, p.tcfg, p.acfg);
    REQUIRE_FALSE(r.history.diverged);
    CHECK(r.history.epochs.back().train_loss < 0.6 * r.history.epochs.front().train_loss);
}

TEST_CASE("divergent training aborts with the last good parameters") {
    Pipeline p = desk_pipeline(6, 8, 1e18);
    TrainResult r = train(p.params, p.data, p.tcfg, p.acfg);
    CHECK(r.history.diverged);
    CHECK_FALSE(r.history.note.empty());
    for (const ParamEntry& e : r.best.params) CHECK(e.value.all_finite());
}

TEST_CASE("history csv layout") {
    TrainHistory h;
    EpochRecord r;
    r.epoch = 0;
    r.train_loss = 1.25;
    r.val_mae = 2.5;
    r.val_mape = 10.0;
    r.val_rmse = 3.0;
    r.lr = 1e-3;
    r.seconds = 0.125;
    h.epochs.push_back(r);
    gswan::testutil::TempDir tmp("hist");
    const std::string path = (tmp.path / "history.csv").string();
    write_history_csv(h, path, false);
    const std::string body = gswan::testutil::read_file(path);
    CHECK(body.find("epoch,train_loss,val_mae,val_mape,val_rmse,lr,seconds") != std::string::npos);
    CHECK(body.find("0,1.25,2.5,10,3,0.001") != std::string::npos);
    CHECK(body.find("0.000") != std::string::npos);  // timing suppressed

    write_history_csv(h, path, true);
    const std::string timed = gswan::testutil::read_file(path);
    CHECK(timed.find("0.125") != std::string::npos);
}
