#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "gswan/errors.hpp"
#include "gswan/evaluation.hpp"
#include "gswan/synthetic.hpp"
#include "test_util.hpp"

using namespace gswan;
using gswan::testutil::TempDir;
using gswan::testutil::random_array;

TEST_CASE("compute_metrics hand values and degenerate cases") {
    Array y(Shape{2}, std::vector<double>{2.0, 4.0});
    Array h(Shape{2}, std::vector<double>{1.0, 5.0});
    StepMetrics m = compute_metrics(y, h);
    CHECK(m.mae == doctest::Approx(1.0));
    CHECK(m.rmse == doctest::Approx(1.0));
    REQUIRE(m.mape.has_value());
    CHECK(*m.mape == doctest::Approx(37.5));

    StepMetrics zero = compute_metrics(y, y);
    CHECK(zero.mae == 0.0);
    CHECK(zero.rmse == 0.0);
    CHECK(*zero.mape == 0.0);

    Array z(Shape{3});
    StepMetrics undef = compute_metrics(z, Array(Shape{3}, 1.0));
    CHECK_FALSE(undef.mape.has_value());
    CHECK(undef.mae == doctest::Approx(1.0));

    CHECK_THROWS_AS(compute_metrics(y, z), std::invalid_argument);
}

TEST_CASE("RMSE dominates MAE and the zero-target rule only affects MAPE") {
    Rng rng(61);
    const Array y = random_array(Shape{500}, rng, 1.0, 50.0);
    const Array h = random_array(Shape{500}, rng, 1.0, 50.0);
    StepMetrics m = compute_metrics(y, h);
    CHECK(m.rmse >= m.mae);

    // append one zero-target entry: MAPE identical, MAE/RMSE move
    Array y2(Shape{501}), h2(Shape{501});
    for (std::int64_t i = 0; i < 500; ++i) {
        y2[i] = y[i];
        h2[i] = h[i];
    }
    y2[500] = 0.0;
    h2[500] = 123.0;
    StepMetrics m2 = compute_metrics(y2, h2);
    CHECK(*m2.mape == doctest::Approx(*m.mape).epsilon(1e-15));
    CHECK(m2.mae != doctest::Approx(m.mae));
    CHECK(m2.rmse > m.rmse);
}

TEST_CASE("compute_metrics matches a compensated streaming oracle on 1e6 entries") {
    Rng rng(62);
    const std::int64_t n = 1000000;
    Array y(Shape{n}), h(Shape{n});
    for (std::int64_t i = 0; i < n; ++i) {
        y[i] = rng.uniform01() < 0.01 ? 0.0 : rng.uniform(-80.0, 80.0);
        h[i] = rng.uniform(-80.0, 80.0);
    }
    // single-pass Kahan-compensated accumulators
    double abs_s = 0.0, abs_c = 0.0, sq_s = 0.0, sq_c = 0.0, pct_s = 0.0, pct_c = 0.0;
    std::int64_t pct_n = 0;
    auto kahan = [](double& sum, double& comp, double x) {
        const double t = sum + x;
        if (std::fabs(sum) >= std::fabs(x)) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    };
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = y[i] - h[i];
        kahan(abs_s, abs_c, std::fabs(d));
        kahan(sq_s, sq_c, d * d);
        if (y[i] != 0.0) {
            kahan(pct_s, pct_c, std::fabs(d / y[i]));
            ++pct_n;
        }
    }
    const double mae = (abs_s + abs_c) / static_cast<double>(n);
    const double rmse = std::sqrt((sq_s + sq_c) / static_cast<double>(n));
    const double mape = 100.0 * (pct_s + pct_c) / static_cast<double>(pct_n);

    StepMetrics m = compute_metrics(y, h);
    CHECK(std::fabs(m.mae - mae) < 1e-9);
    CHECK(std::fabs(m.rmse - rmse) < 1e-9);
    CHECK(std::fabs(*m.mape - mape) < 1e-9);
}

TEST_CASE("horizon report aggregates per-step metrics") {
    Rng rng(63);
    const std::int64_t B = 40, F = 12, N = 5;
    Array y = random_array(Shape{B, F, N}, rng, 10.0, 70.0);
    Array h = y;
    for (std::int64_t i = 0; i < h.size(); ++i) h[i] += rng.uniform(-3.0, 3.0);
    MetricsReport rep = horizon_report(y, h, MetricKind::Speed);
    REQUIRE(rep.per_step.size() == 12);
    REQUIRE(rep.h15.has_value());
    CHECK(rep.h15->mae == rep.per_step[2].mae);
    CHECK(rep.h30->mae == rep.per_step[5].mae);
    CHECK(rep.h60->mae == rep.per_step[11].mae);
    double mean = 0.0;
    for (const StepMetrics& s : rep.per_step) mean += s.mae;
    mean /= 12.0;
    CHECK(std::fabs(rep.average.mae - mean) < 1e-12);

    // identical per-step errors: the average equals every step
    Array h2 = y;
    for (std::int64_t i = 0; i < h2.size(); ++i) h2[i] += 2.0;
    MetricsReport rep2 = horizon_report(y, h2, MetricKind::Flow);
    for (const StepMetrics& s : rep2.per_step) CHECK(s.mae == doctest::Approx(rep2.average.mae).epsilon(1e-12));

    const std::string table = render_report_table(rep, "model");
    CHECK(table.find("15min") != std::string::npos);
    CHECK(table.find("avg") != std::string::npos);
}

namespace {

TrafficDataset planted_series(std::int64_t n_sensors, std::int64_t days,
                              const std::function<double(std::int64_t sensor, std::int64_t t)>& f) {
    TrafficDataset d;
    const std::int64_t k = days * 288;
    d.values = Array(Shape{2, n_sensors, k});
    d.timestamps.resize(static_cast<std::size_t>(k));
    for (std::int64_t t = 0; t < k; ++t) {
        const std::int64_t ts = 1514764800 + 300 * t;
        d.timestamps[static_cast<std::size_t>(t)] = ts;
        for (std::int64_t s = 0; s < n_sensors; ++s) {
            d.values.at(0, s, t) = f(s, t);
            d.values.at(1, s, t) = time_of_day_fraction(ts);
        }
    }
    for (std::int64_t s = 0; s < n_sensors; ++s) d.sensor_ids.push_back("s" + std::to_string(s));
    return d;
}

}  // namespace

TEST_CASE("historical average takes the slot mean and ignores the horizon") {
    // two training days with slot values 10 and 14 -> prediction 12
    TrafficDataset train2 = planted_series(1, 2, [](std::int64_t, std::int64_t t) { return t < 288 ? 10.0 : 14.0; });
    HaModel ha = fit_ha(train2);
    CHECK(ha.slot_mean.at(0, 0) == doctest::Approx(12.0));
    CHECK(ha.slot_mean.at(0, 100) == doctest::Approx(12.0));

    TrafficDataset test = planted_series(1, 1, [](std::int64_t, std::int64_t) { return 11.0; });
    std::vector<Window> windows = make_windows(test, 12, 12);
    Array pred = ha_predictions(ha, test, windows);
    // same prediction at every horizon step for a fixed slot mean
    for (std::int64_t w = 0; w < pred.extent(0); ++w)
        for (std::int64_t f = 0; f < 12; ++f) CHECK(pred.at(w, f, 0) == doctest::Approx(12.0));
}

TEST_CASE("historical average is exact on a daily-periodic series") {
    SynthConfig cfg;
    cfg.n_sensors = 4;
    cfg.days = 4;
    cfg.noise_std = 0.0;
    cfg.phase_spread_minutes = 0.0;
    cfg.weekend_factor = 1.0;
    cfg.seed = 5;
    const std::vector<Edge> edges = generate_graph(cfg);
    TrafficDataset d = generate_traffic(cfg, edges);
    Splits sp = split_temporal(d, SplitRatio{2, 1, 1}, 12, 12);
    HaModel ha = fit_ha(sp.train);
    std::vector<Window> windows = make_windows(sp.test, 12, 12);
    Array pred = ha_predictions(ha, sp.test, windows);
    Array target = window_targets(windows);
    bool exact = true;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        if (pred[i] != target[i]) exact = false;
    }
    CHECK(exact);  // test MAE is exactly zero
}

TEST_CASE("persistence repeats the last value and scores 6.5 on a unit ramp") {
    TrafficDataset constant = planted_series(2, 1, [](std::int64_t, std::int64_t) { return 42.0; });
    std::vector<Window> cw = make_windows(constant, 12, 12);
    Array cp = persistence_predictions(constant, cw);
    Array ct = window_targets(cw);
    CHECK(max_abs_diff(cp, ct) == 0.0);
    CHECK(cp.shape() == ct.shape());

    TrafficDataset ramp = planted_series(1, 1, [](std::int64_t, std::int64_t t) { return static_cast<double>(t); });
    std::vector<Window> rw = make_windows(ramp, 12, 12);
    Array rp = persistence_predictions(ramp, rw);
    Array rt = window_targets(rw);
    StepMetrics m = compute_metrics(rt, rp);
    CHECK(std::fabs(m.mae - 6.5) <= 1e-9);
}

TEST_CASE("probe recovers a planted linear map and rejects noise") {
    Rng rng(64);
    const std::int64_t n = 60, d = 4;
    const Array e1 = random_array(Shape{n, d}, rng);
    const Array e2 = random_array(Shape{n, d}, rng);
    std::vector<double> wlon(static_cast<std::size_t>(2 * d)), wlat(static_cast<std::size_t>(2 * d));
    for (auto* w : {&wlon, &wlat})
        for (double& v : *w) v = rng.uniform(-2.0, 2.0);
    std::vector<std::array<double, 2>> coords(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        double lon = 0.25, lat = -1.5;
        for (std::int64_t j = 0; j < d; ++j) {
            lon += wlon[static_cast<std::size_t>(j)] * e1.at(i, j) + wlon[static_cast<std::size_t>(d + j)] * e2.at(i, j);
            lat += wlat[static_cast<std::size_t>(j)] * e1.at(i, j) + wlat[static_cast<std::size_t>(d + j)] * e2.at(i, j);
        }
        coords[static_cast<std::size_t>(i)] = {lon, lat};
    }
    ProbeResult planted = probe_embeddings(e1, e2, coords, false);
    CHECK(planted.r2 > 0.999);
    ProbeResult planted_k = probe_embeddings(e1, e2, coords, true);
    CHECK(planted_k.r2 > 0.999);

    // independent random features stay at chance level
    const std::int64_t big = 325, dd = 10;
    const Array r1 = random_array(Shape{big, dd}, rng);
    const Array r2 = random_array(Shape{big, dd}, rng);
    std::vector<std::array<double, 2>> rc(static_cast<std::size_t>(big));
    for (auto& c : rc) c = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    ProbeResult chance = probe_embeddings(r1, r2, rc, false);
    CHECK(chance.r2 < 0.3);

    // constant coordinates: zero total variance, R^2 reported as 0
    std::vector<std::array<double, 2>> flat(static_cast<std::size_t>(n), {3.0, -2.0});
    ProbeResult degenerate = probe_embeddings(e1, e2, flat, false);
    CHECK(degenerate.r2 == 0.0);
}

TEST_CASE("trigonometric kernels recover a nonlinear planted map") {
    Rng rng(65);
    const std::int64_t n = 80, d = 3;
    const Array e1 = random_array(Shape{n, d}, rng, -1.5, 1.5);
    const Array e2 = random_array(Shape{n, d}, rng, -1.5, 1.5);
    std::vector<std::array<double, 2>> coords(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        coords[static_cast<std::size_t>(i)] = {std::sin(e1.at(i, 0)) + 0.5 * std::cos(e2.at(i, 1)),
                                               std::cos(e1.at(i, 2)) - 0.25 * std::sin(e2.at(i, 0))};
    }
    ProbeResult linear = probe_embeddings(e1, e2, coords, false);
    ProbeResult kernel = probe_embeddings(e1, e2, coords, true);
    CHECK(kernel.r2 > 0.999);
    CHECK(kernel.r2 > linear.r2);
}

TEST_CASE("adjacency similarity matches a hand oracle") {
    Rng rng(66);
    Array a = random_array(Shape{6, 6}, rng, 0.0, 1.0);
    CHECK(*adjacency_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    Array b(Shape{6, 6});
    b.at(0, 1) = 0.7;  // support disjoint from the diagonal
    Array diag(Shape{6, 6});
    for (std::int64_t i = 0; i < 6; ++i) diag.at(i, i) = 1.0;
    CHECK(*adjacency_similarity(b, diag) == doctest::Approx(0.0));

    CHECK_FALSE(adjacency_similarity(Array(Shape{3, 3}), Array(Shape{3, 3}, 1.0)).has_value());

    // hand oracle on random matrices
    const Array a5 = random_array(Shape{5, 5}, rng);
    const Array c = random_array(Shape{5, 5}, rng);
    double dot = 0.0, na = 0.0, nc = 0.0;
    for (std::int64_t i = 0; i < 25; ++i) {
        dot += a5[i] * c[i];
        na += a5[i] * a5[i];
        nc += c[i] * c[i];
    }
    CHECK(std::fabs(*adjacency_similarity(a5, c) - dot / (std::sqrt(na) * std::sqrt(nc))) < 1e-12);
}

TEST_CASE("scatter export and the flow-speed association") {
    SynthConfig cfg;
    cfg.n_sensors = 3;
    cfg.days = 3;
    cfg.metric = MetricKind::Flow;
    cfg.base_level = 200.0;
    cfg.amplitude = 120.0;
    cfg.noise_std = 5.0;
    cfg.with_companion = true;
    cfg.seed = 9;
    TrafficDataset d = generate_traffic(cfg, generate_graph(cfg));
    REQUIRE(d.n_channels() == 3);

    TempDir tmp("scatter");
    const std::string path = (tmp.path / "scatter.csv").string();
    export_scatter(d, 1, 0, 2, path);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "timestamp,x,y");
    std::int64_t rows = 0;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string ts, xs, ys;
        std::getline(ls, ts, ',');
        std::getline(ls, xs, ',');
        std::getline(ls, ys, ',');
        const double x = std::stod(xs), y = std::stod(ys);
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
        ++rows;
    }
    CHECK(rows == d.n_timesteps());
    const double nn = static_cast<double>(rows);
    const double corr = (sxy - sx * sy / nn) / std::sqrt((sxx - sx * sx / nn) * (syy - sy * sy / nn));
    CHECK(corr < -0.5);  // inverse flow-speed coupling

    // a two-channel dataset cannot produce a channel-2 scatter
    cfg.with_companion = false;
    TrafficDataset d2 = generate_traffic(cfg, generate_graph(cfg));
    CHECK_THROWS_AS(export_scatter(d2, 0, 0, 2, path), std::invalid_argument);
}

TEST_CASE("pair association export classifies weekdays") {
    SynthConfig cfg;
    cfg.n_sensors = 2;
    cfg.days = 7;  // Monday start: indices 5,6 are the weekend
    cfg.seed = 10;
    TrafficDataset d = generate_traffic(cfg, generate_graph(cfg));
    TempDir tmp("pair");
    const std::string path = (tmp.path / "pair.csv").string();
    export_pair_association(d, 0, 1, 100, 200, path);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "timestamp,value_i,value_j,day_class");
    std::int64_t rows = 0;
    while (std::getline(is, line)) {
        CHECK(line.find("weekday") != std::string::npos);  // day 0 is a Monday
        ++rows;
    }
    CHECK(rows == 100);

    // Saturday block
    export_pair_association(d, 0, 1, 5 * 288 + 10, 5 * 288 + 20, path);
    std::ifstream is2(path);
    std::getline(is2, line);
    while (std::getline(is2, line)) CHECK(line.find("weekend") != std::string::npos);

    // empty range: header only
    export_pair_association(d, 0, 1, 50, 50, path);
    std::ifstream is3(path);
    std::getline(is3, line);
    CHECK(line == "timestamp,value_i,value_j,day_class");
    CHECK_FALSE(std::getline(is3, line));
}

TEST_CASE("threaded evaluation is bit-identical to single-threaded") {
    SynthConfig cfg;
    cfg.n_sensors = 4;
    cfg.days = 3;
    cfg.noise_std = 1.0;
    cfg.phase_spread_minutes = 30.0;
    cfg.seed = 77;
    const std::vector<Edge> edges = generate_graph(cfg);
    TrafficDataset raw = generate_traffic(cfg, edges);
    Splits sp = split_temporal(raw, SplitRatio{6, 2, 2}, 12, 12);
    Scaler scaler = fit_scaler(sp.train);
    TrafficDataset scaled = apply_scaler(scaler, sp.test, ScaleDir::Forward);
    std::vector<Window> windows = make_windows(scaled, 12, 12);

    ModelConfig mcfg;
    mcfg.d_hidden = 4;
    mcfg.d_skip = 8;
    mcfg.dilations = {1, 2, 4, 4};
    mcfg.n_heads = 1;
    mcfg.d_embed = 3;
    mcfg.k_hops = 1;
    ModelParams params = init_model(mcfg, 4, 5);
    const Array a_r = build_adjacency(edges, 4).a_r;

    Array one = model_predictions(params, a_r, windows, scaler, 16, 1);
    Array many = model_predictions(params, a_r, windows, scaler, 16, 3);
    CHECK(bit_equal(one, many));
}

TEST_CASE("historical average errs on non-periodic data") {
    SynthConfig cfg;
    cfg.n_sensors = 3;
    cfg.days = 4;
    cfg.noise_std = 2.0;  // breaks day-to-day stationarity
    cfg.seed = 78;
    TrafficDataset d = generate_traffic(cfg, generate_graph(cfg));
    Splits sp = split_temporal(d, SplitRatio{2, 1, 1}, 12, 12);
    HaModel ha = fit_ha(sp.train);
    std::vector<Window> windows = make_windows(sp.test, 12, 12);
    const StepMetrics m = compute_metrics(window_targets(windows), ha_predictions(ha, sp.test, windows));
    CHECK(m.mae > 0.1);
}
