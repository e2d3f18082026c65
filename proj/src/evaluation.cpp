#include "gswan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "gswan/errors.hpp"

namespace gswan {

StepMetrics compute_metrics(const Array& y, const Array& h) {
    if (!y.same_shape(h)) {
        throw std::invalid_argument("compute_metrics: shape mismatch " + y.shape().str() + " vs " + h.shape().str());
    }
    StepMetrics m;
    const std::int64_t n = y.size();
    if (n == 0) return m;
    double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
    std::int64_t pct_count = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = y[i] - h[i];
        abs_sum += std::fabs(d);
        sq_sum += d * d;
        if (y[i] != 0.0) {
            pct_sum += std::fabs(d / y[i]);
            ++pct_count;
        }
    }
    m.mae = abs_sum / static_cast<double>(n);
    m.rmse = std::sqrt(sq_sum / static_cast<double>(n));
    if (pct_count > 0) m.mape = 100.0 * pct_sum / static_cast<double>(pct_count);
    return m;
}

MetricsReport horizon_report(const Array& y, const Array& h, MetricKind kind) {
    if (!y.same_shape(h) || y.rank() != 3) {
        throw std::invalid_argument("horizon_report: expected matching [B,F,N] arrays, got " + y.shape().str() + " and " +
                                    h.shape().str());
    }
    const std::int64_t B = y.extent(0), F = y.extent(1), N = y.extent(2);
    MetricsReport rep;
    rep.metric_kind = kind;
    for (std::int64_t f = 0; f < F; ++f) {
        Array ys(Shape{B, N}), hs(Shape{B, N});
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t s = 0; s < N; ++s) {
                ys.at(b, s) = y.at(b, f, s);
                hs.at(b, s) = h.at(b, f, s);
            }
        rep.per_step.push_back(compute_metrics(ys, hs));
    }
    auto pick = [&](std::int64_t step) -> std::optional<StepMetrics> {
        if (step <= F) return rep.per_step[static_cast<std::size_t>(step - 1)];
        return std::nullopt;
    };
    rep.h15 = pick(3);
    rep.h30 = pick(6);
    rep.h60 = pick(12);
    double mae = 0.0, rmse = 0.0, mape = 0.0;
    std::int64_t mape_n = 0;
    for (const StepMetrics& s : rep.per_step) {
        mae += s.mae;
        rmse += s.rmse;
        if (s.mape) {
            mape += *s.mape;
            ++mape_n;
        }
    }
    rep.average.mae = mae / static_cast<double>(F);
    rep.average.rmse = rmse / static_cast<double>(F);
    if (mape_n > 0) rep.average.mape = mape / static_cast<double>(mape_n);
    return rep;
}

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%10.4f", v);
    return buf;
}

std::string fmt(const std::optional<double>& v) {
    if (!v) return "       n/a";
    return fmt(*v);
}

}  // namespace

std::string render_report_table(const MetricsReport& report, const std::string& label) {
    std::ostringstream os;
    os << label << " (" << metric_kind_name(report.metric_kind) << ")\n";
    os << "  step        MAE       MAPE%      RMSE\n";
    for (std::size_t f = 0; f < report.per_step.size(); ++f) {
        const StepMetrics& s = report.per_step[f];
        char head[16];
        std::snprintf(head, sizeof(head), "  %4zu  ", f + 1);
        os << head << fmt(s.mae) << " " << fmt(s.mape) << " " << fmt(s.rmse) << "\n";
    }
    auto agg = [&](const char* name, const std::optional<StepMetrics>& s) {
        if (!s) return;
        os << "  " << name << " " << fmt(s->mae) << " " << fmt(s->mape) << " " << fmt(s->rmse) << "\n";
    };
    agg("15min", report.h15);
    agg("30min", report.h30);
    agg("60min", report.h60);
    os << "  avg   " << fmt(report.average.mae) << " " << fmt(report.average.mape) << " " << fmt(report.average.rmse)
       << "\n";
    return os.str();
}

namespace {

std::int64_t slot_of(std::int64_t ts, std::int64_t period) {
    std::int64_t s = ts % 86400;
    if (s < 0) s += 86400;
    const std::int64_t step = 86400 / period;
    return s / step;
}

// mean that returns the shared value exactly when all samples agree
double stable_mean(const std::vector<double>& xs) {
    bool all_equal = true;
    for (double x : xs) {
        if (x != xs.front()) {
            all_equal = false;
            break;
        }
    }
    if (all_equal) return xs.front();
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

}  // namespace

HaModel fit_ha(const TrafficDataset& train, std::int64_t period) {
    if (period <= 0 || 86400 % period != 0) throw ConfigError("fit_ha: period must divide the day");
    const std::int64_t n = train.n_sensors(), k = train.n_timesteps();
    if (k < period) {
        throw ConfigError("fit_ha: training range has " + std::to_string(k) + " timesteps, below one period (" +
                          std::to_string(period) + ")");
    }
    HaModel m;
    m.period = period;
    m.slot_mean = Array(Shape{n, period});
    m.covered.assign(static_cast<std::size_t>(n * period), 0);
    double total = 0.0;
    std::int64_t count = 0;
    std::vector<std::vector<double>> buckets(static_cast<std::size_t>(period));
    for (std::int64_t s = 0; s < n; ++s) {
        for (auto& b : buckets) b.clear();
        for (std::int64_t t = 0; t < k; ++t) {
            const double v = train.values.at(0, s, t);
            if (std::isnan(v)) continue;
            buckets[static_cast<std::size_t>(slot_of(train.timestamps[static_cast<std::size_t>(t)], period))].push_back(v);
            total += v;
            ++count;
        }
        for (std::int64_t slot = 0; slot < period; ++slot) {
            const auto& b = buckets[static_cast<std::size_t>(slot)];
            if (!b.empty()) {
                m.slot_mean.at(s, slot) = stable_mean(b);
                m.covered[static_cast<std::size_t>(s * period + slot)] = 1;
            }
        }
    }
    if (count == 0) throw ConfigError("fit_ha: no readings in the training range");
    m.fallback = total / static_cast<double>(count);
    return m;
}

Array ha_predictions(const HaModel& model, const TrafficDataset& split, const std::vector<Window>& windows) {
    const std::int64_t n = split.n_sensors();
    if (windows.empty()) return Array(Shape{0, 0, 0});
    const std::int64_t f = windows.front().target.extent(1);
    const std::int64_t len = windows.front().input.extent(2);
    Array out(Shape{static_cast<std::int64_t>(windows.size()), f, n});
    bool warned = false;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        for (std::int64_t step = 0; step < f; ++step) {
            const std::int64_t t = windows[w].origin + len + step;
            const std::int64_t slot = slot_of(split.timestamps[static_cast<std::size_t>(t)], model.period);
            for (std::int64_t s = 0; s < n; ++s) {
                if (model.covered[static_cast<std::size_t>(s * model.period + slot)]) {
                    out.at(static_cast<std::int64_t>(w), step, s) = model.slot_mean.at(s, slot);
                } else {
                    if (!warned) {
                        std::fprintf(stderr, "warning: historical average fell back to the train mean for slot %lld\n",
                                     static_cast<long long>(slot));
                        warned = true;
                    }
                    out.at(static_cast<std::int64_t>(w), step, s) = model.fallback;
                }
            }
        }
    }
    return out;
}

Array persistence_predictions(const TrafficDataset& split, const std::vector<Window>& windows) {
    const std::int64_t n = split.n_sensors();
    if (windows.empty()) return Array(Shape{0, 0, 0});
    const std::int64_t f = windows.front().target.extent(1);
    const std::int64_t len = windows.front().input.extent(2);
    Array out(Shape{static_cast<std::int64_t>(windows.size()), f, n});
    for (std::size_t w = 0; w < windows.size(); ++w)
        for (std::int64_t s = 0; s < n; ++s) {
            const double last = windows[w].input.at(0, s, len - 1);
            for (std::int64_t step = 0; step < f; ++step) out.at(static_cast<std::int64_t>(w), step, s) = last;
        }
    return out;
}

Array window_targets(const std::vector<Window>& windows) {
    if (windows.empty()) return Array(Shape{0, 0, 0});
    const std::int64_t n = windows.front().target.extent(0);
    const std::int64_t f = windows.front().target.extent(1);
    Array out(Shape{static_cast<std::int64_t>(windows.size()), f, n});
    for (std::size_t w = 0; w < windows.size(); ++w)
        for (std::int64_t s = 0; s < n; ++s)
            for (std::int64_t step = 0; step < f; ++step)
                out.at(static_cast<std::int64_t>(w), step, s) = windows[w].target.at(s, step);
    return out;
}

Array model_predictions(ModelParams& params, const Array& a_r, const std::vector<Window>& windows,
                        const Scaler& scaler, std::int64_t batch_size, int threads) {
    const std::int64_t W = static_cast<std::int64_t>(windows.size());
    const std::int64_t F = params.cfg.horizon, N = params.n_sensors;
    Array out(Shape{W, F, N});
    if (W == 0) return out;
    std::vector<std::int64_t> order(static_cast<std::size_t>(W));
    for (std::int64_t i = 0; i < W; ++i) order[static_cast<std::size_t>(i)] = i;

    auto run_range = [&](std::int64_t lo, std::int64_t hi, ModelParams& local) {
        for (std::int64_t begin = lo; begin < hi; begin += batch_size) {
            const std::int64_t count = std::min(batch_size, hi - begin);
            const Array input = assemble_batch_inputs(windows, order, begin, count);
            diff::Tape tape;
            ModelVars vars = stage_params(tape, local);
            ModelGraph graph(tape, local, vars, a_r, diff::BnMode::Eval);
            const Array pred = graph.forward(tape.leaf(input, "input")).value();
            for (std::int64_t b = 0; b < count; ++b)
                for (std::int64_t f = 0; f < F; ++f)
                    for (std::int64_t s = 0; s < N; ++s)
                        out.at(begin + b, f, s) = inverse_metric(scaler, pred.at(b, f, s));
        }
    };

    if (threads <= 1 || W < 2 * batch_size) {
        run_range(0, W, params);
        return out;
    }
    // eval mode never touches the running statistics, so per-thread copies
    // only exist to keep tape construction independent
    const int used = std::min<std::int64_t>(threads, (W + batch_size - 1) / batch_size);
    std::vector<std::thread> pool;
    std::vector<ModelParams> copies(static_cast<std::size_t>(used), params);
    const std::int64_t chunk = (W + used - 1) / used;
    for (int i = 0; i < used; ++i) {
        const std::int64_t lo = i * chunk, hi = std::min<std::int64_t>(W, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi, i] { run_range(lo, hi, copies[static_cast<std::size_t>(i)]); });
    }
    for (auto& t : pool) t.join();
    return out;
}

ProbeResult probe_embeddings(const Array& e_src, const Array& e_tgt,
                             const std::vector<std::array<double, 2>>& coords, bool use_kernels) {
    if (e_src.rank() != 2 || e_tgt.rank() != 2 || e_src.extent(0) != e_tgt.extent(0)) {
        throw std::invalid_argument("probe: embeddings must be [N,d] with matching N");
    }
    const std::int64_t n = e_src.extent(0);
    if (static_cast<std::int64_t>(coords.size()) != n) {
        throw std::invalid_argument("probe: coords size does not match sensor count");
    }
    const std::int64_t d = e_src.extent(1) + e_tgt.extent(1);
    const std::int64_t width = use_kernels ? 4 * d : d;

    Eigen::MatrixXd design(n, width + 1);
    for (std::int64_t i = 0; i < n; ++i) {
        design(i, 0) = 1.0;
        std::int64_t col = 1;
        std::vector<double> base;
        base.reserve(static_cast<std::size_t>(d));
        for (std::int64_t j = 0; j < e_src.extent(1); ++j) base.push_back(e_src.at(i, j));
        for (std::int64_t j = 0; j < e_tgt.extent(1); ++j) base.push_back(e_tgt.at(i, j));
        for (double v : base) design(i, col++) = v;
        if (use_kernels) {
            for (double v : base) design(i, col++) = std::sin(v);
            for (double v : base) design(i, col++) = std::cos(v);
            for (double v : base) design(i, col++) = std::clamp(std::tan(v), -1e3, 1e3);
        }
    }

    ProbeResult res;
    res.rank_warning = n <= width;
    if (res.rank_warning) {
        std::fprintf(stderr, "warning: probe has %lld samples for %lld features; R^2 is not meaningful\n",
                     static_cast<long long>(n), static_cast<long long>(width));
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    double r2_sum = 0.0;
    for (int target = 0; target < 2; ++target) {
        Eigen::VectorXd y(n);
        for (std::int64_t i = 0; i < n; ++i) y(i) = coords[static_cast<std::size_t>(i)][static_cast<std::size_t>(target)];
        const Eigen::VectorXd beta = svd.solve(y);  // minimum-norm least squares
        const Eigen::VectorXd resid = y - design * beta;
        const double mean = y.mean();
        double ss_tot = 0.0;
        for (std::int64_t i = 0; i < n; ++i) ss_tot += (y(i) - mean) * (y(i) - mean);
        double r2 = 0.0;
        if (ss_tot > 0.0) r2 = 1.0 - resid.squaredNorm() / ss_tot;
        res.r2_per_target[static_cast<std::size_t>(target)] = r2;
        r2_sum += r2;
        res.coefficients[target].assign(beta.data(), beta.data() + beta.size());
    }
    res.r2 = 0.5 * r2_sum;
    return res;
}

std::optional<double> adjacency_similarity(const Array& a, const Array& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("adjacency_similarity: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return std::nullopt;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::string csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void export_scatter(const TrafficDataset& d, std::int64_t sensor, int channel_x, int channel_y,
                    const std::string& out_csv) {
    if (sensor < 0 || sensor >= d.n_sensors()) throw std::invalid_argument("export_scatter: unknown sensor");
    if (channel_x < 0 || channel_y < 0 || channel_x >= d.n_channels() || channel_y >= d.n_channels()) {
        throw std::invalid_argument("export_scatter: dataset has " + std::to_string(d.n_channels()) +
                                    " channels; requested " + std::to_string(channel_x) + " and " +
                                    std::to_string(channel_y));
    }
    std::ofstream os(out_csv);
    if (!os) throw std::runtime_error("export_scatter: cannot write " + out_csv);
    os << "timestamp,x,y\n";
    for (std::int64_t t = 0; t < d.n_timesteps(); ++t) {
        os << d.timestamps[static_cast<std::size_t>(t)] << ',' << csv_double(d.values.at(channel_x, sensor, t)) << ','
           << csv_double(d.values.at(channel_y, sensor, t)) << '\n';
    }
}

void export_pair_association(const TrafficDataset& d, std::int64_t sensor_i, std::int64_t sensor_j,
                             std::int64_t t_begin, std::int64_t t_end, const std::string& out_csv) {
    if (sensor_i < 0 || sensor_i >= d.n_sensors() || sensor_j < 0 || sensor_j >= d.n_sensors()) {
        throw std::invalid_argument("export_pair_association: unknown sensor");
    }
    t_begin = std::max<std::int64_t>(t_begin, 0);
    t_end = std::min(t_end, d.n_timesteps());
    std::ofstream os(out_csv);
    if (!os) throw std::runtime_error("export_pair_association: cannot write " + out_csv);
    os << "timestamp,value_i,value_j,day_class\n";
    for (std::int64_t t = t_begin; t < t_end; ++t) {
        const std::int64_t ts = d.timestamps[static_cast<std::size_t>(t)];
        os << ts << ',' << csv_double(d.values.at(0, sensor_i, t)) << ',' << csv_double(d.values.at(0, sensor_j, t))
           << ',' << (is_weekend(ts) ? "weekend" : "weekday") << '\n';
    }
}

}  // namespace gswan
