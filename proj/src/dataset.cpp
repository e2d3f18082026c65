#include "gswan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "gswan/errors.hpp"

namespace fs = std::filesystem;

namespace gswan {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;
constexpr std::int64_t kStepSeconds = 300;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

bool is_missing_token(const std::string& s) {
    if (s.empty()) return true;
    std::string t = s;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    return t == "nan";
}

double parse_double(const std::string& s, const std::string& file, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw FormatError(file + " line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string metric_kind_name(MetricKind k) { return k == MetricKind::Speed ? "speed" : "flow"; }

MetricKind metric_kind_from_name(const std::string& name) {
    if (name == "speed") return MetricKind::Speed;
    if (name == "flow") return MetricKind::Flow;
    throw FormatError("meta.json: metric_kind must be 'speed' or 'flow', got '" + name + "'");
}

double time_of_day_fraction(std::int64_t ts) {
    std::int64_t s = ts % kSecondsPerDay;
    if (s < 0) s += kSecondsPerDay;
    return static_cast<double>(s) / static_cast<double>(kSecondsPerDay);
}

bool is_weekend(std::int64_t ts) {
    std::int64_t day = ts / kSecondsPerDay;
    if (ts % kSecondsPerDay < 0) --day;
    const std::int64_t dow = (day + 4) % 7;  // 1970-01-01 was a Thursday; 0 = Sunday
    return dow == 0 || dow == 6;
}

TrafficDataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    const fs::path values_path = root / "values.csv";
    const fs::path edges_path = root / "edges.csv";
    const fs::path meta_path = root / "meta.json";
    for (const fs::path& p : {values_path, edges_path, meta_path}) {
        if (!fs::exists(p)) throw FormatError("dataset: missing file " + p.string());
    }

    nlohmann::json meta;
    {
        std::ifstream is(meta_path);
        try {
            is >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("meta.json: " + std::string(e.what()));
        }
    }
    if (!meta.contains("metric_kind") || !meta.contains("start_timestamp") || !meta.contains("step_seconds")) {
        throw FormatError("meta.json: required keys are metric_kind, start_timestamp, step_seconds");
    }
    const std::int64_t step = meta["step_seconds"].get<std::int64_t>();
    if (step <= 0) throw FormatError("meta.json: nonpositive step_seconds");
    if (step != kStepSeconds) {
        throw FormatError("meta.json: step_seconds must be 300, got " + std::to_string(step));
    }
    const std::int64_t start = meta["start_timestamp"].get<std::int64_t>();

    TrafficDataset d;
    d.metric_kind = metric_kind_from_name(meta["metric_kind"].get<std::string>());

    std::ifstream vs(values_path);
    std::string line;
    if (!std::getline(vs, line)) throw FormatError("values.csv line 1: empty file");
    d.sensor_ids = split_csv_line(line);
    const std::int64_t n = static_cast<std::int64_t>(d.sensor_ids.size());
    std::unordered_map<std::string, std::int64_t> id_index;
    for (std::int64_t i = 0; i < n; ++i) {
        if (!id_index.emplace(d.sensor_ids[static_cast<std::size_t>(i)], i).second) {
            throw FormatError("values.csv line 1: duplicate sensor id '" + d.sensor_ids[static_cast<std::size_t>(i)] + "'");
        }
    }

    std::vector<double> metric;
    std::size_t line_no = 1;
    while (std::getline(vs, line)) {
        ++line_no;
        if (line.empty() && vs.eof()) break;
        const std::vector<std::string> fields = split_csv_line(line);
        if (static_cast<std::int64_t>(fields.size()) != n) {
            throw FormatError("values.csv line " + std::to_string(line_no) + ": expected " + std::to_string(n) +
                              " fields, got " + std::to_string(fields.size()));
        }
        for (const std::string& f : fields) {
            metric.push_back(is_missing_token(f) ? std::nan("") : parse_double(f, "values.csv", line_no));
        }
    }
    const std::int64_t k = static_cast<std::int64_t>(metric.size()) / std::max<std::int64_t>(n, 1);
    if (k == 0) throw FormatError("values.csv: no data rows");

    d.values = Array(Shape{2, n, k});
    d.timestamps.resize(static_cast<std::size_t>(k));
    for (std::int64_t t = 0; t < k; ++t) d.timestamps[static_cast<std::size_t>(t)] = start + t * kStepSeconds;
    for (std::int64_t t = 0; t < k; ++t) {
        const double tod = time_of_day_fraction(d.timestamps[static_cast<std::size_t>(t)]);
        for (std::int64_t s = 0; s < n; ++s) {
            d.values.at(0, s, t) = metric[static_cast<std::size_t>(t * n + s)];
            d.values.at(1, s, t) = tod;
        }
    }

    std::ifstream es(edges_path);
    line_no = 0;
    if (!std::getline(es, line)) throw FormatError("edges.csv line 1: empty file");
    ++line_no;
    while (std::getline(es, line)) {
        ++line_no;
        if (line.empty() && es.eof()) break;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 3) {
            throw FormatError("edges.csv line " + std::to_string(line_no) + ": expected src,dst,distance");
        }
        const auto src = id_index.find(fields[0]);
        const auto dst = id_index.find(fields[1]);
        if (src == id_index.end()) {
            throw FormatError("edges.csv line " + std::to_string(line_no) + ": unknown sensor '" + fields[0] + "'");
        }
        if (dst == id_index.end()) {
            throw FormatError("edges.csv line " + std::to_string(line_no) + ": unknown sensor '" + fields[1] + "'");
        }
        const double dist = parse_double(fields[2], "edges.csv", line_no);
        if (dist < 0.0) {
            throw FormatError("edges.csv line " + std::to_string(line_no) + ": negative distance");
        }
        d.edges.push_back(Edge{src->second, dst->second, dist});
    }

    if (meta.contains("coords")) {
        d.coords.assign(static_cast<std::size_t>(n), {0.0, 0.0});
        for (const auto& [id, lonlat] : meta["coords"].items()) {
            const auto it = id_index.find(id);
            if (it == id_index.end()) throw FormatError("meta.json: coords for unknown sensor '" + id + "'");
            d.coords[static_cast<std::size_t>(it->second)] = {lonlat.at(0).get<double>(), lonlat.at(1).get<double>()};
        }
        d.has_coords = true;
    }
    return d;
}

void write_dataset(const TrafficDataset& d, const std::string& dir) {
    const fs::path root(dir);
    fs::create_directories(root);
    const std::int64_t n = d.n_sensors();
    const std::int64_t k = d.n_timesteps();

    std::ofstream vs(root / "values.csv");
    for (std::int64_t s = 0; s < n; ++s) {
        if (s) vs << ',';
        vs << d.sensor_ids[static_cast<std::size_t>(s)];
    }
    vs << '\n';
    for (std::int64_t t = 0; t < k; ++t) {
        for (std::int64_t s = 0; s < n; ++s) {
            if (s) vs << ',';
            const double v = d.values.at(0, s, t);
            if (!std::isnan(v)) vs << format_double(v);
        }
        vs << '\n';
    }

    std::ofstream es(root / "edges.csv");
    es << "src,dst,distance\n";
    for (const Edge& e : d.edges) {
        es << d.sensor_ids[static_cast<std::size_t>(e.src)] << ',' << d.sensor_ids[static_cast<std::size_t>(e.dst)]
           << ',' << format_double(e.distance) << '\n';
    }

    nlohmann::json meta;
    meta["metric_kind"] = metric_kind_name(d.metric_kind);
    meta["start_timestamp"] = d.timestamps.empty() ? 0 : d.timestamps.front();
    meta["step_seconds"] = kStepSeconds;
    if (d.has_coords) {
        nlohmann::json coords = nlohmann::json::object();
        for (std::int64_t s = 0; s < n; ++s) {
            coords[d.sensor_ids[static_cast<std::size_t>(s)]] = {d.coords[static_cast<std::size_t>(s)][0],
                                                                 d.coords[static_cast<std::size_t>(s)][1]};
        }
        meta["coords"] = coords;
    }
    std::ofstream ms(root / "meta.json");
    ms << meta.dump(2) << '\n';
}

DatasetSummary summarize(const TrafficDataset& d) {
    DatasetSummary s;
    s.sensors = d.n_sensors();
    s.edges = static_cast<std::int64_t>(d.edges.size());
    s.timesteps = d.n_timesteps();
    s.entries = s.sensors * s.timesteps;
    double sum = 0.0;
    std::int64_t count = 0;
    for (std::int64_t i = 0; i < s.sensors; ++i)
        for (std::int64_t t = 0; t < s.timesteps; ++t) {
            const double v = d.values.at(0, i, t);
            if (std::isnan(v)) {
                ++s.missing;
            } else {
                sum += v;
                ++count;
            }
        }
    if (count > 0) {
        s.mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (std::int64_t i = 0; i < s.sensors; ++i)
            for (std::int64_t t = 0; t < s.timesteps; ++t) {
                const double v = d.values.at(0, i, t);
                if (!std::isnan(v)) {
                    const double dd = v - s.mean;
                    ss += dd * dd;
                }
            }
        s.stddev = std::sqrt(ss / static_cast<double>(count));
    }
    return s;
}

AdjacencyPair build_adjacency(const std::vector<Edge>& edges, std::int64_t n_sensors) {
    if (edges.empty()) throw std::invalid_argument("build_adjacency: need at least one edge");
    double mean = 0.0;
    for (const Edge& e : edges) {
        if (e.distance < 0.0) throw std::invalid_argument("build_adjacency: negative distance");
        mean += e.distance;
    }
    mean /= static_cast<double>(edges.size());
    double var = 0.0;
    for (const Edge& e : edges) {
        const double dd = e.distance - mean;
        var += dd * dd;
    }
    var /= static_cast<double>(edges.size());
    double sigma = std::sqrt(var);
    if (sigma < 1e-8) {
        std::cerr << "warning: adjacency distance spread is degenerate; flooring sigma_d at 1e-8\n";
        sigma = 1e-8;
    }

    AdjacencyPair out;
    out.sigma_d = sigma;
    out.a_r = Array(Shape{n_sensors, n_sensors});
    for (const Edge& e : edges) {
        if (e.src < 0 || e.src >= n_sensors || e.dst < 0 || e.dst >= n_sensors) {
            throw std::invalid_argument("build_adjacency: edge endpoint out of range");
        }
        const double r = e.distance / sigma;
        out.a_r.at(e.src, e.dst) = std::exp(-r * r);
    }
    for (std::int64_t i = 0; i < n_sensors; ++i) out.a_r.at(i, i) = 1.0;
    return out;
}

namespace {

TrafficDataset slice_time(const TrafficDataset& d, std::int64_t start, std::int64_t len) {
    TrafficDataset out;
    const std::int64_t c = d.n_channels(), n = d.n_sensors(), k = d.n_timesteps();
    out.values = Array(Shape{c, n, len});
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t s = 0; s < n; ++s)
            for (std::int64_t t = 0; t < len; ++t) out.values.at(ch, s, t) = d.values.at(ch, s, start + t);
    (void)k;
    out.timestamps.assign(d.timestamps.begin() + start, d.timestamps.begin() + start + len);
    out.edges = d.edges;
    out.sensor_ids = d.sensor_ids;
    out.metric_kind = d.metric_kind;
    out.coords = d.coords;
    out.has_coords = d.has_coords;
    return out;
}

}  // namespace

Splits split_temporal(const TrafficDataset& d, SplitRatio ratio, std::int64_t window_len, std::int64_t horizon) {
    if (ratio.train <= 0 || ratio.val <= 0 || ratio.test <= 0) {
        throw ConfigError("split_temporal: ratio parts must be positive");
    }
    const std::int64_t k = d.n_timesteps();
    const double total = static_cast<double>(ratio.train + ratio.val + ratio.test);
    const std::int64_t n_train = static_cast<std::int64_t>(std::floor(static_cast<double>(k) * ratio.train / total));
    const std::int64_t n_trainval =
        static_cast<std::int64_t>(std::floor(static_cast<double>(k) * (ratio.train + ratio.val) / total));
    const std::int64_t lens[3] = {n_train, n_trainval - n_train, k - n_trainval};
    const char* names[3] = {"train", "val", "test"};
    for (int i = 0; i < 3; ++i) {
        if (lens[i] < window_len + horizon) {
            throw ConfigError("split_temporal: " + std::string(names[i]) + " split has " + std::to_string(lens[i]) +
                              " timesteps, below window+horizon = " + std::to_string(window_len + horizon));
        }
    }
    Splits out;
    out.train = slice_time(d, 0, n_train);
    out.val = slice_time(d, n_train, n_trainval - n_train);
    out.test = slice_time(d, n_trainval, k - n_trainval);
    return out;
}

Scaler fit_scaler(const TrafficDataset& train) {
    Scaler s;
    double sum = 0.0;
    std::int64_t count = 0;
    const std::int64_t n = train.n_sensors(), k = train.n_timesteps();
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t t = 0; t < k; ++t) {
            const double v = train.values.at(0, i, t);
            if (!std::isnan(v)) {
                sum += v;
                ++count;
            }
        }
    if (count == 0) throw ConfigError("fit_scaler: every channel-0 entry is missing");
    s.mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t t = 0; t < k; ++t) {
            const double v = train.values.at(0, i, t);
            if (!std::isnan(v)) {
                const double dd = v - s.mean;
                ss += dd * dd;
            }
        }
    s.std = std::max(std::sqrt(ss / static_cast<double>(count)), 1e-8);

    s.tod_min = 2.0;
    s.tod_max = -1.0;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t t = 0; t < k; ++t) {
            const double v = train.values.at(1, i, t);
            s.tod_min = std::min(s.tod_min, v);
            s.tod_max = std::max(s.tod_max, v);
        }
    return s;
}

double scale_metric(const Scaler& s, double v) { return (v - s.mean) / s.std; }
double inverse_metric(const Scaler& s, double v) { return v * s.std + s.mean; }

TrafficDataset apply_scaler(const Scaler& s, const TrafficDataset& d, ScaleDir dir) {
    TrafficDataset out = d;
    const std::int64_t n = d.n_sensors(), k = d.n_timesteps();
    const double tod_span = std::max(s.tod_max - s.tod_min, 1e-8);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t t = 0; t < k; ++t) {
            double& m = out.values.at(0, i, t);
            double& tod = out.values.at(1, i, t);
            if (dir == ScaleDir::Forward) {
                if (!std::isnan(m)) m = scale_metric(s, m);
                tod = (tod - s.tod_min) / tod_span;
            } else {
                if (!std::isnan(m)) m = inverse_metric(s, m);
                tod = tod * tod_span + s.tod_min;
            }
        }
    return out;
}

TrafficDataset impute_missing(const TrafficDataset& d, double train_mean, std::int64_t* imputed) {
    TrafficDataset out = d;
    const std::int64_t n = d.n_sensors(), k = d.n_timesteps();
    std::int64_t count = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t sensor_count = 0;
        for (std::int64_t t = 0; t < k; ++t) {
            double& v = out.values.at(0, i, t);
            if (std::isnan(v)) {
                v = train_mean;
                ++count;
                ++sensor_count;
            }
        }
        if (sensor_count == k && k > 0) {
            std::cerr << "warning: sensor " << d.sensor_ids[static_cast<std::size_t>(i)]
                      << " has no readings at all; every cell imputed\n";
        }
    }
    if (imputed) *imputed = count;
    return out;
}

std::vector<Window> make_windows(const TrafficDataset& d, std::int64_t window_len, std::int64_t horizon) {
    const std::int64_t c = d.n_channels(), n = d.n_sensors(), k = d.n_timesteps();
    if (k < window_len + horizon) {
        throw std::invalid_argument("make_windows: need at least " + std::to_string(window_len + horizon) +
                                    " timesteps, got " + std::to_string(k));
    }
    std::vector<Window> out;
    out.reserve(static_cast<std::size_t>(k - window_len - horizon + 1));
    for (std::int64_t o = 0; o + window_len + horizon <= k; ++o) {
        Window w;
        w.origin = o;
        w.input = Array(Shape{c, n, window_len});
        for (std::int64_t ch = 0; ch < c; ++ch)
            for (std::int64_t s = 0; s < n; ++s)
                for (std::int64_t t = 0; t < window_len; ++t) w.input.at(ch, s, t) = d.values.at(ch, s, o + t);
        w.target = Array(Shape{n, horizon});
        for (std::int64_t s = 0; s < n; ++s)
            for (std::int64_t t = 0; t < horizon; ++t) w.target.at(s, t) = d.values.at(0, s, o + window_len + t);
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace gswan
