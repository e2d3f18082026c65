#include "gswan/synthetic.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "gswan/errors.hpp"
#include "gswan/rng.hpp"

namespace gswan {

std::string topology_name(Topology t) {
    switch (t) {
        case Topology::Ring:
            return "ring";
        case Topology::Grid:
            return "grid";
        case Topology::Random:
            return "random";
    }
    return "?";
}

Topology topology_from_name(const std::string& name) {
    if (name == "ring") return Topology::Ring;
    if (name == "grid") return Topology::Grid;
    if (name == "random") return Topology::Random;
    throw ConfigError("synthetic: unknown topology '" + name + "'");
}

void SynthConfig::validate() const {
    if (n_sensors < 2) throw ConfigError("synthetic: need at least 2 sensors");
    if (days < 1) throw ConfigError("synthetic: need at least 1 day");
    if (noise_std < 0.0) throw ConfigError("synthetic: noise_std must be nonnegative");
    if (phase_spread_minutes < 0.0) throw ConfigError("synthetic: phase_spread must be nonnegative");
    if (coupling_gain_min > coupling_gain_max || coupling_gain_min < 0.0) {
        throw ConfigError("synthetic: coupling gain range is invalid");
    }
    if (coupling_lag_min < 1 || coupling_lag_min > coupling_lag_max) {
        throw ConfigError("synthetic: coupling lag range is invalid");
    }
    if (topology == Topology::Random && (random_p <= 0.0 || random_p > 1.0)) {
        throw ConfigError("synthetic: random_p must be in (0,1]");
    }
}

namespace {

bool strongly_connected(std::int64_t n, const std::vector<Edge>& edges) {
    auto reachable = [&](bool reverse) {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::deque<std::int64_t> queue{0};
        seen[0] = 1;
        std::int64_t count = 1;
        while (!queue.empty()) {
            const std::int64_t v = queue.front();
            queue.pop_front();
            for (const Edge& e : edges) {
                const std::int64_t from = reverse ? e.dst : e.src;
                const std::int64_t to = reverse ? e.src : e.dst;
                if (from == v && !seen[static_cast<std::size_t>(to)]) {
                    seen[static_cast<std::size_t>(to)] = 1;
                    ++count;
                    queue.push_back(to);
                }
            }
        }
        return count == n;
    };
    return reachable(false) && reachable(true);
}

}  // namespace

std::vector<Edge> generate_graph(const SynthConfig& cfg) {
    cfg.validate();
    const std::int64_t n = cfg.n_sensors;
    std::vector<Edge> edges;
    auto distance = [](Rng& rng) { return rng.uniform(200.0, 2000.0); };

    switch (cfg.topology) {
        case Topology::Ring: {
            Rng rng(derive_seed(cfg.seed, "graph"));
            for (std::int64_t i = 0; i < n; ++i) {
                const std::int64_t j = (i + 1) % n;
                const double d = distance(rng);
                edges.push_back(Edge{i, j, d});
                edges.push_back(Edge{j, i, distance(rng)});
            }
            return edges;
        }
        case Topology::Grid: {
            Rng rng(derive_seed(cfg.seed, "graph"));
            const std::int64_t rows = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(n))));
            const std::int64_t cols = (n + rows - 1) / rows;
            auto id = [&](std::int64_t r, std::int64_t c) { return r * cols + c; };
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t c = 0; c < cols; ++c) {
                    const std::int64_t v = id(r, c);
                    if (v >= n) continue;
                    for (auto [dr, dc] : {std::pair<int, int>{0, 1}, {1, 0}}) {
                        const std::int64_t w = id(r + dr, c + dc);
                        if (r + dr < rows && c + dc < cols && w < n) {
                            edges.push_back(Edge{v, w, distance(rng)});
                            edges.push_back(Edge{w, v, distance(rng)});
                        }
                    }
                }
            // wrap stragglers into the chain so the graph stays connected
            if (!strongly_connected(n, edges)) {
                for (std::int64_t i = 1; i < n; ++i) {
                    edges.push_back(Edge{i - 1, i, distance(rng)});
                    edges.push_back(Edge{i, i - 1, distance(rng)});
                }
            }
            return edges;
        }
        case Topology::Random: {
            for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
                Rng rng(derive_seed(cfg.seed, "graph", attempt));
                edges.clear();
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t j = 0; j < n; ++j) {
                        if (i == j) continue;
                        if (rng.uniform01() < cfg.random_p) edges.push_back(Edge{i, j, distance(rng)});
                    }
                if (strongly_connected(n, edges)) return edges;
            }
            throw ConfigError("synthetic: random topology stayed disconnected after 64 attempts; raise random_p");
        }
    }
    throw ConfigError("synthetic: unknown topology");
}

namespace {

// mean-centered two-peak profile of seconds-of-day, so `base_level` is the
// daily mean of the clean signal
struct DailyProfile {
    double am_t, am_w, pm_t, pm_w, pm_level;
    double center = 0.0;

    double raw(double u) const {
        const double a = (u - am_t) / am_w;
        const double p = (u - pm_t) / pm_w;
        return std::exp(-a * a) + pm_level * std::exp(-p * p);
    }
    double operator()(double u) const { return raw(u) - center; }
};

DailyProfile make_profile(const SynthConfig& cfg) {
    DailyProfile p{cfg.am_peak_hour * 3600.0, cfg.am_width_hours * 3600.0, cfg.pm_peak_hour * 3600.0,
                   cfg.pm_width_hours * 3600.0, cfg.pm_level};
    double sum = 0.0;
    for (std::int64_t s = 0; s < 288; ++s) sum += p.raw(static_cast<double>(s) * 300.0);
    p.center = sum / 288.0;
    return p;
}

}  // namespace

TrafficDataset generate_traffic(const SynthConfig& cfg, const std::vector<Edge>& edges) {
    cfg.validate();
    const std::int64_t n = cfg.n_sensors;
    const std::int64_t k = cfg.days * 288;
    const DailyProfile profile = make_profile(cfg);

    std::vector<double> phase(static_cast<std::size_t>(n), 0.0);
    {
        Rng rng(derive_seed(cfg.seed, "phase"));
        for (std::int64_t s = 0; s < n; ++s) phase[static_cast<std::size_t>(s)] = rng.uniform(0.0, cfg.phase_spread_minutes * 60.0);
    }
    struct Coupling {
        std::int64_t src, dst;
        double gain;
        std::int64_t lag;
    };
    std::vector<Coupling> couplings;
    {
        Rng rng(derive_seed(cfg.seed, "coupling"));
        for (const Edge& e : edges) {
            const double gain = rng.uniform(cfg.coupling_gain_min, cfg.coupling_gain_max);
            const std::int64_t lag = cfg.coupling_lag_min +
                                     static_cast<std::int64_t>(rng.uniform_int(
                                         static_cast<std::uint64_t>(cfg.coupling_lag_max - cfg.coupling_lag_min + 1)));
            if (gain > 0.0) couplings.push_back(Coupling{e.src, e.dst, gain, lag});
        }
    }

    TrafficDataset d;
    d.metric_kind = cfg.metric;
    const std::int64_t channels = cfg.with_companion ? 3 : 2;
    d.values = Array(Shape{channels, n, k});
    d.timestamps.resize(static_cast<std::size_t>(k));
    d.edges = edges;
    for (std::int64_t s = 0; s < n; ++s) d.sensor_ids.push_back("s" + std::to_string(s));

    // coordinates on a circle with a small seeded jitter, for the probe
    {
        Rng rng(derive_seed(cfg.seed, "coords"));
        d.coords.resize(static_cast<std::size_t>(n));
        for (std::int64_t s = 0; s < n; ++s) {
            const double angle = 2.0 * 3.141592653589793 * static_cast<double>(s) / static_cast<double>(n);
            d.coords[static_cast<std::size_t>(s)] = {-118.2 + 0.1 * std::cos(angle) + rng.uniform(-0.01, 0.01),
                                                     34.1 + 0.1 * std::sin(angle) + rng.uniform(-0.01, 0.01)};
        }
        d.has_coords = true;
    }

    Rng noise_rng(derive_seed(cfg.seed, "noise"));
    const double sign = cfg.metric == MetricKind::Speed ? -1.0 : 1.0;
    for (std::int64_t t = 0; t < k; ++t) {
        const std::int64_t ts = cfg.start_timestamp + 300 * t;
        d.timestamps[static_cast<std::size_t>(t)] = ts;
        const double tod = time_of_day_fraction(ts);
        const double amp = cfg.amplitude * (is_weekend(ts) ? cfg.weekend_factor : 1.0);
        for (std::int64_t s = 0; s < n; ++s) {
            const double u = tod * 86400.0 + phase[static_cast<std::size_t>(s)];
            double v = cfg.base_level + sign * amp * profile(std::fmod(u, 86400.0));
            if (cfg.noise_std > 0.0) v += cfg.noise_std * noise_rng.normal();
            d.values.at(0, s, t) = v;
            d.values.at(1, s, t) = tod;
        }
        for (const Coupling& c : couplings) {
            const std::int64_t tp = t - c.lag;
            const double upstream = tp >= 0 ? d.values.at(0, c.src, tp) : cfg.base_level;
            d.values.at(0, c.dst, t) += c.gain * upstream;
        }
        for (std::int64_t s = 0; s < n; ++s) d.values.at(0, s, t) = std::max(d.values.at(0, s, t), 0.0);
    }

    if (cfg.with_companion) {
        Rng comp_rng(derive_seed(cfg.seed, "companion"));
        const double scale = cfg.base_level + std::fabs(cfg.amplitude);
        const double comp_base = 60.0;
        for (std::int64_t t = 0; t < k; ++t)
            for (std::int64_t s = 0; s < n; ++s) {
                const double x = d.values.at(0, s, t);
                double c = comp_base * std::max(0.15, 1.0 - x / scale);
                c += 0.02 * comp_base * comp_rng.normal();
                d.values.at(2, s, t) = std::max(c, 0.0);
            }
    }
    return d;
}

}  // namespace gswan
