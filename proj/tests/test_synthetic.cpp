#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <deque>
#include <set>

#include "gswan/errors.hpp"
#include "gswan/synthetic.hpp"
#include "test_util.hpp"

using namespace gswan;
using gswan::testutil::TempDir;

namespace {

bool strongly_connected_oracle(std::int64_t n, const std::vector<Edge>& edges, bool reverse) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::deque<std::int64_t> q{0};
    seen[0] = 1;
    std::int64_t count = 1;
    while (!q.empty()) {
        const std::int64_t v = q.front();
        q.pop_front();
        for (const Edge& e : edges) {
            const std::int64_t from = reverse ? e.dst : e.src;
            const std::int64_t to = reverse ? e.src : e.dst;
            if (from == v && !seen[static_cast<std::size_t>(to)]) {
                seen[static_cast<std::size_t>(to)] = 1;
                ++count;
                q.push_back(to);
            }
        }
    }
    return count == n;
}

}  // namespace

TEST_CASE("ring topology has 2N edges within the distance range and is connected") {
    SynthConfig cfg;
    cfg.n_sensors = 8;
    cfg.seed = 7;
    const std::vector<Edge> edges = generate_graph(cfg);
    CHECK(edges.size() == 16);
    for (const Edge& e : edges) {
        CHECK(e.distance >= 200.0);
        CHECK(e.distance <= 2000.0);
    }
    CHECK(strongly_connected_oracle(8, edges, false));
    CHECK(strongly_connected_oracle(8, edges, true));

    const std::vector<Edge> again = generate_graph(cfg);
    REQUIRE(again.size() == edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        CHECK(again[i].src == edges[i].src);
        CHECK(again[i].dst == edges[i].dst);
        CHECK(again[i].distance == edges[i].distance);
    }
}

TEST_CASE("random topology retries until strongly connected") {
    SynthConfig cfg;
    cfg.n_sensors = 10;
    cfg.topology = Topology::Random;
    cfg.random_p = 0.18;
    cfg.seed = 11;
    const std::vector<Edge> edges = generate_graph(cfg);
    CHECK(strongly_connected_oracle(10, edges, false));
    CHECK(strongly_connected_oracle(10, edges, true));

    SynthConfig hopeless = cfg;
    hopeless.n_sensors = 40;
    hopeless.random_p = 1e-6;
    CHECK_THROWS_AS(generate_graph(hopeless), ConfigError);
}

TEST_CASE("grid topology is connected") {
    SynthConfig cfg;
    cfg.n_sensors = 7;  // non-square on purpose
    cfg.topology = Topology::Grid;
    cfg.seed = 12;
    const std::vector<Edge> edges = generate_graph(cfg);
    CHECK(strongly_connected_oracle(7, edges, false));
    CHECK(strongly_connected_oracle(7, edges, true));
}

TEST_CASE("generated traffic is deterministic and periodic when clean") {
    SynthConfig cfg;
    cfg.n_sensors = 4;
    cfg.days = 3;
    cfg.noise_std = 0.0;
    cfg.phase_spread_minutes = 0.0;
    cfg.weekend_factor = 1.0;
    cfg.seed = 13;
    const std::vector<Edge> edges = generate_graph(cfg);
    TrafficDataset a = generate_traffic(cfg, edges);
    TrafficDataset b = generate_traffic(cfg, edges);
    CHECK(bit_equal(a.values, b.values));

    for (std::int64_t s = 0; s < 4; ++s)
        for (std::int64_t t = 0; t + 288 < a.n_timesteps(); ++t)
            CHECK(a.values.at(0, s, t) == a.values.at(0, s, t + 288));

    // with no noise, phase spread, or coupling the signal is a pure function
    // of the profile, so the seed only enters through draws that exist
    SynthConfig noisy = cfg;
    noisy.noise_std = 0.8;
    TrafficDataset n1 = generate_traffic(noisy, edges);
    TrafficDataset n2 = generate_traffic(noisy, edges);
    CHECK(bit_equal(n1.values, n2.values));
    noisy.seed = 14;
    TrafficDataset n3 = generate_traffic(noisy, edges);
    CHECK_FALSE(bit_equal(n1.values, n3.values));
}

TEST_CASE("phase spread separates the daily peaks across sensors") {
    SynthConfig cfg;
    cfg.n_sensors = 8;
    cfg.days = 1;
    cfg.phase_spread_minutes = 120.0;
    cfg.noise_std = 0.0;
    cfg.metric = MetricKind::Flow;  // positive daily swing, peaks are maxima
    cfg.seed = 15;
    TrafficDataset d = generate_traffic(cfg, generate_graph(cfg));
    // continuous phase draws are pairwise distinct, so no two sensors can
    // share a series; the argmax slots also spread over the 300 s grid
    std::set<std::int64_t> peaks;
    for (std::int64_t s = 0; s < 8; ++s) {
        std::int64_t arg = 0;
        double best = -1e300;
        for (std::int64_t t = 0; t < 144; ++t) {  // morning half
            if (d.values.at(0, s, t) > best) {
                best = d.values.at(0, s, t);
                arg = t;
            }
        }
        peaks.insert(arg);
    }
    CHECK(peaks.size() >= 4);
    for (std::int64_t s1 = 0; s1 < 8; ++s1)
        for (std::int64_t s2 = s1 + 1; s2 < 8; ++s2) {
            double diff = 0.0;
            for (std::int64_t t = 0; t < d.n_timesteps(); ++t)
                diff = std::max(diff, std::fabs(d.values.at(0, s1, t) - d.values.at(0, s2, t)));
            CHECK(diff > 1e-9);
        }
}

TEST_CASE("daily mean stays near the base level") {
    SynthConfig cfg;
    cfg.n_sensors = 3;
    cfg.days = 30;
    cfg.base_level = 50.0;
    cfg.amplitude = 20.0;
    cfg.noise_std = 0.5;  // 0.01 * base
    cfg.phase_spread_minutes = 45.0;
    cfg.weekend_factor = 1.0;
    cfg.seed = 16;
    TrafficDataset d = generate_traffic(cfg, generate_graph(cfg));
    for (std::int64_t s = 0; s < 3; ++s) {
        double mean = 0.0;
        for (std::int64_t t = 0; t < d.n_timesteps(); ++t) mean += d.values.at(0, s, t);
        mean /= static_cast<double>(d.n_timesteps());
        CHECK(std::fabs(mean - 50.0) < 0.02 * 50.0);
    }
}

TEST_CASE("generated dataset round trips through the directory format bit-exactly") {
    SynthConfig cfg;
    cfg.n_sensors = 5;
    cfg.days = 2;
    cfg.noise_std = 1.3;
    cfg.phase_spread_minutes = 90.0;
    cfg.coupling_gain_min = 0.1;
    cfg.coupling_gain_max = 0.3;
    cfg.seed = 17;
    TrafficDataset d = generate_traffic(cfg, generate_graph(cfg));
    TempDir tmp("synth_rt");
    write_dataset(d, tmp.str());
    TrafficDataset r = load_dataset(tmp.str());
    REQUIRE(r.values.shape() == Shape{2, 5, d.n_timesteps()});
    for (std::int64_t s = 0; s < 5; ++s)
        for (std::int64_t t = 0; t < d.n_timesteps(); ++t) {
            CHECK(r.values.at(0, s, t) == d.values.at(0, s, t));
            CHECK(r.values.at(1, s, t) == d.values.at(1, s, t));
        }
    CHECK(r.timestamps == d.timestamps);
    REQUIRE(r.edges.size() == d.edges.size());
    for (std::size_t i = 0; i < d.edges.size(); ++i) CHECK(r.edges[i].distance == d.edges[i].distance);
    REQUIRE(r.has_coords);
    for (std::int64_t s = 0; s < 5; ++s) {
        CHECK(r.coords[static_cast<std::size_t>(s)][0] == d.coords[static_cast<std::size_t>(s)][0]);
        CHECK(r.coords[static_cast<std::size_t>(s)][1] == d.coords[static_cast<std::size_t>(s)][1]);
    }
}

TEST_CASE("weekend regime separates pair association clouds") {
    SynthConfig cfg;
    cfg.n_sensors = 4;
    cfg.days = 28;
    cfg.base_level = 50.0;
    cfg.amplitude = 20.0;
    cfg.weekend_factor = 0.5;
    cfg.noise_std = 0.5;
    cfg.coupling_gain_min = 0.2;
    cfg.coupling_gain_max = 0.4;
    cfg.seed = 18;
    cfg.metric = MetricKind::Flow;
    const std::vector<Edge> edges = generate_graph(cfg);
    TrafficDataset d = generate_traffic(cfg, edges);

    // compare the coupled pair at the morning peak slot across day classes
    const std::int64_t slot = static_cast<std::int64_t>(8.0 * 12.0);
    const std::int64_t i = edges.front().src, j = edges.front().dst;
    std::vector<double> weekday, weekend;
    for (std::int64_t day = 0; day < cfg.days; ++day) {
        const std::int64_t t = day * 288 + slot;
        const double v = d.values.at(0, i, t) + d.values.at(0, j, t);
        if (is_weekend(d.timestamps[static_cast<std::size_t>(t)])) {
            weekend.push_back(v);
        } else {
            weekday.push_back(v);
        }
    }
    auto stats = [](const std::vector<double>& xs) {
        double m = 0.0;
        for (double x : xs) m += x;
        m /= static_cast<double>(xs.size());
        double v = 0.0;
        for (double x : xs) v += (x - m) * (x - m);
        return std::pair<double, double>(m, std::sqrt(v / static_cast<double>(xs.size())));
    };
    const auto [m_wd, s_wd] = stats(weekday);
    const auto [m_we, s_we] = stats(weekend);
    CHECK(std::fabs(m_wd - m_we) > 3.0 * std::max(s_wd, s_we));
}

TEST_CASE("config validation rejects bad ranges") {
    SynthConfig cfg;
    cfg.n_sensors = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.n_sensors = 4;
    cfg.coupling_lag_min = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.coupling_lag_min = 1;
    cfg.coupling_gain_min = 0.5;
    cfg.coupling_gain_max = 0.2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
