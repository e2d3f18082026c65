#pragma once

#include <cstdint>
#include <vector>

#include "gswan/dataset.hpp"

namespace gswan {

enum class Topology { Ring, Grid, Random };

std::string topology_name(Topology t);
Topology topology_from_name(const std::string& name);

// Desk-scale traffic generator: a smooth two-peak daily profile with a
// per-sensor phase offset, directed lagged coupling along the graph edges,
// a weekend amplitude regime, and additive Gaussian noise. All draws are
// seeded; identical configs give bit-identical datasets.
struct SynthConfig {
    std::int64_t n_sensors = 8;
    std::int64_t days = 7;
    Topology topology = Topology::Ring;
    double random_p = 0.2;  // edge probability for the random topology
    MetricKind metric = MetricKind::Speed;
    double base_level = 50.0;
    double amplitude = 20.0;            // scale of the daily swing
    double phase_spread_minutes = 0.0;  // max per-sensor daily-peak offset
    double coupling_gain_min = 0.0;
    double coupling_gain_max = 0.0;
    int coupling_lag_min = 1;  // timesteps
    int coupling_lag_max = 6;
    double weekend_factor = 1.0;  // amplitude multiplier on weekend days
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    std::int64_t start_timestamp = 1514764800;  // a Monday, local midnight

    // daily profile shape: two clipped Gaussian peaks, mean-centered
    double am_peak_hour = 8.0;
    double am_width_hours = 1.5;
    double pm_peak_hour = 17.0;
    double pm_width_hours = 2.5;
    double pm_level = 0.8;  // afternoon peak height relative to morning

    // appends an inversely coupled companion metric as channel 2
    bool with_companion = false;

    void validate() const;
};

// Connected directed graph with seeded distances in [200, 2000] meters.
// A ring has 2*N edges (both directions); a disconnected random draw is
// retried with an incremented sub-seed a bounded number of times.
std::vector<Edge> generate_graph(const SynthConfig& cfg);

TrafficDataset generate_traffic(const SynthConfig& cfg, const std::vector<Edge>& edges);

}  // namespace gswan
