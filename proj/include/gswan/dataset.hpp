#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gswan/array.hpp"

namespace gswan {

enum class MetricKind { Speed, Flow };

std::string metric_kind_name(MetricKind k);
MetricKind metric_kind_from_name(const std::string& name);

struct Edge {
    std::int64_t src;
    std::int64_t dst;
    double distance;
};

// Raw multichannel sensor readings laid out [channels, sensors, timesteps].
// Channel 0 is the traffic metric in dataset units (NaN marks a missing
// reading), channel 1 the time-of-day fraction in [0,1). Timestamps are
// local epoch seconds at a fixed 300 s step. Immutable after load.
struct TrafficDataset {
    Array values;
    std::vector<std::int64_t> timestamps;
    std::vector<Edge> edges;
    std::vector<std::string> sensor_ids;
    MetricKind metric_kind = MetricKind::Speed;
    std::vector<std::array<double, 2>> coords;  // per sensor (lon, lat); empty when unknown
    bool has_coords = false;

    std::int64_t n_channels() const { return values.rank() >= 1 ? values.extent(0) : 0; }
    std::int64_t n_sensors() const { return values.rank() >= 2 ? values.extent(1) : 0; }
    std::int64_t n_timesteps() const { return values.rank() >= 3 ? values.extent(2) : 0; }
};

struct DatasetSummary {
    std::int64_t sensors = 0;
    std::int64_t edges = 0;
    std::int64_t timesteps = 0;
    std::int64_t entries = 0;   // sensors * timesteps
    std::int64_t missing = 0;   // channel-0 cells without a reading
    double mean = 0.0;          // over non-missing channel-0 entries
    double stddev = 0.0;        // population
};

// Physical adjacency from road distances through a Gaussian RBF.
struct AdjacencyPair {
    Array a_r;       // [N,N], diagonal 1, zero off the edge set
    double sigma_d;  // population std of the listed edge distances
};

struct Scaler {
    double mean = 0.0;
    double std = 1.0;  // floored at 1e-8
    double tod_min = 0.0;
    double tod_max = 1.0;
};

enum class ScaleDir { Forward, Inverse };

// One datapoint: L input steps over all channels, F target steps of channel 0.
struct Window {
    Array input;          // [D,N,L]
    Array target;         // [N,F]
    std::int64_t origin;  // start timestep within the owning split
};

struct SplitRatio {
    int train = 7;
    int val = 1;
    int test = 2;
};

struct Splits {
    TrafficDataset train;
    TrafficDataset val;
    TrafficDataset test;
};

// time-of-day fraction of a local epoch timestamp; shared by the loader
// and the synthetic generator so round trips are bit-exact
double time_of_day_fraction(std::int64_t ts);

bool is_weekend(std::int64_t ts);

// Directory format: values.csv (header row of sensor ids, K data rows,
// empty cell or "NaN" = missing), edges.csv (src,dst,distance), meta.json
// (metric_kind, start_timestamp, step_seconds=300, optional coords).
TrafficDataset load_dataset(const std::string& dir);
void write_dataset(const TrafficDataset& d, const std::string& dir);

DatasetSummary summarize(const TrafficDataset& d);

AdjacencyPair build_adjacency(const std::vector<Edge>& edges, std::int64_t n_sensors);

// Contiguous temporal split at floors of the cumulative fractions. Windows
// are formed within each split independently, so no window straddles a
// boundary. Throws if any split is shorter than window_len + horizon.
Splits split_temporal(const TrafficDataset& d, SplitRatio ratio, std::int64_t window_len = 12,
                      std::int64_t horizon = 12);

Scaler fit_scaler(const TrafficDataset& train);
TrafficDataset apply_scaler(const Scaler& s, const TrafficDataset& d, ScaleDir dir);
double scale_metric(const Scaler& s, double v);
double inverse_metric(const Scaler& s, double v);

// Replaces missing channel-0 cells with the training mean; returns the
// modified dataset and reports the number of imputed cells.
TrafficDataset impute_missing(const TrafficDataset& d, double train_mean, std::int64_t* imputed = nullptr);

std::vector<Window> make_windows(const TrafficDataset& d, std::int64_t window_len = 12, std::int64_t horizon = 12);

}  // namespace gswan
