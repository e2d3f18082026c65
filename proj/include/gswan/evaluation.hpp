#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gswan/array.hpp"
#include "gswan/dataset.hpp"
#include "gswan/model.hpp"

namespace gswan {

struct StepMetrics {
    double mae = 0.0;
    std::optional<double> mape;  // percent; absent when every target is zero
    double rmse = 0.0;
};

// MAE/RMSE over all entries; MAPE over entries with nonzero targets.
StepMetrics compute_metrics(const Array& y, const Array& h);

// Per-step metrics for steps 1..F plus the 15/30/60-minute rows (steps
// 3/6/12 at 5-minute resolution, when present) and the all-step mean.
struct MetricsReport {
    MetricKind metric_kind = MetricKind::Speed;
    std::vector<StepMetrics> per_step;
    std::optional<StepMetrics> h15, h30, h60;
    StepMetrics average;
};

MetricsReport horizon_report(const Array& y, const Array& h, MetricKind kind);  // y,h: [B,F,N]
std::string render_report_table(const MetricsReport& report, const std::string& label);

// Historical average: per (sensor, time-of-day slot) mean of the training
// values; the same prediction at every horizon step.
struct HaModel {
    std::int64_t period = 288;
    Array slot_mean;            // [N, period]
    std::vector<char> covered;  // [N*period]
    double fallback = 0.0;      // overall training mean for uncovered slots
};

HaModel fit_ha(const TrafficDataset& train, std::int64_t period = 288);
Array ha_predictions(const HaModel& model, const TrafficDataset& split, const std::vector<Window>& windows);

// Every future step repeats the last observed value per sensor.
Array persistence_predictions(const TrafficDataset& split, const std::vector<Window>& windows);

Array window_targets(const std::vector<Window>& windows);  // [W,F,N]

// Eval-mode model predictions in original units.
Array model_predictions(ModelParams& params, const Array& a_r, const std::vector<Window>& windows,
                        const Scaler& scaler, std::int64_t batch_size, int threads = 1);

// Least-squares recovery of sensor coordinates from node embeddings,
// optionally through sin/cos/tan feature kernels (tan clipped to |t|<=1e3).
struct ProbeResult {
    double r2 = 0.0;  // averaged over longitude and latitude
    std::array<double, 2> r2_per_target{0.0, 0.0};
    std::vector<double> coefficients[2];  // intercept first
    bool rank_warning = false;
};

ProbeResult probe_embeddings(const Array& e_src, const Array& e_tgt,
                             const std::vector<std::array<double, 2>>& coords, bool use_kernels);

// Cosine similarity of the flattened matrices; absent when either is zero.
std::optional<double> adjacency_similarity(const Array& a, const Array& b);

void export_scatter(const TrafficDataset& d, std::int64_t sensor, int channel_x, int channel_y,
                    const std::string& out_csv);
void export_pair_association(const TrafficDataset& d, std::int64_t sensor_i, std::int64_t sensor_j,
                             std::int64_t t_begin, std::int64_t t_end, const std::string& out_csv);

}  // namespace gswan
