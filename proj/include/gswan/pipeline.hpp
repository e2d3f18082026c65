#pragma once

#include <string>

#include "gswan/dataset.hpp"

namespace gswan {

// Shared dataset preparation: temporal split, scaler fit on train, train-mean
// imputation on every split, standardized copies, and the RBF adjacency.
struct Pipeline {
    Splits original;  // imputed, original units
    Splits scaled;    // imputed and standardized
    Scaler scaler;
    Array a_r;
    MetricKind metric_kind = MetricKind::Speed;
    std::int64_t n_sensors = 0;
};

Pipeline prepare_pipeline(const TrafficDataset& raw, SplitRatio ratio, std::int64_t input_len, std::int64_t horizon);

// 7:1:2 for speed datasets, 6:2:2 for flow datasets
SplitRatio default_ratio(MetricKind kind);

SplitRatio parse_ratio(const std::string& text);

const TrafficDataset& pick_split(const Splits& splits, const std::string& name);

}  // namespace gswan
