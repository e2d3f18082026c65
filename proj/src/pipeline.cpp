#include "gswan/pipeline.hpp"

#include <cstdio>

#include "gswan/errors.hpp"

namespace gswan {

Pipeline prepare_pipeline(const TrafficDataset& raw, SplitRatio ratio, std::int64_t input_len, std::int64_t horizon) {
    Pipeline p;
    p.metric_kind = raw.metric_kind;
    p.n_sensors = raw.n_sensors();
    Splits sp = split_temporal(raw, ratio, input_len, horizon);
    p.scaler = fit_scaler(sp.train);
    std::int64_t imputed = 0;
    p.original.train = impute_missing(sp.train, p.scaler.mean, &imputed);
    p.original.val = impute_missing(sp.val, p.scaler.mean, &imputed);
    p.original.test = impute_missing(sp.test, p.scaler.mean, &imputed);
    p.scaled.train = apply_scaler(p.scaler, p.original.train, ScaleDir::Forward);
    p.scaled.val = apply_scaler(p.scaler, p.original.val, ScaleDir::Forward);
    p.scaled.test = apply_scaler(p.scaler, p.original.test, ScaleDir::Forward);
    p.a_r = build_adjacency(raw.edges, raw.n_sensors()).a_r;
    return p;
}

SplitRatio default_ratio(MetricKind kind) {
    return kind == MetricKind::Speed ? SplitRatio{7, 1, 2} : SplitRatio{6, 2, 2};
}

SplitRatio parse_ratio(const std::string& text) {
    SplitRatio r;
    if (std::sscanf(text.c_str(), "%d:%d:%d", &r.train, &r.val, &r.test) != 3) {
        throw ConfigError("split ratio must look like 7:1:2, got '" + text + "'");
    }
    return r;
}

const TrafficDataset& pick_split(const Splits& splits, const std::string& name) {
    if (name == "train") return splits.train;
    if (name == "val") return splits.val;
    if (name == "test") return splits.test;
    throw ConfigError("unknown split '" + name + "'; use train, val, or test");
}

}  // namespace gswan
