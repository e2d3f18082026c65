#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gswan/augment.hpp"
#include "gswan/dataset.hpp"
#include "gswan/evaluation.hpp"
#include "gswan/model.hpp"
#include "gswan/tape.hpp"

namespace gswan {

struct TrainConfig {
    double lr0 = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr_decay = 0.97;  // per epoch
    double clip_norm = 3.0;
    std::int64_t batch_size = 64;
    std::int64_t epochs = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    std::int64_t epoch = 0;
    double train_loss = 0.0;
    double val_mae = 0.0;
    double val_mape = 0.0;  // NaN when undefined
    double val_rmse = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::int64_t best_epoch = -1;
    double best_val_mae = 0.0;
    bool diverged = false;
    std::string note;
};

// mean |pred - target|; both sides must share a shape
diff::Var mae_loss(diff::Var pred, diff::Var target);
double mae_value(const Array& a, const Array& b);

// Scales every gradient by clip_norm/norm when the global L2 norm exceeds
// clip_norm; returns the pre-clip norm. Non-finite gradients abort.
double clip_gradients(std::vector<Array>& grads, double max_norm);

struct AdamState {
    std::vector<Array> m;
    std::vector<Array> v;
    std::int64_t step = 0;
};

AdamState init_adam(const ModelParams& params);

// Decoupled weight decay p <- p*(1 - lr*wd), then the bias-corrected
// moment update.
void adamw_step(ModelParams& params, const std::vector<Array>& grads, AdamState& state, const TrainConfig& cfg,
                double lr);

double lr_at(std::int64_t epoch, const TrainConfig& cfg);

struct TrainData {
    std::vector<Window> train_windows;  // standardized inputs and targets
    std::vector<Window> val_windows;
    Array a_r;
    Scaler scaler;
};

struct TrainResult {
    ModelParams best;
    ModelParams final;
    TrainHistory history;
};

// Per epoch: seeded shuffle, batching, augmentation, forward, MAE loss in
// original units, backward, clip, optimizer step, then a validation pass in
// eval mode with no augmentation. Keeps the parameters of the best
// validation MAE. A non-finite loss aborts with the last good parameters.
TrainResult train(ModelParams params, const TrainData& data, const TrainConfig& tcfg, const AugmentConfig& acfg);

void write_history_csv(const TrainHistory& history, const std::string& path, bool include_timing);

}  // namespace gswan
