#include "gswan/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "gswan/errors.hpp"
#include "gswan/rng.hpp"

namespace gswan {

using diff::Tape;
using diff::Var;

void TrainConfig::validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("train: lr0 must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train: lr_decay must be in (0,1]");
    if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be positive");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be nonnegative");
}

Var mae_loss(Var pred, Var target) {
    if (pred.shape() != target.shape()) {
        throw std::invalid_argument("mae_loss: shape mismatch " + pred.shape().str() + " vs " + target.shape().str());
    }
    return diff::mean_all(diff::abs(diff::sub(pred, target)));
}

double mae_value(const Array& a, const Array& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mae: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    double s = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return a.size() ? s / static_cast<double>(a.size()) : 0.0;
}

double clip_gradients(std::vector<Array>& grads, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be positive");
    double sq = 0.0;
    for (const Array& g : grads) {
        for (std::int64_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i])) throw NumericError("clip_gradients: non-finite gradient");
            sq += g[i] * g[i];
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (Array& g : grads)
            for (std::int64_t i = 0; i < g.size(); ++i) g[i] *= scale;
    }
    return norm;
}

AdamState init_adam(const ModelParams& params) {
    AdamState st;
    st.m.reserve(params.params.size());
    st.v.reserve(params.params.size());
    for (const ParamEntry& p : params.params) {
        st.m.emplace_back(p.value.shape());
        st.v.emplace_back(p.value.shape());
    }
    return st;
}

void adamw_step(ModelParams& params, const std::vector<Array>& grads, AdamState& state, const TrainConfig& cfg,
                double lr) {
    if (grads.size() != params.params.size() || state.m.size() != params.params.size()) {
        throw std::invalid_argument("adamw_step: state does not match the parameter registry");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.params.size(); ++p) {
        Array& w = params.params[p].value;
        const Array& g = grads[p];
        Array& m = state.m[p];
        Array& v = state.v[p];
        if (!g.same_shape(w)) throw std::invalid_argument("adamw_step: gradient shape mismatch for " + params.params[p].name);
        for (std::int64_t i = 0; i < w.size(); ++i) {
            w[i] *= 1.0 - lr * cfg.weight_decay;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

double lr_at(std::int64_t epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
    return cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(epoch));
}

namespace {

StepMetrics validation_metrics(ModelParams& params, const TrainData& data, std::int64_t batch_size) {
    Array pred = model_predictions(params, data.a_r, data.val_windows, data.scaler, batch_size);
    Array target = window_targets(data.val_windows);
    for (std::int64_t i = 0; i < target.size(); ++i) target[i] = inverse_metric(data.scaler, target[i]);
    const MetricsReport rep = horizon_report(target, pred, MetricKind::Speed);
    return rep.average;
}

}  // namespace

TrainResult train(ModelParams params, const TrainData& data, const TrainConfig& tcfg, const AugmentConfig& acfg) {
    tcfg.validate();
    acfg.validate();
    if (data.train_windows.empty() || data.val_windows.empty()) {
        throw ConfigError("train: empty train or validation window set");
    }

    TrainResult result;
    result.history.best_val_mae = std::numeric_limits<double>::infinity();
    AdamState adam = init_adam(params);
    const std::int64_t n_train = static_cast<std::int64_t>(data.train_windows.size());
    const std::int64_t F = params.cfg.horizon, N = params.n_sensors;

    std::vector<std::int64_t> order(static_cast<std::size_t>(n_train));
    ModelParams best = params;

    for (std::int64_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at(epoch, tcfg);

        for (std::int64_t i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;
        Rng shuffle_rng(derive_seed(tcfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        for (std::int64_t i = n_train - 1; i > 0; --i) {
            const std::int64_t j = static_cast<std::int64_t>(shuffle_rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        double loss_sum = 0.0;
        std::int64_t loss_weight = 0;
        for (std::int64_t begin = 0; begin < n_train; begin += tcfg.batch_size) {
            const std::int64_t count = std::min(tcfg.batch_size, n_train - begin);
            const Window& first = data.train_windows[static_cast<std::size_t>(order[static_cast<std::size_t>(begin)])];
            const std::int64_t L = first.input.extent(2);
            Array input(Shape{count, 2, N, L});
            Array target(Shape{count, F, N});
            for (std::int64_t b = 0; b < count; ++b) {
                const std::int64_t w = order[static_cast<std::size_t>(begin + b)];
                const Window& win = data.train_windows[static_cast<std::size_t>(w)];
                // noise operates in scaled space where the train std is 1
                const Array aug = augment_window(win.input, acfg, 1.0,
                                                 static_cast<std::uint64_t>(epoch) * static_cast<std::uint64_t>(n_train) +
                                                     static_cast<std::uint64_t>(w));
                for (std::int64_t c = 0; c < 2; ++c)
                    for (std::int64_t s = 0; s < N; ++s)
                        for (std::int64_t t = 0; t < L; ++t) input.at(b, c, s, t) = aug.at(c, s, t);
                for (std::int64_t s = 0; s < N; ++s)
                    for (std::int64_t f = 0; f < F; ++f)
                        target.at(b, f, s) = inverse_metric(data.scaler, win.target.at(s, f));
            }

            Tape tape;
            ModelVars vars = stage_params(tape, params);
            ModelGraph graph(tape, params, vars, data.a_r, diff::BnMode::Train);
            Var pred = graph.forward(tape.leaf(std::move(input), "input"));
            Var pred_units = diff::add_scalar(diff::scale(pred, data.scaler.std), data.scaler.mean);
            Var loss = mae_loss(pred_units, tape.leaf(std::move(target), "target"));
            const double loss_v = loss.value()[0];
            if (!std::isfinite(loss_v)) {
                result.history.diverged = true;
                result.history.note = "non-finite loss at epoch " + std::to_string(epoch);
                result.best = std::move(best);
                result.final = std::move(params);
                return result;
            }
            tape.backward(loss);
            std::vector<Array> grads;
            grads.reserve(vars.vars.size());
            for (const Var& v : vars.vars) grads.push_back(v.grad());
            try {
                clip_gradients(grads, tcfg.clip_norm);
            } catch (const NumericError& e) {
                result.history.diverged = true;
                result.history.note = std::string(e.what()) + " at epoch " + std::to_string(epoch);
                result.best = std::move(best);
                result.final = std::move(params);
                return result;
            }
            adamw_step(params, grads, adam, tcfg, lr);
            loss_sum += loss_v * static_cast<double>(count);
            loss_weight += count;
        }

        const StepMetrics val = validation_metrics(params, data, tcfg.batch_size);
        const auto t1 = std::chrono::steady_clock::now();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(loss_weight);
        rec.val_mae = val.mae;
        rec.val_mape = val.mape ? *val.mape : std::nan("");
        rec.val_rmse = val.rmse;
        rec.lr = lr;
        rec.seconds = std::chrono::duration<double>(t1 - t0).count();
        result.history.epochs.push_back(rec);

        if (val.mae < result.history.best_val_mae) {
            result.history.best_val_mae = val.mae;
            result.history.best_epoch = epoch;
            best = params;
        }
    }

    result.best = std::move(best);
    result.final = std::move(params);
    return result;
}

void write_history_csv(const TrainHistory& history, const std::string& path, bool include_timing) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "epoch,train_loss,val_mae,val_mape,val_rmse,lr,seconds\n";
    char buf[256];
    for (const EpochRecord& r : history.epochs) {
        const double secs = include_timing ? r.seconds : 0.0;
        if (std::isnan(r.val_mape)) {
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,,%.17g,%.17g,%.3f\n", static_cast<long long>(r.epoch),
                          r.train_loss, r.val_mae, r.val_rmse, r.lr, secs);
        } else {
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n", static_cast<long long>(r.epoch),
                          r.train_loss, r.val_mae, r.val_mape, r.val_rmse, r.lr, secs);
        }
        os << buf;
    }
}

}  // namespace gswan
