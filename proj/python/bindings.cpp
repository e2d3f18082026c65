#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "gswan/checkpoint.hpp"
#include "gswan/cli.hpp"
#include "gswan/dataset.hpp"
#include "gswan/evaluation.hpp"
#include "gswan/pipeline.hpp"
#include "gswan/rng.hpp"
#include "gswan/synthetic.hpp"
#include "gswan/tape.hpp"
#include "gswan/training.hpp"

namespace py = pybind11;
using namespace gswan;

namespace {

using NpArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const NpArray& np) {
    const py::buffer_info info = np.request();
    if (info.ndim > 4) throw std::invalid_argument("arrays of rank > 4 are not supported");
    std::vector<std::int64_t> extents(info.shape.begin(), info.shape.end());
    std::vector<double> data(static_cast<const double*>(info.ptr), static_cast<const double*>(info.ptr) + info.size);
    return Array(Shape(extents), std::move(data));
}

NpArray from_array(const Array& a) {
    const std::vector<std::int64_t> extents = a.shape().extents();
    NpArray out(extents.empty() ? std::vector<std::int64_t>{1} : extents);
    std::copy(a.data(), a.data() + a.size(), static_cast<double*>(out.request().ptr));
    return out;
}

NpArray unary_forward(const NpArray& x, const std::function<diff::Var(diff::Tape&, diff::Var)>& f) {
    diff::Tape tape;
    diff::Var leaf = tape.leaf(to_array(x));
    return from_array(f(tape, leaf).value());
}

diff::Act act_from_name(const std::string& name) {
    if (name == "mish") return diff::Act::Mish;
    if (name == "sigmoid") return diff::Act::Sigmoid;
    if (name == "tanh") return diff::Act::Tanh;
    if (name == "relu") return diff::Act::Relu;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

py::dict metrics_dict(const StepMetrics& m) {
    py::dict d;
    d["mae"] = m.mae;
    d["rmse"] = m.rmse;
    d["mape"] = m.mape ? py::object(py::float_(*m.mape)) : py::object(py::none());
    return d;
}

py::dict report_dict(const MetricsReport& rep) {
    py::dict d;
    py::list steps;
    for (const StepMetrics& s : rep.per_step) steps.append(metrics_dict(s));
    d["per_step"] = steps;
    d["average"] = metrics_dict(rep.average);
    if (rep.h15) d["h15"] = metrics_dict(*rep.h15);
    if (rep.h30) d["h30"] = metrics_dict(*rep.h30);
    if (rep.h60) d["h60"] = metrics_dict(*rep.h60);
    return d;
}

}  // namespace

PYBIND11_MODULE(_gswan, m) {
    m.doc() = "spatiotemporal graph traffic forecasting core";

    m.def(
        "softmax",
        [](const NpArray& x, double tau, int axis) {
            return unary_forward(x, [&](diff::Tape& t, diff::Var v) { return diff::softmax(v, tau, axis); });
        },
        py::arg("x"), py::arg("tau") = 1.0, py::arg("axis") = -1);
    m.def(
        "activation",
        [](const NpArray& x, const std::string& kind) {
            const diff::Act act = act_from_name(kind);
            return unary_forward(x, [&](diff::Tape& t, diff::Var v) { return diff::activation(v, act); });
        },
        py::arg("x"), py::arg("kind"));
    m.def(
        "conv1d_dilated",
        [](const NpArray& x, const NpArray& w, int dilation) {
            diff::Tape tape;
            diff::Var xv = tape.leaf(to_array(x));
            diff::Var wv = tape.leaf(to_array(w));
            return from_array(diff::conv1d(xv, wv, dilation).value());
        },
        py::arg("x"), py::arg("w"), py::arg("dilation") = 1);
    m.def(
        "matmul_batched",
        [](const NpArray& a, const NpArray& b) {
            diff::Tape tape;
            return from_array(diff::matmul(tape.leaf(to_array(a)), tape.leaf(to_array(b))).value());
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "gradient_of_sum",
        [](const NpArray& x, const std::string& kind) {
            const diff::Act act = act_from_name(kind);
            diff::Tape tape;
            diff::Var leaf = tape.leaf(to_array(x));
            diff::Var loss = diff::sum_all(diff::activation(leaf, act));
            tape.backward(loss);
            return from_array(tape.grad(leaf));
        },
        py::arg("x"), py::arg("kind"), "gradient of sum(activation(x)) via the reverse-mode tape");

    m.def(
        "compute_metrics",
        [](const NpArray& y, const NpArray& h) {
            const StepMetrics s = compute_metrics(to_array(y), to_array(h));
            return metrics_dict(s);
        },
        py::arg("y"), py::arg("h"));

    m.def(
        "rbf_adjacency",
        [](const std::vector<std::tuple<std::int64_t, std::int64_t, double>>& edges, std::int64_t n) {
            std::vector<Edge> es;
            es.reserve(edges.size());
            for (const auto& [s, d, dist] : edges) es.push_back(Edge{s, d, dist});
            const AdjacencyPair ap = build_adjacency(es, n);
            return py::make_tuple(from_array(ap.a_r), ap.sigma_d);
        },
        py::arg("edges"), py::arg("n"), "Gaussian RBF adjacency and the distance spread it used");

    m.def(
        "adjacency_similarity",
        [](const NpArray& a, const NpArray& b) -> py::object {
            const std::optional<double> s = adjacency_similarity(to_array(a), to_array(b));
            if (!s) return py::none();
            return py::float_(*s);
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "probe_embeddings",
        [](const NpArray& e1, const NpArray& e2, const NpArray& coords, bool kernels) {
            const Array c = to_array(coords);
            if (c.rank() != 2 || c.extent(1) != 2) throw std::invalid_argument("coords must be [N,2]");
            std::vector<std::array<double, 2>> cc(static_cast<std::size_t>(c.extent(0)));
            for (std::int64_t i = 0; i < c.extent(0); ++i) cc[static_cast<std::size_t>(i)] = {c.at(i, 0), c.at(i, 1)};
            const ProbeResult r = probe_embeddings(to_array(e1), to_array(e2), cc, kernels);
            py::dict d;
            d["r2"] = r.r2;
            d["r2_lon"] = r.r2_per_target[0];
            d["r2_lat"] = r.r2_per_target[1];
            d["rank_warning"] = r.rank_warning;
            return d;
        },
        py::arg("e_src"), py::arg("e_tgt"), py::arg("coords"), py::arg("kernels") = false);

    m.def(
        "train_model",
        [](const std::string& data_dir, const std::string& out_dir, std::int64_t epochs, std::int64_t hidden,
           std::int64_t skip_width, const std::vector<int>& dilations, std::int64_t heads, std::int64_t k_hops,
           std::int64_t embed_dim, std::int64_t batch, double lr, std::uint64_t seed, const std::string& split) {
            TrafficDataset raw = load_dataset(data_dir);
            const SplitRatio ratio = split.empty() ? default_ratio(raw.metric_kind) : parse_ratio(split);
            ModelConfig mcfg;
            mcfg.d_hidden = hidden;
            mcfg.d_skip = skip_width;
            mcfg.dilations = dilations;
            mcfg.n_heads = heads;
            mcfg.k_hops = k_hops;
            mcfg.d_embed = embed_dim;
            mcfg.validate();
            Pipeline p = prepare_pipeline(raw, ratio, mcfg.input_len, mcfg.horizon);
            TrainData data;
            data.train_windows = make_windows(p.scaled.train, mcfg.input_len, mcfg.horizon);
            data.val_windows = make_windows(p.scaled.val, mcfg.input_len, mcfg.horizon);
            data.a_r = p.a_r;
            data.scaler = p.scaler;
            TrainConfig tcfg;
            tcfg.epochs = epochs;
            tcfg.batch_size = batch;
            tcfg.lr0 = lr;
            tcfg.seed = derive_seed(seed, "train");
            AugmentConfig acfg;
            acfg.seed = derive_seed(seed, "augment");
            TrainResult r = train(init_model(mcfg, p.n_sensors, derive_seed(seed, "init-model")), data, tcfg, acfg);
            save_checkpoint(r.best, p.scaler, seed, out_dir + "/checkpoint_best.json");
            write_history_csv(r.history, out_dir + "/history.csv", false);
            py::dict d;
            d["best_epoch"] = r.history.best_epoch;
            d["best_val_mae"] = r.history.best_val_mae;
            d["diverged"] = r.history.diverged;
            py::list losses;
            for (const EpochRecord& e : r.history.epochs) losses.append(e.train_loss);
            d["train_loss"] = losses;
            return d;
        },
        py::arg("data_dir"), py::arg("out_dir"), py::arg("epochs") = 10, py::arg("hidden") = 8,
        py::arg("skip_width") = 16, py::arg("dilations") = std::vector<int>{1, 2, 4, 4}, py::arg("heads") = 2,
        py::arg("k_hops") = 1, py::arg("embed_dim") = 4, py::arg("batch") = 32, py::arg("lr") = 2e-3,
        py::arg("seed") = 0, py::arg("split") = std::string());

    m.def(
        "evaluate_checkpoint",
        [](const std::string& checkpoint, const std::string& data_dir, const std::string& split,
           const std::string& ratio_text) {
            LoadedCheckpoint ckpt = load_checkpoint(checkpoint);
            TrafficDataset raw = load_dataset(data_dir);
            const SplitRatio ratio = ratio_text.empty() ? default_ratio(raw.metric_kind) : parse_ratio(ratio_text);
            Pipeline p = prepare_pipeline(raw, ratio, ckpt.params.cfg.input_len, ckpt.params.cfg.horizon);
            const TrafficDataset& orig = pick_split(p.original, split);
            const TrafficDataset& scaled = pick_split(p.scaled, split);
            std::vector<Window> ow = make_windows(orig, ckpt.params.cfg.input_len, ckpt.params.cfg.horizon);
            std::vector<Window> sw = make_windows(scaled, ckpt.params.cfg.input_len, ckpt.params.cfg.horizon);
            Array target = window_targets(ow);
            Array pred = model_predictions(ckpt.params, p.a_r, sw, ckpt.scaler, 64);
            HaModel ha = fit_ha(p.original.train);
            py::dict d;
            d["model"] = report_dict(horizon_report(target, pred, raw.metric_kind));
            d["ha"] = report_dict(horizon_report(target, ha_predictions(ha, orig, ow), raw.metric_kind));
            d["persistence"] = report_dict(horizon_report(target, persistence_predictions(orig, ow), raw.metric_kind));
            return d;
        },
        py::arg("checkpoint"), py::arg("data_dir"), py::arg("split") = "test", py::arg("ratio") = std::string());

    m.def(
        "forecast",
        [](const std::string& checkpoint, const std::string& data_dir, const std::string& split, std::int64_t window) {
            LoadedCheckpoint ckpt = load_checkpoint(checkpoint);
            TrafficDataset raw = load_dataset(data_dir);
            Pipeline p = prepare_pipeline(raw, default_ratio(raw.metric_kind), ckpt.params.cfg.input_len,
                                          ckpt.params.cfg.horizon);
            const TrafficDataset& scaled = pick_split(p.scaled, split);
            std::vector<Window> ws = make_windows(scaled, ckpt.params.cfg.input_len, ckpt.params.cfg.horizon);
            if (window < 0) window = static_cast<std::int64_t>(ws.size()) - 1;
            if (window >= static_cast<std::int64_t>(ws.size())) throw std::invalid_argument("window index out of range");
            std::vector<Window> one{ws[static_cast<std::size_t>(window)]};
            Array pred = model_predictions(ckpt.params, p.a_r, one, ckpt.scaler, 1);
            Array flat(Shape{pred.extent(1), pred.extent(2)});
            for (std::int64_t f = 0; f < pred.extent(1); ++f)
                for (std::int64_t s = 0; s < pred.extent(2); ++s) flat.at(f, s) = pred.at(0, f, s);
            return from_array(flat);
        },
        py::arg("checkpoint"), py::arg("data_dir"), py::arg("split") = "test", py::arg("window") = -1);

    m.def(
        "run",
        [](const std::vector<std::string>& args) { return run_cli(args); },
        py::arg("args"), "invoke the command-line pipeline in process");
}
