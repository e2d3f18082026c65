#include "gswan/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "gswan/errors.hpp"

namespace gswan {

namespace {

constexpr int kVersion = 1;

nlohmann::json config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["d_hidden"] = cfg.d_hidden;
    j["d_skip"] = cfg.d_skip;
    j["dilations"] = cfg.dilations;
    j["kernel"] = cfg.kernel;
    j["k_hops"] = cfg.k_hops;
    j["n_heads"] = cfg.n_heads;
    j["tau"] = cfg.tau;
    j["d_embed"] = cfg.d_embed;
    j["use_node_embeddings"] = cfg.use_node_embeddings;
    j["use_sgt"] = cfg.use_sgt;
    j["mask_nonedges"] = cfg.mask_nonedges;
    j["input_len"] = cfg.input_len;
    j["horizon"] = cfg.horizon;
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.d_hidden = j.at("d_hidden").get<std::int64_t>();
    cfg.d_skip = j.at("d_skip").get<std::int64_t>();
    cfg.dilations = j.at("dilations").get<std::vector<int>>();
    cfg.kernel = j.at("kernel").get<std::int64_t>();
    cfg.k_hops = j.at("k_hops").get<std::int64_t>();
    cfg.n_heads = j.at("n_heads").get<std::int64_t>();
    cfg.tau = j.at("tau").get<double>();
    cfg.d_embed = j.at("d_embed").get<std::int64_t>();
    cfg.use_node_embeddings = j.at("use_node_embeddings").get<bool>();
    cfg.use_sgt = j.at("use_sgt").get<bool>();
    cfg.mask_nonedges = j.at("mask_nonedges").get<bool>();
    cfg.input_len = j.at("input_len").get<std::int64_t>();
    cfg.horizon = j.at("horizon").get<std::int64_t>();
    return cfg;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const Scaler& scaler, std::uint64_t seed, const std::string& path) {
    nlohmann::json j;
    j["format"] = "gswan-checkpoint";
    j["version"] = kVersion;
    j["n_sensors"] = params.n_sensors;
    j["seed"] = seed;
    j["config"] = config_to_json(params.cfg);
    j["scaler"] = {{"mean", scaler.mean}, {"std", scaler.std}, {"tod_min", scaler.tod_min}, {"tod_max", scaler.tod_max}};
    nlohmann::json plist = nlohmann::json::array();
    for (const ParamEntry& p : params.params) {
        if (!p.value.all_finite()) throw NumericError("checkpoint: parameter '" + p.name + "' has non-finite values");
        plist.push_back({{"name", p.name}, {"shape", p.value.shape().extents()}, {"data", p.value.vec()}});
    }
    j["params"] = std::move(plist);
    nlohmann::json bn = nlohmann::json::array();
    for (const diff::BatchNormState& s : params.bn_states) {
        bn.push_back({{"mean", s.running_mean.vec()}, {"var", s.running_var.vec()}});
    }
    j["bn"] = std::move(bn);

    std::ofstream os(path);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    os << j.dump() << '\n';
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("checkpoint: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint: " + std::string(e.what()));
    }
    if (j.value("format", "") != "gswan-checkpoint") throw FormatError("checkpoint: unrecognized format field");
    if (j.value("version", -1) != kVersion) throw FormatError("checkpoint: unsupported version");

    LoadedCheckpoint out;
    out.seed = j.value("seed", 0ULL);
    out.params.cfg = config_from_json(j.at("config"));
    out.params.n_sensors = j.at("n_sensors").get<std::int64_t>();
    const auto& sc = j.at("scaler");
    out.scaler.mean = sc.at("mean").get<double>();
    out.scaler.std = sc.at("std").get<double>();
    out.scaler.tod_min = sc.at("tod_min").get<double>();
    out.scaler.tod_max = sc.at("tod_max").get<double>();

    for (const auto& p : j.at("params")) {
        const Shape shape(p.at("shape").get<std::vector<std::int64_t>>());
        out.params.params.push_back({p.at("name").get<std::string>(), Array(shape, p.at("data").get<std::vector<double>>())});
    }
    out.params.rebuild_index();
    for (const auto& b : j.at("bn")) {
        diff::BatchNormState st(0);
        std::vector<double> mean = b.at("mean").get<std::vector<double>>();
        std::vector<double> var = b.at("var").get<std::vector<double>>();
        const Shape mshape{static_cast<std::int64_t>(mean.size())};
        const Shape vshape{static_cast<std::int64_t>(var.size())};
        st.running_mean = Array(mshape, std::move(mean));
        st.running_var = Array(vshape, std::move(var));
        out.params.bn_states.push_back(std::move(st));
    }
    return out;
}

}  // namespace gswan
