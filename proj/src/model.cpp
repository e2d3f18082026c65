#include "gswan/model.hpp"

#include <cmath>
#include <stdexcept>

#include "gswan/errors.hpp"
#include "gswan/rng.hpp"

namespace gswan {

using diff::Act;
using diff::BnMode;
using diff::Tape;
using diff::Var;

std::int64_t ModelConfig::receptive_field() const {
    std::int64_t rf = 1;
    for (int d : dilations) rf += static_cast<std::int64_t>(d) * (kernel - 1);
    return rf;
}

void ModelConfig::validate() const {
    if (d_hidden <= 0 || d_skip <= 0 || d_embed <= 0 || horizon <= 0 || input_len <= 0) {
        throw ConfigError("model: extents must be positive");
    }
    if (kernel < 1) throw ConfigError("model: kernel must be >= 1");
    if (k_hops < 0) throw ConfigError("model: k_hops must be >= 0");
    if (n_heads < 1) throw ConfigError("model: n_heads must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("model: tau must be positive");
    if (dilations.empty()) throw ConfigError("model: at least one layer is required");
    for (int d : dilations) {
        if (d < 1) throw ConfigError("model: dilations must be >= 1");
    }
    if (receptive_field() < input_len) {
        throw ConfigError("model: receptive field " + std::to_string(receptive_field()) +
                          " is below the input length " + std::to_string(input_len) +
                          "; extend dilations so 1 + sum(d)*(kernel-1) >= " + std::to_string(input_len));
    }
}

std::int64_t ModelParams::index_of(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("model: unknown parameter '" + name + "'");
    return it->second;
}

Array& ModelParams::at(const std::string& name) { return params[static_cast<std::size_t>(index_of(name))].value; }
const Array& ModelParams::at(const std::string& name) const {
    return params[static_cast<std::size_t>(index_of(name))].value;
}

std::int64_t ModelParams::total_parameters() const {
    std::int64_t n = 0;
    for (const ParamEntry& p : params) n += p.value.size();
    return n;
}

void ModelParams::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!index_.emplace(params[i].name, static_cast<std::int64_t>(i)).second) {
            throw std::invalid_argument("model: parameter '" + params[i].name + "' registered twice");
        }
    }
}

namespace {

std::int64_t concat_width(const ModelConfig& cfg) {
    const std::int64_t branches = 2;
    const std::int64_t heads = cfg.use_sgt ? cfg.n_heads : 1;
    return branches * heads * (cfg.k_hops + 1) * cfg.d_hidden;
}

struct Initializer {
    ModelParams& out;
    Rng& rng;

    void glorot(const std::string& name, Shape shape, std::int64_t fan_in, std::int64_t fan_out) {
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Array w(shape);
        for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-a, a);
        out.params.push_back({name, std::move(w)});
    }
    void zeros(const std::string& name, Shape shape) { out.params.push_back({name, Array(shape)}); }
    void ones(const std::string& name, Shape shape) { out.params.push_back({name, Array(shape, 1.0)}); }
    // fc pair: weight [fan_out, fan_in] for channel maps, [fan_in, fan_out] for feature maps
    void fc_channel(const std::string& prefix, std::int64_t c_in, std::int64_t c_out) {
        glorot(prefix + ".w", Shape{c_out, c_in}, c_in, c_out);
        zeros(prefix + ".b", Shape{c_out});
    }
    void fc_feature(const std::string& prefix, std::int64_t d_in, std::int64_t d_out) {
        glorot(prefix + ".w", Shape{d_in, d_out}, d_in, d_out);
        zeros(prefix + ".b", Shape{d_out});
    }
};

}  // namespace

ModelParams init_model(const ModelConfig& cfg, std::int64_t n_sensors, std::uint64_t seed) {
    cfg.validate();
    if (n_sensors < 1) throw ConfigError("model: need at least one sensor");

    ModelParams mp;
    mp.cfg = cfg;
    mp.n_sensors = n_sensors;
    Rng rng(derive_seed(seed, "init"));
    Initializer ini{mp, rng};

    const std::int64_t D = cfg.d_hidden;
    ini.fc_channel("embed.metric", 1, D);
    ini.fc_channel("embed.tod", 1, D);

    for (int i = 0; i < cfg.n_layers(); ++i) {
        const std::string L = "layer" + std::to_string(i);
        ini.glorot(L + ".filter.w", Shape{D, D, 1, cfg.kernel}, D * cfg.kernel, D * cfg.kernel);
        ini.zeros(L + ".filter.b", Shape{D});
        ini.glorot(L + ".gate.w", Shape{D, D, 1, cfg.kernel}, D * cfg.kernel, D * cfg.kernel);
        ini.zeros(L + ".gate.b", Shape{D});
        if (cfg.use_sgt) {
            ini.fc_feature(L + ".pool", D, cfg.d_embed);
            for (int h = 0; h < cfg.n_heads; ++h) {
                const std::string H = L + ".head" + std::to_string(h);
                ini.fc_feature(H + ".key", cfg.d_embed, cfg.d_embed);
                ini.fc_feature(H + ".query", cfg.d_embed, cfg.d_embed);
            }
        }
        ini.fc_channel(L + ".mix1", concat_width(cfg), D);
        ini.fc_channel(L + ".mix2", D, D);
        ini.fc_channel(L + ".residual", D, D);
        ini.fc_channel(L + ".skip_t", D, cfg.d_skip);
        ini.fc_channel(L + ".skip_s", D, cfg.d_skip);
        ini.ones(L + ".bn.gamma", Shape{D});
        ini.zeros(L + ".bn.beta", Shape{D});
        mp.bn_states.emplace_back(D);
    }

    ini.fc_channel("decoder.fc1", cfg.d_skip, cfg.d_skip);
    ini.fc_channel("decoder.fc2", cfg.d_skip, cfg.horizon);

    for (const char* name : {"nodes.e1", "nodes.e2"}) {
        Array e(Shape{n_sensors, cfg.d_embed});
        for (std::int64_t i = 0; i < e.size(); ++i) e[i] = rng.normal() * 0.1;
        mp.params.push_back({name, std::move(e)});
    }

    mp.rebuild_index();
    return mp;
}

ModelVars stage_params(Tape& tape, const ModelParams& params) {
    ModelVars v;
    v.vars.reserve(params.params.size());
    for (const ParamEntry& p : params.params) v.vars.push_back(tape.leaf(p.value, p.name));
    return v;
}

Var adaptive_adjacency(Tape& tape, Var e_src, Var e_tgt) {
    (void)tape;
    Var scores = diff::relu(diff::matmul(e_src, diff::transpose_last2(e_tgt)));
    return diff::softmax(scores, 1.0, 1);
}

Array adaptive_adjacency_value(const ModelParams& params) {
    Tape tape;
    Var e1 = tape.leaf(params.at("nodes.e1"));
    Var e2 = tape.leaf(params.at("nodes.e2"));
    return adaptive_adjacency(tape, e1, e2).value();
}

ModelGraph::ModelGraph(Tape& tape, ModelParams& params, const ModelVars& vars, const Array& a_r, BnMode mode)
    : tape_(tape), params_(params), vars_(vars), mode_(mode) {
    const std::int64_t n = params.n_sensors;
    if (a_r.shape() != Shape{n, n}) {
        throw std::invalid_argument("model: adjacency " + a_r.shape().str() + " does not match sensor count " +
                                    std::to_string(n));
    }
    a_r_ = tape_.leaf(a_r, "a_r");
    Array ap = a_r;
    for (std::int64_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::int64_t j = 0; j < n; ++j) row += ap.at(i, j);
        for (std::int64_t j = 0; j < n; ++j) ap.at(i, j) = row > 0.0 ? ap.at(i, j) / row : 0.0;
    }
    a_p_ = tape_.leaf(std::move(ap), "a_p");
    nonedge_mask_ = Array(Shape{n, n});
    for (std::int64_t i = 0; i < n * n; ++i) nonedge_mask_[i] = a_r[i] != 0.0 ? 1.0 : 0.0;
    a_adp_ = adaptive_adjacency(tape_, param("nodes.e1"), param("nodes.e2"));
}

Var ModelGraph::param(const std::string& name) {
    return vars_.vars[static_cast<std::size_t>(params_.index_of(name))];
}

Var ModelGraph::fc_channel(Var x, const std::string& prefix) {
    Var w = param(prefix + ".w");
    Var b = param(prefix + ".b");
    const std::int64_t c_out = w.shape()[0], c_in = w.shape()[1];
    Var w4 = diff::reshape(w, Shape{c_out, c_in, 1, 1});
    Var y = diff::conv1d(x, w4, 1);
    return diff::add(y, diff::reshape(b, Shape{1, c_out, 1, 1}));
}

Var ModelGraph::fc_feature(Var x, const std::string& prefix) {
    return diff::add(diff::matmul(x, param(prefix + ".w")), param(prefix + ".b"));
}

Var ModelGraph::initial_embed(Var metric, Var tod) {
    return diff::add(fc_channel(metric, "embed.metric"), fc_channel(tod, "embed.tod"));
}

Var ModelGraph::wavenet_block(Var h, int layer) {
    const std::string L = "layer" + std::to_string(layer);
    const int d = params_.cfg.dilations[static_cast<std::size_t>(layer)];
    const std::int64_t D = params_.cfg.d_hidden;
    Var f = diff::add(diff::conv1d(h, param(L + ".filter.w"), d), diff::reshape(param(L + ".filter.b"), Shape{1, D, 1, 1}));
    Var g = diff::add(diff::conv1d(h, param(L + ".gate.w"), d), diff::reshape(param(L + ".gate.b"), Shape{1, D, 1, 1}));
    return diff::mul(diff::tanh(f), diff::sigmoid(g));
}

std::vector<Var> ModelGraph::sgt_attention(Var adjacency, Var x, int layer, bool physical_branch) {
    const ModelConfig& cfg = params_.cfg;
    const std::string L = "layer" + std::to_string(layer);
    Var xbar = diff::reduce_mean_axis(x, 3);       // [B,D,N]
    Var xbt = diff::transpose_last2(xbar);         // [B,N,D]
    Var pooled = fc_feature(xbt, L + ".pool");     // [B,N,d_embed]

    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(cfg.n_heads));
    for (int h = 0; h < cfg.n_heads; ++h) {
        const std::string H = L + ".head" + std::to_string(h);
        Var kin = pooled, qin = pooled;
        if (cfg.use_node_embeddings) {
            kin = diff::add(pooled, param("nodes.e1"));
            qin = diff::add(pooled, param("nodes.e2"));
        }
        Var key = fc_feature(kin, H + ".key");      // [B,N,d_embed]
        Var query = fc_feature(qin, H + ".query");  // [B,N,d_embed]
        Var scores = diff::mul(adjacency, diff::matmul(query, diff::transpose_last2(key)));  // [B,N,N]
        Var sig = diff::sigmoid(scores);
        if (cfg.mask_nonedges && physical_branch) {
            Var mask = tape_.leaf(nonedge_mask_, "edge_mask");
            Array off(nonedge_mask_.shape());
            for (std::int64_t i = 0; i < off.size(); ++i) off[i] = nonedge_mask_[i] == 0.0 ? -1e30 : 0.0;
            sig = diff::add(diff::mul(sig, mask), tape_.leaf(std::move(off), "edge_mask_off"));
        }
        heads.push_back(diff::softmax(sig, cfg.tau, 2));
    }
    return heads;
}

Var ModelGraph::sgt_block(Var x, int layer) {
    const ModelConfig& cfg = params_.cfg;
    const std::string L = "layer" + std::to_string(layer);

    std::vector<Var> propagation_matrices;
    if (cfg.use_sgt) {
        for (Var alpha : sgt_attention(a_r_, x, layer, true)) propagation_matrices.push_back(alpha);
        for (Var alpha : sgt_attention(a_adp_, x, layer, false)) propagation_matrices.push_back(alpha);
    } else {
        propagation_matrices.push_back(a_p_);
        propagation_matrices.push_back(a_adp_);
    }

    std::vector<Var> hops;
    for (Var m : propagation_matrices) {
        Var z = x;  // hop 0: identity
        hops.push_back(z);
        for (std::int64_t k = 1; k <= cfg.k_hops; ++k) {
            z = diff::propagate(z, m);
            hops.push_back(z);
        }
    }
    Var cat = diff::concat_channels(hops);
    Var mixed = fc_channel(diff::mish(fc_channel(cat, L + ".mix1")), L + ".mix2");
    return mixed;
}

Var ModelGraph::forward(Var input) {
    const ModelConfig& cfg = params_.cfg;
    const Shape& s = input.shape();
    if (s.rank() != 4 || s[1] != 2 || s[3] != cfg.input_len || s[2] != params_.n_sensors) {
        throw std::invalid_argument("model: expected input [B,2," + std::to_string(params_.n_sensors) + "," +
                                    std::to_string(cfg.input_len) + "], got " + s.str());
    }
    const std::int64_t rf = cfg.receptive_field();
    Var x = input;
    if (rf > cfg.input_len) x = diff::pad_last_left(x, rf - cfg.input_len);
    Var metric = diff::slice(x, 1, 0, 1);
    Var tod = diff::slice(x, 1, 1, 1);
    Var h = initial_embed(metric, tod);

    std::int64_t cur_len = rf;
    bool have_skip = false;
    Var skip;
    for (int i = 0; i < cfg.n_layers(); ++i) {
        const std::string L = "layer" + std::to_string(i);
        Var t = wavenet_block(h, i);
        cur_len -= static_cast<std::int64_t>(cfg.dilations[static_cast<std::size_t>(i)]) * (cfg.kernel - 1);
        Var sp = sgt_block(t, i);
        Var sb = diff::batch_norm(sp, param(L + ".bn.gamma"), param(L + ".bn.beta"),
                                  params_.bn_states[static_cast<std::size_t>(i)], mode_);
        Var skip_in = diff::add(fc_channel(diff::slice(t, 3, cur_len - 1, 1), L + ".skip_t"),
                                fc_channel(diff::slice(sb, 3, cur_len - 1, 1), L + ".skip_s"));
        skip = have_skip ? diff::add(skip, skip_in) : skip_in;
        have_skip = true;
        Var res = fc_channel(diff::slice(h, 3, h.shape()[3] - cur_len, cur_len), L + ".residual");
        h = diff::add(sb, res);
    }

    Var decoded = fc_channel(diff::mish(fc_channel(skip, "decoder.fc1")), "decoder.fc2");  // [B,F,N,1]
    const std::int64_t B = s[0];
    return diff::reshape(decoded, Shape{B, cfg.horizon, params_.n_sensors});
}

Var stack_heads(const std::vector<Var>& heads) {
    std::vector<Var> lifted;
    lifted.reserve(heads.size());
    for (Var h : heads) {
        const Shape& s = h.shape();
        lifted.push_back(diff::reshape(h, Shape{s[0], 1, s[1], s[2]}));
    }
    return diff::concat_channels(lifted);
}

Array assemble_batch_inputs(const std::vector<Window>& windows, const std::vector<std::int64_t>& order,
                            std::int64_t begin, std::int64_t count) {
    if (windows.empty() || count <= 0) throw std::invalid_argument("assemble_batch_inputs: empty batch");
    const Array& first = windows[static_cast<std::size_t>(order[static_cast<std::size_t>(begin)])].input;
    const std::int64_t n = first.extent(1), len = first.extent(2);
    Array out(Shape{count, 2, n, len});
    for (std::int64_t b = 0; b < count; ++b) {
        const Array& in = windows[static_cast<std::size_t>(order[static_cast<std::size_t>(begin + b)])].input;
        for (std::int64_t c = 0; c < 2; ++c)
            for (std::int64_t i = 0; i < n; ++i)
                for (std::int64_t t = 0; t < len; ++t) out.at(b, c, i, t) = in.at(c, i, t);
    }
    return out;
}

Array assemble_batch_targets(const std::vector<Window>& windows, const std::vector<std::int64_t>& order,
                             std::int64_t begin, std::int64_t count) {
    if (windows.empty() || count <= 0) throw std::invalid_argument("assemble_batch_targets: empty batch");
    const Array& first = windows[static_cast<std::size_t>(order[static_cast<std::size_t>(begin)])].target;
    const std::int64_t n = first.extent(0), f = first.extent(1);
    Array out(Shape{count, f, n});
    for (std::int64_t b = 0; b < count; ++b) {
        const Array& tg = windows[static_cast<std::size_t>(order[static_cast<std::size_t>(begin + b)])].target;
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t t = 0; t < f; ++t) out.at(b, t, i) = tg.at(i, t);
    }
    return out;
}

}  // namespace gswan
