#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gswan/array.hpp"
#include "gswan/dataset.hpp"
#include "gswan/tape.hpp"

namespace gswan {

// Network hyperparameters. The temporal stack must cover the whole input
// window: 1 + sum(dilations)*(kernel-1) >= input_len.
struct ModelConfig {
    std::int64_t d_hidden = 40;  // latent channels per layer
    std::int64_t d_skip = 80;    // skip/decoder width
    std::vector<int> dilations = {1, 2, 1, 2, 1, 2, 1, 2};
    std::int64_t kernel = 2;
    std::int64_t k_hops = 2;   // spatial propagation depth, hop 0 = identity
    std::int64_t n_heads = 4;  // attention heads
    double tau = 1.0;          // attention softmax temperature
    std::int64_t d_embed = 10;
    bool use_node_embeddings = true;  // fuse embeddings into queries/keys
    bool use_sgt = true;              // off = static graph convolution
    bool mask_nonedges = false;       // drop non-edges from physical attention rows
    std::int64_t input_len = 12;
    std::int64_t horizon = 12;

    int n_layers() const { return static_cast<int>(dilations.size()); }
    std::int64_t receptive_field() const;
    void validate() const;
};

struct ParamEntry {
    std::string name;
    Array value;
};

// Every learnable value, registered exactly once in a stable order, plus
// the per-layer batch-norm running statistics.
struct ModelParams {
    ModelConfig cfg;
    std::int64_t n_sensors = 0;
    std::vector<ParamEntry> params;
    std::vector<diff::BatchNormState> bn_states;

    std::int64_t index_of(const std::string& name) const;
    Array& at(const std::string& name);
    const Array& at(const std::string& name) const;
    std::int64_t total_parameters() const;

    void rebuild_index();

private:
    std::unordered_map<std::string, std::int64_t> index_;
};

// Uniform(-a, a) with a = sqrt(6/(fan_in+fan_out)) for weights, zero biases,
// unit batch-norm scales, and N(0,1)*0.1 node embeddings; deterministic per seed.
ModelParams init_model(const ModelConfig& cfg, std::int64_t n_sensors, std::uint64_t seed);

// Tape leaves for every parameter, aligned with the registry order.
struct ModelVars {
    std::vector<diff::Var> vars;
};
ModelVars stage_params(diff::Tape& tape, const ModelParams& params);

// Row-stochastic adaptive adjacency from the node embeddings.
diff::Var adaptive_adjacency(diff::Tape& tape, diff::Var e_src, diff::Var e_tgt);
Array adaptive_adjacency_value(const ModelParams& params);

// One forward construction over a tape. Holds references to the parameters
// (batch-norm state is updated in train mode) and the staged leaves.
class ModelGraph {
public:
    ModelGraph(diff::Tape& tape, ModelParams& params, const ModelVars& vars, const Array& a_r, diff::BnMode mode);

    // [B,2,N,input_len] -> [B,horizon,N]
    diff::Var forward(diff::Var input);

    diff::Var initial_embed(diff::Var metric, diff::Var tod);
    diff::Var wavenet_block(diff::Var h, int layer);
    diff::Var sgt_block(diff::Var x, int layer);
    // per-head input-conditioned attention over one adjacency; each entry [B,N,N]
    std::vector<diff::Var> sgt_attention(diff::Var adjacency, diff::Var x, int layer, bool physical_branch);
    diff::Var adaptive() { return a_adp_; }
    diff::Var param(const std::string& name);

private:
    diff::Var fc_channel(diff::Var x, const std::string& prefix);  // 1x1 conv over channels
    diff::Var fc_feature(diff::Var x, const std::string& prefix);  // right-multiply on last axis

    diff::Tape& tape_;
    ModelParams& params_;
    const ModelVars& vars_;
    diff::BnMode mode_;
    diff::Var a_r_;
    diff::Var a_p_;  // row-normalized physical adjacency, used when use_sgt is off
    diff::Var a_adp_;
    Array nonedge_mask_;  // 1 on physical edges/diagonal, 0 elsewhere
};

// stack per-head [B,N,N] attention matrices into [B,H,N,N]
diff::Var stack_heads(const std::vector<diff::Var>& heads);

// Batch assembly from windows (channels 0 and 1 only); targets come out
// as [B,F,N] to match the model output layout.
Array assemble_batch_inputs(const std::vector<Window>& windows, const std::vector<std::int64_t>& order,
                            std::int64_t begin, std::int64_t count);
Array assemble_batch_targets(const std::vector<Window>& windows, const std::vector<std::int64_t>& order,
                             std::int64_t begin, std::int64_t count);

}  // namespace gswan
