#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spherelab/autodiff.hpp"
#include "spherelab/hyperp.hpp"
#include "spherelab/linalg.hpp"

namespace spherelab::model {

using hyperp::Group;
using hyperp::Scheme;

struct MoeConfig {
    int sparsity = 2;          // S
    int granularity = 2;       // k (active routed experts incl. the shared slot)
    bool shared_expert = true;
    bool sqrt_gate = true;
    double aux_weight = 0.1;   // gamma
};

struct AttnConfig {
    bool qk_norm = true;
    bool gated = true;
};

struct ModelConfig {
    int depth = 2;
    int aspect_ratio = 16;     // width = aspect_ratio * depth
    int n_head = 0;            // 0 -> 2 * depth
    int kv_heads = 4;
    int head_dim = 8;
    int vocab = 256;
    int context = 128;
    int mlp_mult = 4;
    std::optional<MoeConfig> moe;
    AttnConfig attn;
    Scheme scheme = Scheme::HyperP;
    bool rotary = true;
    bool depth_scaled_residual = true;  // ablation switch: false drops the 1/sqrt(2d) factor
    int anchor_width = 0;      // 0 -> own width (multiplier 1 at the anchor)

    int width() const { return aspect_ratio * depth; }
    int heads() const { return n_head > 0 ? n_head : 2 * depth; }
    int q_width() const { return heads() * head_dim; }
    int kv_width() const { return kv_heads * head_dim; }
    int dense_inter() const { return mlp_mult * width(); }

    // MoE geometry: with a shared expert the layer routes top-(k-1) over a
    // pool of k*S-1; without it, top-k over k*S. Expert width shrinks so the
    // active parameter count matches the dense model.
    int routed_pool() const;
    int route_select() const;
    int expert_inter() const;

    double residual_multiplier() const;
    double unembed_weight_mult() const;

    void validate() const;  // throws std::invalid_argument on inconsistency
};

struct ParamSpec {
    std::string name;
    int d_out = 0;
    int d_in = 0;  // vectors are stored as (1, len) row matrices
    Group group = Group::Hidden;
    int layer = -1;  // -1 for globals
};

struct ParamSet {
    std::vector<ParamSpec> specs;
    std::map<std::string, Mat> values;

    const Mat& get(const std::string& name) const;
    Mat& get(const std::string& name);
};

/// Enumerate every trainable tensor of the model (shapes only).
std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

/// Kaiming-uniform init for hidden matrices, width-independent uniform init
/// (std kEmbedInitStd) for embedding/unembedding, gains start at 1.
/// Deterministic for a fixed seed.
ParamSet build_params(const ModelConfig& cfg, uint64_t seed);

constexpr double kEmbedInitStd = 0.02;

/// Matmul parameter count entering the forward pass once per token (active
/// experts only for MoE); used by the FLOPs accounting.
long long active_matmul_params(const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Whole-model loss graph.

struct LayerNodes {
    std::vector<autodiff::NodeId> attn_scores;  // per head, (n x n) pre-mask scaled scores
    autodiff::NodeId router_logits = -1;
    autodiff::NodeId router_probs = -1;  // full-pool softmax (aux-loss seed point)
    autodiff::NodeId topk = -1;
    autodiff::NodeId attn_branch = -1;   // post residual-multiplier
    autodiff::NodeId mlp_branch = -1;
};

struct LossGraph {
    autodiff::Graph graph;
    std::vector<LayerNodes> layers;
    autodiff::NodeId lm_logits = -1;
    autodiff::NodeId loss = -1;
    int n_tokens = 0;
};

/// Build the next-token loss graph for sequences of n_tokens predicted
/// positions. Bind "tokens" and "targets" (int vectors of length n_tokens)
/// plus every parameter by name.
LossGraph build_loss_graph(const ModelConfig& cfg, int n_tokens);

// ---------------------------------------------------------------------------
// Standalone per-operation surfaces (evaluate small graphs internally).

struct AttentionResult {
    Mat y;  // (n x w) attention output, no residual
    std::vector<std::vector<std::vector<double>>> causal_score_rows;  // [head][query] ragged
};

/// Pure attention map: q/k/v and the gate all read the given x.
AttentionResult attention_forward(const Mat& x, const ParamSet& params, const ModelConfig& cfg,
                                  int layer);

struct MoeResult {
    Mat y;                 // (n x w)
    Mat router_logits;     // (n x pool)
    std::vector<long> dispatch_counts;  // per expert
};

MoeResult moe_forward(const Mat& x, const ParamSet& params, const ModelConfig& cfg, int layer);

/// Full pre-norm block: x + a*Attn(Norm(x)) then + a*MLP/MoE(Norm(.)).
Mat block_forward(const Mat& x, const ParamSet& params, const ModelConfig& cfg, int layer);

struct BatchActivations {
    struct Layer {
        std::vector<std::vector<std::vector<double>>> attn_score_rows;  // [head][query] causal
        Mat router_logits;                  // empty for dense layers
        std::vector<long> dispatch_counts;  // empty for dense layers
        Mat attn_branch;
        Mat mlp_branch;
    };
    std::vector<Layer> layers;
    Mat lm_logits;
};

/// Mean next-token cross-entropy in nats plus the recorded activations.
/// tokens = the raw id stream; position i predicts tokens[i+1].
std::pair<double, BatchActivations> lm_loss(const std::vector<int>& tokens, const ParamSet& params,
                                            const ModelConfig& cfg);

/// Switch-style load balancing loss over hard counts and router probabilities.
double aux_balance_loss(const std::vector<long>& counts, const Mat& router_probs, double gamma);

/// Pull concrete activation values out of an evaluated loss graph.
BatchActivations extract_activations(const LossGraph& lg, const autodiff::Evaluation& eval,
                                     const ModelConfig& cfg);

}  // namespace spherelab::model
