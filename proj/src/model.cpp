#include "spherelab/model.hpp"

#include <cmath>
#include <stdexcept>

namespace spherelab::model {

using autodiff::Graph;
using autodiff::NodeId;

int ModelConfig::routed_pool() const {
    if (!moe) return 0;
    return moe->shared_expert ? moe->granularity * moe->sparsity - 1
                              : moe->granularity * moe->sparsity;
}

int ModelConfig::route_select() const {
    if (!moe) return 0;
    return moe->shared_expert ? moe->granularity - 1 : moe->granularity;
}

int ModelConfig::expert_inter() const {
    if (!moe) return 0;
    const double raw = static_cast<double>(mlp_mult) * width() / moe->granularity;
    long long even = std::llround(raw / 2.0) * 2;  // round to nearest even
    return static_cast<int>(std::max(2LL, even));
}

double ModelConfig::residual_multiplier() const {
    if (scheme == Scheme::MuP || !depth_scaled_residual) return 1.0;
    return 1.0 / std::sqrt(2.0 * depth);
}

double ModelConfig::unembed_weight_mult() const {
    if (scheme == Scheme::HyperP) return 1.0;
    const int w0 = anchor_width > 0 ? anchor_width : width();
    return static_cast<double>(w0) / width();
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
    if (depth < 1) fail("depth must be >= 1");
    if (aspect_ratio < 1) fail("aspect_ratio must be >= 1");
    if (head_dim < 2 || head_dim % 2 != 0) fail("head_dim must be even and >= 2 (rotary pairs)");
    if (kv_heads < 1) fail("kv_heads must be >= 1");
    if (heads() % kv_heads != 0) fail("n_head must be divisible by kv_heads");
    if (vocab < 2) fail("vocab must be >= 2");
    if (context < 2) fail("context must be >= 2");
    if (mlp_mult < 1) fail("mlp_mult must be >= 1");
    if (moe) {
        if (moe->sparsity < 1) fail("moe sparsity must be >= 1");
        if (moe->granularity < 1) fail("moe granularity must be >= 1");
        if (route_select() < 1) fail("moe must route at least one expert (k-1 >= 1 with shared)");
        if (route_select() > routed_pool()) fail("top-k exceeds the expert pool");
        if (moe->aux_weight < 0) fail("aux weight must be >= 0");
    }
}

const Mat& ParamSet::get(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
    return it->second;
}

Mat& ParamSet::get(const std::string& name) {
    auto it = values.find(name);
    if (it == values.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
    return it->second;
}

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
    cfg.validate();
    const int w = cfg.width();
    std::vector<ParamSpec> specs;
    auto mat = [&](const std::string& n, int dout, int din, Group g, int layer) {
        specs.push_back({n, dout, din, g, layer});
    };
    auto gain = [&](const std::string& n, int len, int layer) {
        specs.push_back({n, 1, len, Group::EmbeddingVector, layer});
    };

    mat("embed", cfg.vocab, w, Group::EmbeddingVector, -1);
    for (int l = 0; l < cfg.depth; ++l) {
        const std::string p = "L" + std::to_string(l) + ".";
        gain(p + "attn_norm_g", w, l);
        mat(p + "wq", cfg.q_width(), w, Group::Hidden, l);
        mat(p + "wk", cfg.kv_width(), w, Group::Hidden, l);
        mat(p + "wv", cfg.kv_width(), w, Group::Hidden, l);
        if (cfg.attn.gated) mat(p + "wgate", cfg.heads(), w, Group::Hidden, l);
        if (cfg.attn.qk_norm) {
            gain(p + "qnorm_g", cfg.head_dim, l);
            gain(p + "knorm_g", cfg.head_dim, l);
        }
        mat(p + "wo", w, cfg.q_width(), Group::Hidden, l);
        gain(p + "mlp_norm_g", w, l);
        if (cfg.moe) {
            mat(p + "router", cfg.routed_pool(), w, Group::Hidden, l);
            const int m = cfg.expert_inter();
            for (int e = 0; e < cfg.routed_pool(); ++e) {
                const std::string ep = p + "e" + std::to_string(e) + ".";
                mat(ep + "wg", m, w, Group::Hidden, l);
                mat(ep + "wu", m, w, Group::Hidden, l);
                mat(ep + "wd", w, m, Group::Hidden, l);
            }
            if (cfg.moe->shared_expert) {
                mat(p + "shared.wg", m, w, Group::Hidden, l);
                mat(p + "shared.wu", m, w, Group::Hidden, l);
                mat(p + "shared.wd", w, m, Group::Hidden, l);
            }
        } else {
            const int m = cfg.dense_inter();
            mat(p + "mlp.wg", m, w, Group::Hidden, l);
            mat(p + "mlp.wu", m, w, Group::Hidden, l);
            mat(p + "mlp.wd", w, m, Group::Hidden, l);
        }
    }
    gain("final_norm_g", w, -1);
    mat("unembed", cfg.vocab, w, Group::Unembedding, -1);
    return specs;
}

ParamSet build_params(const ModelConfig& cfg, uint64_t seed) {
    ParamSet ps;
    ps.specs = param_specs(cfg);
    Rng rng(seed);
    const double embed_bound = kEmbedInitStd * std::sqrt(3.0);  // uniform with std 0.02
    for (const auto& s : ps.specs) {
        const bool is_gain = s.name.ends_with("_g");
        if (is_gain) {
            ps.values[s.name] = Mat::filled(s.d_out, s.d_in, 1.0);
            continue;
        }
        Mat m(s.d_out, s.d_in);
        if (s.group == Group::Hidden) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(s.d_in));
            for (double& x : m.v) x = rng.uniform(-bound, bound);
        } else {
            for (double& x : m.v) x = rng.uniform(-embed_bound, embed_bound);
        }
        ps.values[s.name] = std::move(m);
    }
    return ps;
}

long long active_matmul_params(const ModelConfig& cfg) {
    long long total = 0;
    const int w = cfg.width();
    total += static_cast<long long>(cfg.vocab) * w;  // embedding
    total += static_cast<long long>(cfg.vocab) * w;  // lm head
    for (int l = 0; l < cfg.depth; ++l) {
        total += static_cast<long long>(cfg.q_width()) * w;      // wq
        total += 2LL * cfg.kv_width() * w;                       // wk, wv
        if (cfg.attn.gated) total += static_cast<long long>(cfg.heads()) * w;
        total += static_cast<long long>(w) * cfg.q_width();      // wo
        if (cfg.moe) {
            total += static_cast<long long>(cfg.routed_pool()) * w;  // router scores all experts
            const long long expert = 3LL * cfg.expert_inter() * w;
            long long active = cfg.route_select();
            if (cfg.moe->shared_expert) active += 1;
            total += active * expert;
        } else {
            total += 3LL * cfg.dense_inter() * w;
        }
    }
    return total;
}

namespace {

// Constant (from x cols) column selector: picks cols [off, off+n) as an
// (in x n) matmul operand.
Mat col_selector(int in, int off, int n) {
    Mat s(in, n);
    for (int j = 0; j < n; ++j) s.at(off + j, j) = 1.0;
    return s;
}

// Places an (rows x n) block back into width `out` at column offset.
Mat col_placer(int n, int out, int off) {
    Mat s(n, out);
    for (int j = 0; j < n; ++j) s.at(j, off + j) = 1.0;
    return s;
}

Mat causal_mask(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) m.at(i, j) = -1e9;
    return m;
}

// Rotary tables and the pair-swap operator: x_rot = x*COS + (x*SWAP)*SIN.
struct RotaryConsts {
    Mat cos_t, sin_t, swap;
};

RotaryConsts rotary_consts(int n, int head_dim) {
    RotaryConsts rc{Mat(n, head_dim), Mat(n, head_dim), Mat(head_dim, head_dim)};
    for (int p = 0; p < head_dim / 2; ++p) {
        const double theta = std::pow(10000.0, -2.0 * p / head_dim);
        for (int t = 0; t < n; ++t) {
            const double a = t * theta;
            rc.cos_t.at(t, 2 * p) = std::cos(a);
            rc.cos_t.at(t, 2 * p + 1) = std::cos(a);
            rc.sin_t.at(t, 2 * p) = std::sin(a);
            rc.sin_t.at(t, 2 * p + 1) = std::sin(a);
        }
        rc.swap.at(2 * p + 1, 2 * p) = -1.0;  // (x*SWAP)[2p] = -x[2p+1]
        rc.swap.at(2 * p, 2 * p + 1) = 1.0;   // (x*SWAP)[2p+1] = x[2p]
    }
    return rc;
}

struct Builder {
    Graph& g;
    const ModelConfig& cfg;
    int n;  // token count
    std::map<std::string, NodeId> params;

    NodeId param(const std::string& name, int dout, int din) {
        auto it = params.find(name);
        if (it != params.end()) return it->second;
        NodeId id = g.input(name, dout, din);
        params[name] = id;
        return id;
    }

    NodeId linear(NodeId x, const std::string& wname, int dout, int din) {
        return g.matmul(x, g.transpose(param(wname, dout, din)));
    }

    NodeId rms_gain(NodeId x, const std::string& gname, int len) {
        return g.ew_mul(g.rms_norm(x), param(gname, 1, len));
    }

    // Attention over qkv_src with the sigmoid gate reading gate_src.
    NodeId attention(NodeId qkv_src, NodeId gate_src, int layer, LayerNodes* rec) {
        const std::string p = "L" + std::to_string(layer) + ".";
        const int w = cfg.width();
        const int hd = cfg.head_dim;
        const int nh = cfg.heads();
        const int group_size = nh / cfg.kv_heads;

        NodeId q = linear(qkv_src, p + "wq", cfg.q_width(), w);
        NodeId k = linear(qkv_src, p + "wk", cfg.kv_width(), w);
        NodeId v = linear(qkv_src, p + "wv", cfg.kv_width(), w);

        NodeId gate = -1;
        if (cfg.attn.gated)
            gate = g.sigmoid(linear(gate_src, p + "wgate", nh, w));

        NodeId mask = g.constant(causal_mask(n), "causal_mask");
        NodeId cos_t = -1, sin_t = -1, swp = -1;
        if (cfg.rotary) {
            RotaryConsts rc = rotary_consts(n, hd);
            cos_t = g.constant(std::move(rc.cos_t), "rope_cos");
            sin_t = g.constant(std::move(rc.sin_t), "rope_sin");
            swp = g.constant(std::move(rc.swap), "rope_swap");
        }

        NodeId ctx_all = -1;
        for (int h = 0; h < nh; ++h) {
            NodeId qh = g.matmul(q, g.constant(col_selector(cfg.q_width(), h * hd, hd)));
            const int kv = (h / group_size) * hd;
            NodeId kh = g.matmul(k, g.constant(col_selector(cfg.kv_width(), kv, hd)));
            NodeId vh = g.matmul(v, g.constant(col_selector(cfg.kv_width(), kv, hd)));
            if (cfg.attn.qk_norm) {
                qh = g.ew_mul(g.rms_norm(qh), param(p + "qnorm_g", 1, hd));
                kh = g.ew_mul(g.rms_norm(kh), param(p + "knorm_g", 1, hd));
            }
            if (cfg.rotary) {
                qh = g.add(g.ew_mul(qh, cos_t), g.ew_mul(g.matmul(qh, swp), sin_t));
                kh = g.add(g.ew_mul(kh, cos_t), g.ew_mul(g.matmul(kh, swp), sin_t));
            }
            NodeId scores = g.scalar_mul(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(hd));
            if (rec) rec->attn_scores.push_back(scores);
            NodeId probs = g.row_softmax(g.add(scores, mask));
            NodeId ctx = g.matmul(probs, vh);
            if (cfg.attn.gated) {
                NodeId gcol = g.matmul(gate, g.constant(col_selector(nh, h, 1)));
                ctx = g.ew_mul(ctx, gcol);
            }
            NodeId placed = g.matmul(ctx, g.constant(col_placer(hd, cfg.q_width(), h * hd)));
            ctx_all = (ctx_all < 0) ? placed : g.add(ctx_all, placed);
        }
        return linear(ctx_all, p + "wo", w, cfg.q_width());
    }

    NodeId swiglu(NodeId x, const std::string& prefix, int inter) {
        const int w = cfg.width();
        NodeId a = g.silu(linear(x, prefix + "wg", inter, w));
        NodeId b = linear(x, prefix + "wu", inter, w);
        return linear(g.ew_mul(a, b), prefix + "wd", w, inter);
    }

    NodeId moe(NodeId x, int layer, LayerNodes* rec) {
        const std::string p = "L" + std::to_string(layer) + ".";
        const int w = cfg.width();
        const int pool = cfg.routed_pool();
        const int sel = cfg.route_select();

        NodeId rl = linear(x, p + "router", pool, w);
        NodeId fp = g.row_softmax(rl);
        NodeId tk = g.topk(rl, sel);
        NodeId gates = g.row_softmax(tk);  // softmax after top-k selection
        NodeId comb = cfg.moe->sqrt_gate ? g.exp(g.scalar_mul(g.log(gates), 0.5)) : gates;
        NodeId gmat = g.scatter_cols(comb, tk, pool);
        if (rec) {
            rec->router_logits = rl;
            rec->router_probs = fp;
            rec->topk = tk;
        }

        NodeId routed = -1;
        for (int e = 0; e < pool; ++e) {
            NodeId out = swiglu(x, p + "e" + std::to_string(e) + ".", cfg.expert_inter());
            NodeId gcol = g.matmul(gmat, g.constant(col_selector(pool, e, 1)));
            NodeId weighted = g.ew_mul(out, gcol);
            routed = (routed < 0) ? weighted : g.add(routed, weighted);
        }
        if (cfg.moe->shared_expert) {
            NodeId shared = swiglu(x, p + "shared.", cfg.expert_inter());
            routed = g.scalar_mul(g.add(routed, shared), 1.0 / std::sqrt(2.0));
        }
        return routed;
    }

    NodeId block(NodeId x, int layer, LayerNodes* rec) {
        const std::string p = "L" + std::to_string(layer) + ".";
        const int w = cfg.width();
        const double a = cfg.residual_multiplier();

        NodeId attn_in = rms_gain(x, p + "attn_norm_g", w);
        NodeId attn_out = attention(attn_in, x, layer, rec);
        NodeId attn_branch = g.scalar_mul(attn_out, a);
        if (rec) rec->attn_branch = attn_branch;
        x = g.add(x, attn_branch);

        NodeId mlp_in = rms_gain(x, p + "mlp_norm_g", w);
        NodeId mlp_out = cfg.moe ? moe(mlp_in, layer, rec) : swiglu(mlp_in, p + "mlp.", cfg.dense_inter());
        NodeId mlp_branch = g.scalar_mul(mlp_out, a);
        if (rec) rec->mlp_branch = mlp_branch;
        return g.add(x, mlp_branch);
    }
};

}  // namespace

LossGraph build_loss_graph(const ModelConfig& cfg, int n_tokens) {
    cfg.validate();
    if (n_tokens < 1) throw std::invalid_argument("build_loss_graph: empty batch");
    LossGraph lg;
    lg.n_tokens = n_tokens;
    Graph& g = lg.graph;
    Builder b{g, cfg, n_tokens, {}};

    NodeId tokens = g.int_input("tokens", n_tokens);
    NodeId targets = g.int_input("targets", n_tokens);
    NodeId x = g.gather_rows(b.param("embed", cfg.vocab, cfg.width()), tokens);

    lg.layers.resize(cfg.depth);
    for (int l = 0; l < cfg.depth; ++l) x = b.block(x, l, &lg.layers[l]);

    NodeId xn = b.rms_gain(x, "final_norm_g", cfg.width());
    NodeId logits = b.linear(xn, "unembed", cfg.vocab, cfg.width());
    const double wm = cfg.unembed_weight_mult();
    if (wm != 1.0) logits = g.scalar_mul(logits, wm);
    lg.lm_logits = logits;
    lg.loss = g.cross_entropy(logits, targets);
    return lg;
}

namespace {

autodiff::Bindings bind_params(const ParamSet& params) {
    autodiff::Bindings b;
    b.mats = params.values;
    return b;
}

std::vector<std::vector<std::vector<double>>> causal_rows(const std::vector<Mat>& score_mats) {
    std::vector<std::vector<std::vector<double>>> heads;
    heads.reserve(score_mats.size());
    for (const Mat& s : score_mats) {
        std::vector<std::vector<double>> rows;
        rows.reserve(s.rows);
        for (int i = 0; i < s.rows; ++i)
            rows.emplace_back(s.row(i), s.row(i) + i + 1);
        heads.push_back(std::move(rows));
    }
    return heads;
}

std::vector<long> counts_from_topk(const std::vector<int>& idx, int rows, int k, int pool) {
    std::vector<long> c(pool, 0);
    for (int i = 0; i < rows * k; ++i) c[idx[i]] += 1;
    return c;
}

}  // namespace

AttentionResult attention_forward(const Mat& x, const ParamSet& params, const ModelConfig& cfg,
                                  int layer) {
    cfg.validate();
    Graph g;
    Builder b{g, cfg, x.rows, {}};
    NodeId xin = g.input("x", x.rows, x.cols);
    LayerNodes rec;
    NodeId y = b.attention(xin, xin, layer, &rec);

    autodiff::Bindings bind = bind_params(params);
    bind.mats["x"] = x;
    autodiff::Evaluation eval(g, bind);

    AttentionResult res;
    res.y = eval.value(y);
    std::vector<Mat> scores;
    for (NodeId id : rec.attn_scores) scores.push_back(eval.value(id));
    res.causal_score_rows = causal_rows(scores);
    return res;
}

MoeResult moe_forward(const Mat& x, const ParamSet& params, const ModelConfig& cfg, int layer) {
    cfg.validate();
    if (!cfg.moe) throw std::invalid_argument("moe_forward: config has no moe block");
    Graph g;
    Builder b{g, cfg, x.rows, {}};
    NodeId xin = g.input("x", x.rows, x.cols);
    LayerNodes rec;
    NodeId y = b.moe(xin, layer, &rec);

    autodiff::Bindings bind = bind_params(params);
    bind.mats["x"] = x;
    autodiff::Evaluation eval(g, bind);

    MoeResult res;
    res.y = eval.value(y);
    res.router_logits = eval.value(rec.router_logits);
    res.dispatch_counts = counts_from_topk(eval.topk_indices(rec.topk), x.rows, cfg.route_select(),
                                           cfg.routed_pool());
    return res;
}

Mat block_forward(const Mat& x, const ParamSet& params, const ModelConfig& cfg, int layer) {
    cfg.validate();
    Graph g;
    Builder b{g, cfg, x.rows, {}};
    NodeId xin = g.input("x", x.rows, x.cols);
    NodeId y = b.block(xin, layer, nullptr);

    autodiff::Bindings bind = bind_params(params);
    bind.mats["x"] = x;
    autodiff::Evaluation eval(g, bind);
    return eval.value(y);
}

BatchActivations extract_activations(const LossGraph& lg, const autodiff::Evaluation& eval,
                                     const ModelConfig& cfg) {
    BatchActivations acts;
    acts.layers.resize(lg.layers.size());
    for (size_t l = 0; l < lg.layers.size(); ++l) {
        const LayerNodes& rec = lg.layers[l];
        auto& out = acts.layers[l];
        std::vector<Mat> scores;
        for (NodeId id : rec.attn_scores) scores.push_back(eval.value(id));
        out.attn_score_rows = causal_rows(scores);
        out.attn_branch = eval.value(rec.attn_branch);
        out.mlp_branch = eval.value(rec.mlp_branch);
        if (rec.router_logits >= 0) {
            out.router_logits = eval.value(rec.router_logits);
            out.dispatch_counts = counts_from_topk(eval.topk_indices(rec.topk), lg.n_tokens,
                                                   cfg.route_select(), cfg.routed_pool());
        }
    }
    acts.lm_logits = eval.value(lg.lm_logits);
    return acts;
}

std::pair<double, BatchActivations> lm_loss(const std::vector<int>& tokens, const ParamSet& params,
                                            const ModelConfig& cfg) {
    if (tokens.size() < 2) throw std::invalid_argument("lm_loss: need at least two tokens");
    const int n = static_cast<int>(tokens.size()) - 1;
    LossGraph lg = build_loss_graph(cfg, n);

    autodiff::Bindings bind = bind_params(params);
    bind.ints["tokens"] = std::vector<int>(tokens.begin(), tokens.end() - 1);
    bind.ints["targets"] = std::vector<int>(tokens.begin() + 1, tokens.end());
    autodiff::Evaluation eval(lg.graph, bind);

    return {eval.value(lg.loss).at(0, 0), extract_activations(lg, eval, cfg)};
}

double aux_balance_loss(const std::vector<long>& counts, const Mat& router_probs, double gamma) {
    const int n_experts = static_cast<int>(counts.size());
    if (n_experts == 0 || router_probs.cols != n_experts)
        throw std::invalid_argument("aux_balance_loss: counts/probs expert dimensions differ");
    long total = 0;
    for (long c : counts) total += c;
    if (total == 0) throw std::invalid_argument("aux_balance_loss: zero total dispatch count");

    std::vector<double> p_sum(n_experts, 0.0);
    double p_total = 0.0;
    for (int t = 0; t < router_probs.rows; ++t)
        for (int i = 0; i < n_experts; ++i) {
            p_sum[i] += router_probs.at(t, i);
            p_total += router_probs.at(t, i);
        }
    if (p_total <= 0) throw std::invalid_argument("aux_balance_loss: non-positive probability mass");

    double s = 0.0;
    for (int i = 0; i < n_experts; ++i)
        s += (static_cast<double>(counts[i]) / total) * (p_sum[i] / p_total);
    return gamma * n_experts * s;
}

}  // namespace spherelab::model
