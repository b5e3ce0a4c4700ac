#include "spherelab/config.hpp"

#include <fstream>
#include <stdexcept>

namespace spherelab::config {

using nlohmann::json;

void RunConfig::validate() const {
    model.validate();
    if (tokens <= 0) throw std::invalid_argument("config: tokens must be positive");
    if (batch_tokens <= 0) throw std::invalid_argument("config: batch_tokens must be positive");
    if (batch_tokens > tokens) throw std::invalid_argument("config: batch larger than token budget");
    if (log_every < 1) throw std::invalid_argument("config: log_every must be >= 1");
    if (optimizer.base_lr <= 0) throw std::invalid_argument("config: base_lr must be positive");
    if (optimizer.hidden != "muonh" && optimizer.hidden != "muon")
        throw std::invalid_argument("config: optimizer.hidden must be muonh or muon");
    if (optimizer.unembedding != "adamh" && optimizer.unembedding != "adamw")
        throw std::invalid_argument("config: optimizer.unembedding must be adamh or adamw");
}

json to_json(const RunConfig& cfg) {
    json m{{"depth", cfg.model.depth},
           {"aspect_ratio", cfg.model.aspect_ratio},
           {"n_head", cfg.model.n_head},
           {"kv_heads", cfg.model.kv_heads},
           {"head_dim", cfg.model.head_dim},
           {"vocab", cfg.model.vocab},
           {"context", cfg.model.context},
           {"mlp_mult", cfg.model.mlp_mult},
           {"scheme", hyperp::to_string(cfg.model.scheme)},
           {"rotary", cfg.model.rotary},
           {"anchor_width", cfg.model.anchor_width},
           {"qk_norm", cfg.model.attn.qk_norm},
           {"gated_attention", cfg.model.attn.gated}};
    if (cfg.model.moe) {
        m["moe"] = {{"sparsity", cfg.model.moe->sparsity},
                    {"granularity", cfg.model.moe->granularity},
                    {"shared_expert", cfg.model.moe->shared_expert},
                    {"sqrt_gate", cfg.model.moe->sqrt_gate},
                    {"aux_weight", cfg.model.moe->aux_weight}};
    }
    return json{{"model", m},
                {"anchor",
                 {{"eta0", cfg.anchor.eta0},
                  {"d0", cfg.anchor.d0},
                  {"tokens0", cfg.anchor.tokens0},
                  {"batch0", cfg.anchor.batch0},
                  {"w0", cfg.anchor.w0}}},
                {"optimizer",
                 {{"hidden", cfg.optimizer.hidden},
                  {"unembedding", cfg.optimizer.unembedding},
                  {"base_lr", cfg.optimizer.base_lr},
                  {"weight_decay", cfg.optimizer.weight_decay},
                  {"momentum", cfg.optimizer.momentum},
                  {"beta1", cfg.optimizer.beta1},
                  {"beta2", cfg.optimizer.beta2},
                  {"adam_eps", cfg.optimizer.adam_eps},
                  {"cg_ratio", cfg.optimizer.cg_ratio}}},
                {"tokens", cfg.tokens},
                {"batch_tokens", cfg.batch_tokens},
                {"seed", cfg.seed},
                {"data_path", cfg.data_path},
                {"out_dir", cfg.out_dir},
                {"log_every", cfg.log_every},
                {"depth_mup", cfg.depth_mup}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    const json& m = j.at("model");
    cfg.model.depth = m.at("depth").get<int>();
    cfg.model.aspect_ratio = m.at("aspect_ratio").get<int>();
    cfg.model.n_head = m.value("n_head", 0);
    cfg.model.kv_heads = m.value("kv_heads", 4);
    cfg.model.head_dim = m.value("head_dim", 8);
    cfg.model.vocab = m.value("vocab", 256);
    cfg.model.context = m.value("context", 128);
    cfg.model.mlp_mult = m.value("mlp_mult", 4);
    cfg.model.scheme = hyperp::scheme_from_string(m.value("scheme", std::string("hyperp")));
    cfg.model.rotary = m.value("rotary", true);
    cfg.model.anchor_width = m.value("anchor_width", 0);
    cfg.model.attn.qk_norm = m.value("qk_norm", true);
    cfg.model.attn.gated = m.value("gated_attention", true);
    if (m.contains("moe") && !m.at("moe").is_null()) {
        const json& mo = m.at("moe");
        model::MoeConfig moe;
        moe.sparsity = mo.at("sparsity").get<int>();
        moe.granularity = mo.at("granularity").get<int>();
        moe.shared_expert = mo.value("shared_expert", true);
        moe.sqrt_gate = mo.value("sqrt_gate", true);
        moe.aux_weight = mo.value("aux_weight", 0.1);
        cfg.model.moe = moe;
    }
    if (j.contains("anchor")) {
        const json& a = j.at("anchor");
        cfg.anchor.eta0 = a.value("eta0", 0.0);
        cfg.anchor.d0 = a.value("d0", 0);
        cfg.anchor.tokens0 = a.value("tokens0", 0.0);
        cfg.anchor.batch0 = a.value("batch0", 0.0);
        cfg.anchor.w0 = a.value("w0", 0);
    }
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        cfg.optimizer.hidden = o.value("hidden", std::string("muonh"));
        cfg.optimizer.unembedding = o.value("unembedding", std::string("adamh"));
        cfg.optimizer.base_lr = o.value("base_lr", 0.01);
        cfg.optimizer.weight_decay = o.value("weight_decay", 0.0);
        cfg.optimizer.momentum = o.value("momentum", 0.95);
        cfg.optimizer.beta1 = o.value("beta1", 0.9);
        cfg.optimizer.beta2 = o.value("beta2", 0.95);
        cfg.optimizer.adam_eps = o.value("adam_eps", 1e-8);
        cfg.optimizer.cg_ratio = o.value("cg_ratio", 1.0);
    }
    cfg.tokens = j.value("tokens", 32768.0);
    cfg.batch_tokens = j.value("batch_tokens", 256.0);
    cfg.seed = j.value("seed", 0ULL);
    cfg.data_path = j.value("data_path", std::string());
    cfg.out_dir = j.value("out_dir", std::string("out"));
    cfg.log_every = j.value("log_every", 10L);
    cfg.depth_mup = j.value("depth_mup", true);
    apply_defaults(cfg);
    return cfg;
}

void apply_defaults(RunConfig& cfg) {
    cfg.model.depth_scaled_residual = cfg.depth_mup;
    if (cfg.anchor.eta0 <= 0) cfg.anchor.eta0 = cfg.optimizer.base_lr;
    if (cfg.anchor.d0 <= 0) cfg.anchor.d0 = cfg.model.depth;
    if (cfg.anchor.tokens0 <= 0) cfg.anchor.tokens0 = cfg.tokens;
    if (cfg.anchor.batch0 <= 0) cfg.anchor.batch0 = cfg.batch_tokens;
    if (cfg.anchor.w0 <= 0) cfg.anchor.w0 = cfg.anchor.d0 * cfg.model.aspect_ratio;
    if (cfg.model.anchor_width <= 0) cfg.model.anchor_width = cfg.anchor.w0;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.good()) throw std::invalid_argument("cannot open config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config parse error in " + path.string() + ": " + e.what());
    }
    RunConfig cfg = run_config_from_json(j);
    cfg.validate();
    return cfg;
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out.good()) throw std::invalid_argument("cannot write config file: " + path.string());
    out << to_json(cfg).dump(2) << "\n";
}

}  // namespace spherelab::config
