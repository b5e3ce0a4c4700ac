#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "spherelab/hyperp.hpp"
#include "spherelab/model.hpp"

namespace spherelab::config {

struct OptimizerConfig {
    std::string hidden = "muonh";       // muonh | muon
    std::string unembedding = "adamh";  // adamh | adamw
    double base_lr = 0.01;
    double weight_decay = 0.0;  // base decay; per-group multipliers apply on top
    double momentum = 0.95;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double adam_eps = 1e-8;
    double cg_ratio = 1.0;  // c_g = cg_ratio * c_w
};

struct RunConfig {
    model::ModelConfig model;
    hyperp::TransferAnchor anchor;  // anchor.eta0 <- optimizer.base_lr when 0
    OptimizerConfig optimizer;
    double tokens = 32768;        // total training tokens
    double batch_tokens = 256;    // tokens per step
    uint64_t seed = 0;
    std::string data_path;
    std::string out_dir = "out";
    long log_every = 10;
    bool depth_mup = true;  // drop the depth multipliers when false (ablation switch)

    void validate() const;
};

/// Fill the anchor from the run itself where unset (the run is its own
/// anchor) and sync the model-side ablation flag.
void apply_defaults(RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace spherelab::config
