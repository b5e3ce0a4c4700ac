#include "spherelab/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>

#include "spherelab/optim.hpp"
#include "spherelab/stability.hpp"

namespace spherelab::train {

using config::RunConfig;
using hyperp::Group;
using model::BatchActivations;
using model::LossGraph;
using model::ParamSet;

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct ParamRuntime {
    Group group = Group::Hidden;
    double lr_mult = 1.0;
    double wd_mult = 0.0;
    optim::OptimizerState state;
    bool on_sphere = false;
};

/// Per-parameter learning-rate and decay multipliers for the configured
/// scheme, with the depth factors optionally stripped (ablation switch).
ParamRuntime make_runtime(const model::ParamSpec& spec, const Mat& w0, const RunConfig& cfg) {
    ParamRuntime rt;
    rt.group = spec.group;
    hyperp::ParamDims dims{spec.d_out, spec.d_in};
    hyperp::Multipliers m =
        hyperp::multipliers(cfg.model.scheme, spec.group, dims, cfg.model.width(), cfg.model.depth,
                            cfg.tokens, cfg.anchor);
    rt.lr_mult = m.lr_mult;
    rt.wd_mult = m.weight_decay;
    if (!cfg.depth_mup && cfg.model.scheme != hyperp::Scheme::MuP) {
        // Undo the 1/sqrt(d) learning-rate scaling.
        rt.lr_mult *= std::sqrt(static_cast<double>(cfg.model.depth) / cfg.anchor.d0);
    }
    rt.state = optim::OptimizerState::for_param(w0, cfg.optimizer.cg_ratio);
    rt.on_sphere = (spec.group == Group::Hidden && cfg.optimizer.hidden == "muonh") ||
                   (spec.group == Group::Unembedding && cfg.optimizer.unembedding == "adamh");
    return rt;
}

struct StepStability {
    stability::StabilityReport report;
    double aux_loss = 0.0;
};

StepStability compute_stability(const std::vector<BatchActivations>& window_acts,
                                const RunConfig& cfg) {
    StepStability out;
    const int layers = cfg.model.depth;

    std::vector<std::vector<double>> attn_rows;
    std::vector<std::vector<double>> router_rows;
    std::vector<Mat> attn_branches, mlp_branches;
    std::vector<std::vector<long>> layer_counts(layers);
    double maxvio_sum = 0.0;
    int maxvio_layers = 0;

    for (int l = 0; l < layers; ++l) {
        if (cfg.model.moe)
            layer_counts[l].assign(static_cast<size_t>(cfg.model.routed_pool()), 0L);
        for (const auto& acts : window_acts) {
            const auto& layer = acts.layers[l];
            for (const auto& head_rows : layer.attn_score_rows)
                for (const auto& row : head_rows) {
                    if (row.size() <= 1) {
                        attn_rows.push_back({0.0});  // single-key rows contribute zero
                    } else {
                        attn_rows.push_back(row);
                    }
                }
            attn_branches.push_back(layer.attn_branch);
            mlp_branches.push_back(layer.mlp_branch);
            if (cfg.model.moe) {
                for (int t = 0; t < layer.router_logits.rows; ++t)
                    router_rows.emplace_back(layer.router_logits.row(t),
                                             layer.router_logits.row(t) + layer.router_logits.cols);
                for (size_t e = 0; e < layer.dispatch_counts.size(); ++e)
                    layer_counts[l][e] += layer.dispatch_counts[e];
            }
        }
        if (cfg.model.moe) {
            maxvio_sum += stability::maxvio(layer_counts[l]);
            maxvio_layers += 1;
        }
    }

    out.report.attn_z = stability::z_metric(attn_rows);
    out.report.attn_rms = stability::output_rms(attn_branches);
    out.report.moe_rms = stability::output_rms(mlp_branches);
    out.report.attn_outlier_pct = stability::outlier_pct(attn_branches);
    out.report.moe_outlier_pct = stability::outlier_pct(mlp_branches);
    if (cfg.model.moe) {
        out.report.router_z = stability::z_metric(router_rows);
        out.report.mean_maxvio = maxvio_sum / maxvio_layers;
    }
    return out;
}

}  // namespace

std::vector<int> load_token_stream(const std::filesystem::path& path, int vocab) {
    std::vector<int> ids;
    const std::string ext = path.extension().string();
    if (ext == ".ids" || ext == ".tokens") {
        std::ifstream in(path);
        if (!in.good()) throw std::invalid_argument("cannot open token file: " + path.string());
        long long v;
        while (in >> v) ids.push_back(static_cast<int>(v));
    } else {
        std::ifstream in(path, std::ios::binary);
        if (!in.good()) throw std::invalid_argument("cannot open token file: " + path.string());
        char byte;
        while (in.get(byte)) ids.push_back(static_cast<unsigned char>(byte));
    }
    if (ids.empty()) throw std::invalid_argument("token stream is empty: " + path.string());
    for (int id : ids)
        if (id < 0 || id >= vocab)
            throw std::invalid_argument("token id " + std::to_string(id) + " out of vocab range");
    return ids;
}

void write_copy_task(const std::filesystem::path& path, int period, int length, uint64_t seed) {
    Rng rng(seed);
    std::vector<unsigned char> block(period);
    for (auto& b : block) b = static_cast<unsigned char>(rng.uniform_int(0, 255));
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw std::invalid_argument("cannot write token file: " + path.string());
    for (int i = 0; i < length; ++i) out.put(static_cast<char>(block[i % period]));
}

TrainResult train_run(const RunConfig& run_cfg) {
    RunConfig cfg = run_cfg;
    config::apply_defaults(cfg);
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);

    const std::vector<int> stream = load_token_stream(cfg.data_path, cfg.model.vocab);
    const int ctx = cfg.model.context;
    if (static_cast<int>(stream.size()) < 2 * (ctx + 1))
        throw std::invalid_argument("token stream shorter than two context windows");

    // Validation split: final 2%, never shuffled.
    const size_t val_len = std::max<size_t>(ctx + 1, stream.size() / 50);
    const size_t train_len = stream.size() - val_len;

    const long steps = std::max(1L, static_cast<long>(cfg.tokens / cfg.batch_tokens));
    const int windows = std::max(1, static_cast<int>(std::llround(cfg.batch_tokens / ctx)));

    ParamSet params = model::build_params(cfg.model, cfg.seed);
    LossGraph lg = model::build_loss_graph(cfg.model, ctx);

    std::map<std::string, ParamRuntime> runtime;
    for (const auto& spec : params.specs)
        runtime.emplace(spec.name, make_runtime(spec, params.values.at(spec.name), cfg));

    // Reference parameter for the logged post-multiplier rate: first hidden matrix.
    std::string ref_param;
    for (const auto& spec : params.specs)
        if (spec.group == Group::Hidden) {
            ref_param = spec.name;
            break;
        }

    Rng data_rng(cfg.seed + 0x51ab);
    const optim::AdamHyper adam{cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.adam_eps};

    std::ofstream log(std::filesystem::path(cfg.out_dir) / "log.jsonl");
    const auto t0 = std::chrono::steady_clock::now();

    TrainResult result;
    double last_loss = 0.0;

    for (long step = 0; step < steps; ++step) {
        const double lr_now = optim::lr_schedule(step, steps, cfg.optimizer.base_lr);

        std::vector<autodiff::Evaluation> evals;
        std::vector<BatchActivations> acts;
        evals.reserve(windows);
        double lm_sum = 0.0;

        autodiff::Bindings binds;
        binds.mats = params.values;
        for (int w = 0; w < windows; ++w) {
            const size_t off =
                static_cast<size_t>(data_rng.uniform_int(0, static_cast<int64_t>(train_len - ctx - 1)));
            binds.ints["tokens"] = std::vector<int>(stream.begin() + off, stream.begin() + off + ctx);
            binds.ints["targets"] =
                std::vector<int>(stream.begin() + off + 1, stream.begin() + off + ctx + 1);
            evals.emplace_back(lg.graph, binds);
            lm_sum += evals.back().value(lg.loss).at(0, 0);
            acts.push_back(model::extract_activations(lg, evals.back(), cfg.model));
        }
        const double lm_mean = lm_sum / windows;

        // Global-batch auxiliary balance loss: hard dispatch fractions are
        // constants; the gradient flows through the router probabilities.
        double aux_total = 0.0;
        std::vector<std::vector<double>> aux_seed_rows(cfg.model.depth);
        if (cfg.model.moe && cfg.model.moe->aux_weight > 0) {
            const int pool = cfg.model.routed_pool();
            const double gamma = cfg.model.moe->aux_weight;
            const double tokens_total = static_cast<double>(windows) * ctx;
            for (int l = 0; l < cfg.model.depth; ++l) {
                std::vector<long> counts(pool, 0);
                std::vector<double> p_sum(pool, 0.0);
                for (const auto& a : acts) {
                    const auto& lay = a.layers[l];
                    for (int e = 0; e < pool; ++e) counts[e] += lay.dispatch_counts[e];
                }
                for (const auto& ev : evals) {
                    const Mat& probs = ev.value(lg.layers[l].router_probs);
                    for (int t = 0; t < probs.rows; ++t)
                        for (int e = 0; e < pool; ++e) p_sum[e] += probs.at(t, e);
                }
                long c_total = 0;
                for (long c : counts) c_total += c;
                double p_total = 0.0;
                for (double p : p_sum) p_total += p;
                double s = 0.0;
                std::vector<double> seed_row(pool);
                for (int e = 0; e < pool; ++e) {
                    const double f = static_cast<double>(counts[e]) / c_total;
                    s += f * (p_sum[e] / p_total);
                    seed_row[e] = gamma * pool * f / p_total;
                }
                aux_total += gamma * pool * s;
                aux_seed_rows[l] = std::move(seed_row);
            }
        }

        const double step_loss = lm_mean + aux_total;
        if (!std::isfinite(step_loss)) {
            log << "{\"step\":" << step << ",\"event\":\"abort\",\"reason\":\"non-finite loss\"}\n";
            throw TrainAborted(step);
        }
        last_loss = step_loss;

        // Backward over every window, summing into one gradient set.
        autodiff::GradientSet grads;
        Mat loss_seed(1, 1);
        loss_seed.at(0, 0) = 1.0 / windows;
        for (int w = 0; w < windows; ++w) {
            std::map<autodiff::NodeId, Mat> seeds;
            seeds[lg.loss] = loss_seed;
            if (cfg.model.moe && cfg.model.moe->aux_weight > 0) {
                for (int l = 0; l < cfg.model.depth; ++l) {
                    Mat seed(ctx, cfg.model.routed_pool());
                    for (int t = 0; t < ctx; ++t)
                        for (int e = 0; e < cfg.model.routed_pool(); ++e)
                            seed.at(t, e) = aux_seed_rows[l][e];
                    seeds[lg.layers[l].router_probs] = std::move(seed);
                }
            }
            autodiff::GradientSet g = autodiff::backward(lg.graph, evals[w], seeds);
            for (auto& [name, grad] : g) {
                auto it = grads.find(name);
                if (it == grads.end()) {
                    grads.emplace(name, std::move(grad));
                } else {
                    axpy(1.0, grad, it->second);
                }
            }
        }

        // Optimizer step.
        for (auto& [name, grad] : grads) {
            ParamRuntime& rt = runtime.at(name);
            Mat& w = params.values.at(name);
            const double eta = lr_now * rt.lr_mult;
            const double wd = cfg.optimizer.weight_decay * rt.wd_mult;
            switch (rt.group) {
                case Group::Hidden:
                    w = cfg.optimizer.hidden == "muonh"
                            ? optim::muonh_step(w, grad, eta, rt.state)
                            : optim::muon_step(w, grad, eta, wd, rt.state);
                    break;
                case Group::Unembedding:
                    w = cfg.optimizer.unembedding == "adamh"
                            ? optim::adamh_step(w, grad, eta, rt.state, adam)
                            : optim::adamw_step(w, grad, eta, wd, rt.state, adam);
                    break;
                case Group::EmbeddingVector:
                    w = optim::adamw_step(w, grad, eta, wd, rt.state, adam);
                    break;
            }
        }

        if (step % cfg.log_every == 0 || step == steps - 1) {
            double drift = 0.0;
            for (auto& [name, rt] : runtime) {
                if (!rt.on_sphere) continue;
                const double n = frobenius_norm(params.values.at(name));
                drift = std::max(drift, std::abs(n - rt.state.c_w) / rt.state.c_w);
            }
            result.max_sphere_drift = std::max(result.max_sphere_drift, drift);

            StepStability st = compute_stability(acts, cfg);
            const double wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            log << "{\"step\":" << step
                << ",\"tokens_seen\":" << fmt_double((step + 1) * cfg.batch_tokens)
                << ",\"lr\":" << fmt_double(lr_now * runtime.at(ref_param).lr_mult)
                << ",\"train_loss\":" << fmt_double(step_loss)
                << ",\"aux_loss\":" << fmt_double(aux_total) << ",\"stability\":{"
                << "\"attn_z\":" << fmt_double(st.report.attn_z)
                << ",\"router_z\":" << fmt_double(st.report.router_z)
                << ",\"attn_rms\":" << fmt_double(st.report.attn_rms)
                << ",\"moe_rms\":" << fmt_double(st.report.moe_rms)
                << ",\"attn_outlier_pct\":" << fmt_double(st.report.attn_outlier_pct)
                << ",\"moe_outlier_pct\":" << fmt_double(st.report.moe_outlier_pct)
                << ",\"mean_maxvio\":" << fmt_double(st.report.mean_maxvio) << "}"
                << ",\"sphere_drift\":" << fmt_double(drift) << ",\"wall_ms\":" << wall_ms << "}\n";
        }
    }

    // Validation loss on fixed non-overlapping windows of the held-out tail.
    {
        autodiff::Bindings binds;
        binds.mats = params.values;
        double total = 0.0;
        int count = 0;
        for (size_t off = train_len; off + ctx + 1 <= stream.size(); off += ctx) {
            binds.ints["tokens"] = std::vector<int>(stream.begin() + off, stream.begin() + off + ctx);
            binds.ints["targets"] =
                std::vector<int>(stream.begin() + off + 1, stream.begin() + off + ctx + 1);
            autodiff::Evaluation ev(lg.graph, binds);
            total += ev.value(lg.loss).at(0, 0);
            count += 1;
        }
        result.val_loss = count > 0 ? total / count : last_loss;
    }

    result.final_train_loss = last_loss;
    result.steps = steps;
    result.log_path = std::filesystem::path(cfg.out_dir) / "log.jsonl";

    std::ofstream summary(std::filesystem::path(cfg.out_dir) / "summary.json");
    summary << "{\"final_train_loss\":" << fmt_double(result.final_train_loss)
            << ",\"val_loss\":" << fmt_double(result.val_loss) << ",\"steps\":" << result.steps
            << ",\"max_sphere_drift\":" << fmt_double(result.max_sphere_drift) << "}\n";
    return result;
}

SweepResult sweep_run(const RunConfig& base, const std::vector<double>& lr_grid) {
    if (lr_grid.size() < 3) throw std::invalid_argument("sweep: need at least 3 grid values");
    SweepResult res;

    std::vector<std::future<TrainResult>> futs;
    std::vector<RunConfig> cfgs;
    for (double lr : lr_grid) {
        RunConfig cfg = base;
        cfg.optimizer.base_lr = lr;
        cfg.anchor.eta0 = base.anchor.eta0 > 0 ? lr : lr;  // each point anchors its own rate
        char sub[64];
        std::snprintf(sub, sizeof(sub), "lr_%g", lr);
        cfg.out_dir = (std::filesystem::path(base.out_dir) / sub).string();
        cfgs.push_back(cfg);
    }
    futs.reserve(cfgs.size());
    for (const auto& cfg : cfgs)
        futs.push_back(std::async(std::launch::async, [cfg] { return train_run(cfg); }));

    for (size_t i = 0; i < futs.size(); ++i) {
        try {
            TrainResult r = futs[i].get();
            res.points.push_back({lr_grid[i], r.val_loss});
        } catch (const std::exception& e) {
            res.failures.push_back("lr=" + std::to_string(lr_grid[i]) + ": " + e.what());
        }
    }

    std::filesystem::create_directories(base.out_dir);
    res.csv_path = std::filesystem::path(base.out_dir) / "sweep.csv";
    std::ofstream csv(res.csv_path);
    csv << "lr,loss\n";
    for (const auto& p : res.points) csv << fmt_double(p.lr) << "," << fmt_double(p.loss) << "\n";
    return res;
}

}  // namespace spherelab::train
