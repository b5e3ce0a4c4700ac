// Command-line harness: training runs, LR sweeps, curve fits, FLOPs
// accounting and the theorem verification suite.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spherelab/config.hpp"
#include "spherelab/hyperp.hpp"
#include "spherelab/scalefit.hpp"
#include "spherelab/theoremlab.hpp"
#include "spherelab/train.hpp"

namespace {

using nlohmann::json;
using namespace spherelab;

constexpr int kExitOk = 0;
constexpr int kExitFitVerifyFailure = 1;
constexpr int kExitConfigError = 2;

json quad_to_json(const scalefit::QuadFit& f) {
    return {{"eta_star", f.eta_star},   {"loss_star", f.loss_star}, {"curvature", f.curvature},
            {"r_squared", f.r_squared}, {"has_minimum", f.has_minimum},
            {"extrapolated", f.extrapolated}};
}

json power_to_json(const scalefit::PowerFit& f) {
    return {{"amplitude", f.amplitude},
            {"exponent", f.exponent},
            {"floor", f.floor},
            {"residual", f.residual},
            {"model", "y = amplitude * x^(-exponent) + floor"}};
}

void emit(const json& j, const std::string& out_path) {
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << j.dump(2) << "\n";
    }
    std::cout << j.dump(2) << "\n";
}

std::vector<double> parse_grid(const std::string& grid) {
    std::vector<double> values;
    std::string token;
    std::istringstream ss(grid);
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) values.push_back(std::stod(token));
    }
    if (values.empty()) throw std::invalid_argument("empty --grid");
    return values;
}

config::RunConfig load_run_config(const std::string& path, std::optional<uint64_t> seed,
                                  const std::string& out_dir, const std::string& scheme) {
    config::RunConfig cfg = config::load_config(path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!scheme.empty()) cfg.model.scheme = hyperp::scheme_from_string(scheme);
    cfg.validate();
    return cfg;
}

int cmd_train(const config::RunConfig& cfg) {
    train::TrainResult r = train::train_run(cfg);
    emit(json{{"final_train_loss", r.final_train_loss},
              {"val_loss", r.val_loss},
              {"steps", r.steps},
              {"max_sphere_drift", r.max_sphere_drift},
              {"log", r.log_path.string()}},
         "");
    return kExitOk;
}

int cmd_sweep(const config::RunConfig& cfg, const std::vector<double>& grid) {
    train::SweepResult sw = train::sweep_run(cfg, grid);
    for (const auto& f : sw.failures) std::cerr << "warning: excluded failed run " << f << "\n";

    json j{{"csv", sw.csv_path.string()}, {"failures", sw.failures}};
    int rc = kExitOk;
    try {
        scalefit::QuadFit fit = scalefit::fit_quadratic_loglr(sw.points);
        j["fit"] = quad_to_json(fit);
    } catch (const scalefit::NoInteriorMinimum& e) {
        j["fit"] = quad_to_json(e.fit);
        j["fit_error"] = e.what();
        rc = kExitFitVerifyFailure;
    }
    std::ofstream fit_out(std::filesystem::path(cfg.out_dir) / "fit.json");
    fit_out << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    return rc;
}

int cmd_verify(uint64_t seed, const std::string& out_path) {
    auto reports = theoremlab::run_all_checks(seed);
    json arr = json::array();
    bool all_pass = true;
    std::printf("%-24s %8s %14s %12s  %s\n", "check", "trials", "statistic", "threshold", "result");
    for (const auto& r : reports) {
        std::printf("%-24s %8ld %14.6g %12.6g  %s\n", r.name.c_str(), r.trials, r.statistic,
                    r.threshold, r.pass ? "pass" : "FAIL");
        all_pass &= r.pass;
        arr.push_back({{"name", r.name},
                       {"trials", r.trials},
                       {"statistic", r.statistic},
                       {"threshold", r.threshold},
                       {"pass", r.pass},
                       {"details", r.details}});
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << arr.dump(2) << "\n";
    }
    std::printf("verify: %s\n", all_pass ? "all checks passed" : "CHECKS FAILED");
    return all_pass ? kExitOk : kExitFitVerifyFailure;
}

int cmd_plotdata(const std::string& kind, const std::string& csv, const std::string& method_csv,
                 bool floor, const std::string& out_path) {
    std::ofstream out(out_path);
    if (!out.good()) throw std::invalid_argument("cannot write " + out_path);
    out.precision(12);

    if (kind == "loss-vs-lr") {
        auto points = scalefit::read_sweep_csv(csv);
        scalefit::QuadFit fit = scalefit::fit_quadratic_loglr(points);
        out << "lr,observed_loss,fitted_loss\n";
        double lo = points[0].lr, hi = points[0].lr;
        for (const auto& p : points) {
            lo = std::min(lo, p.lr);
            hi = std::max(hi, p.lr);
        }
        auto fitted = [&](double lr) {
            const double lx = std::log(lr);
            const double b = -2.0 * fit.curvature * std::log(fit.eta_star);
            const double c = fit.loss_star + fit.curvature * std::log(fit.eta_star) * std::log(fit.eta_star);
            return fit.curvature * lx * lx + b * lx + c;
        };
        for (const auto& p : points)
            out << p.lr << "," << p.loss << "," << fitted(p.lr) << "\n";
        for (int i = 0; i <= 60; ++i) {
            const double lr = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / 60.0);
            out << lr << ",," << fitted(lr) << "\n";
        }
    } else if (kind == "loss-vs-flops") {
        auto points = scalefit::read_xy_csv(csv);
        scalefit::PowerFit fit = scalefit::fit_power_law(points, floor);
        out << "flops,observed_loss,fitted_loss\n";
        for (const auto& p : points)
            out << p.x << "," << p.y << ","
                << fit.amplitude * std::pow(p.x, -fit.exponent) + fit.floor << "\n";
    } else if (kind == "cel-vs-flops") {
        if (method_csv.empty())
            throw std::invalid_argument("cel-vs-flops needs --method-csv with the method's points");
        auto base_points = scalefit::read_xy_csv(csv);
        auto method_points = scalefit::read_xy_csv(method_csv);
        scalefit::PowerFit base = scalefit::fit_power_law(base_points, floor);
        out << "flops,loss,cel\n";
        for (const auto& p : method_points)
            out << p.x << "," << p.y << "," << scalefit::cel(base, p.x, p.y) << "\n";
    } else {
        throw std::invalid_argument("unknown --kind '" + kind + "'");
    }
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frobenius-hypersphere optimization lab"};
    app.require_subcommand(1);

    std::string config_path, out_dir, scheme, csv_path, method_csv, grid_str, out_path, kind;
    std::optional<uint64_t> seed;
    bool use_floor = false, fit_power = false;
    double cstar = 0.0, lstar = 0.0, tokens_override = 0.0;
    int k_subset = 0, context_override = 0;

    auto* train_cmd = app.add_subcommand("train", "run one training job");
    train_cmd->add_option("--config", config_path, "config file")->required();
    train_cmd->add_option("--seed", seed, "override config seed");
    train_cmd->add_option("--out", out_dir, "override output directory");
    train_cmd->add_option("--scheme", scheme, "override scheme (mup|muppp|hyperp)");

    auto* sweep_cmd = app.add_subcommand("sweep", "train across an LR grid and fit the optimum");
    sweep_cmd->add_option("--config", config_path, "config file")->required();
    sweep_cmd->add_option("--grid", grid_str, "comma-separated learning rates")->required();
    sweep_cmd->add_option("--seed", seed, "override config seed");
    sweep_cmd->add_option("--out", out_dir, "override output directory");
    sweep_cmd->add_option("--scheme", scheme, "override scheme (mup|muppp|hyperp)");

    auto* fit_cmd = app.add_subcommand("fit", "fit a sweep (quadratic) or a power law to CSV data");
    fit_cmd->add_option("--csv", csv_path, "input CSV")->required();
    fit_cmd->add_flag("--power", fit_power, "fit y = A x^(-b) (+ C0 with --floor)");
    fit_cmd->add_flag("--floor", use_floor, "fit an irreducible floor");
    fit_cmd->add_option("--out", out_path, "also write the fit JSON here");

    auto* cel_cmd = app.add_subcommand("cel", "compute-efficiency leverage against a baseline fit");
    cel_cmd->add_option("--csv", csv_path, "baseline (x,y) CSV")->required();
    cel_cmd->add_option("--cstar", cstar, "method FLOPs")->required();
    cel_cmd->add_option("--lstar", lstar, "method loss")->required();
    cel_cmd->add_flag("--floor", use_floor, "fit the baseline with an irreducible floor");
    cel_cmd->add_option("--out", out_path, "also write the result JSON here");

    auto* flops_cmd = app.add_subcommand("flops", "fine-grained training-FLOPs accounting");
    flops_cmd->add_option("--config", config_path, "config file")->required();
    flops_cmd->add_option("--tokens", tokens_override, "override token budget");
    flops_cmd->add_option("--context", context_override, "override context length");
    flops_cmd->add_option("--out", out_path, "also write the result JSON here");

    auto* sens_cmd = app.add_subcommand("sensitivity", "subset-sensitivity of sweep fits");
    sens_cmd->add_option("--csv", csv_path, "sweep CSV (lr,loss)")->required();
    sens_cmd->add_option("--k", k_subset, "subset size (default: every k from 3 to n-1)");
    sens_cmd->add_option("--out", out_path, "also write the result JSON here");

    auto* loo_cmd = app.add_subcommand("loo", "leave-one-out error of the floorless power fit");
    loo_cmd->add_option("--csv", csv_path, "input (x,y) CSV")->required();
    loo_cmd->add_option("--out", out_path, "also write the result JSON here");

    auto* verify_cmd = app.add_subcommand("verify", "run the full theorem verification suite");
    verify_cmd->add_option("--seed", seed, "suite seed (default 0)");
    verify_cmd->add_option("--out", out_path, "also write the reports JSON here");

    auto* plot_cmd = app.add_subcommand("plotdata", "emit plain-CSV plot data from runs and fits");
    plot_cmd->add_option("--kind", kind, "loss-vs-lr | loss-vs-flops | cel-vs-flops")->required();
    plot_cmd->add_option("--csv", csv_path, "input CSV")->required();
    plot_cmd->add_option("--method-csv", method_csv, "method points for cel-vs-flops");
    plot_cmd->add_flag("--floor", use_floor, "fit with an irreducible floor");
    plot_cmd->add_option("--out", out_path, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    try {
        if (*train_cmd) return cmd_train(load_run_config(config_path, seed, out_dir, scheme));
        if (*sweep_cmd)
            return cmd_sweep(load_run_config(config_path, seed, out_dir, scheme),
                             parse_grid(grid_str));
        if (*fit_cmd) {
            json j;
            if (fit_power || use_floor) {
                auto points = scalefit::read_xy_csv(csv_path);
                j = power_to_json(scalefit::fit_power_law(points, use_floor));
            } else {
                auto points = scalefit::read_sweep_csv(csv_path);
                try {
                    j = quad_to_json(scalefit::fit_quadratic_loglr(points));
                } catch (const scalefit::NoInteriorMinimum& e) {
                    j = quad_to_json(e.fit);
                    j["error"] = e.what();
                    emit(j, out_path);
                    return kExitFitVerifyFailure;
                }
            }
            emit(j, out_path);
            return kExitOk;
        }
        if (*cel_cmd) {
            auto points = scalefit::read_xy_csv(csv_path);
            scalefit::PowerFit base = scalefit::fit_power_law(points, use_floor);
            const double rho = scalefit::cel(base, cstar, lstar);
            emit(json{{"baseline_fit", power_to_json(base)},
                      {"c_star", cstar},
                      {"l_star", lstar},
                      {"cel", rho}},
                 out_path);
            return kExitOk;
        }
        if (*flops_cmd) {
            config::RunConfig cfg = config::load_config(config_path);
            const double tokens = tokens_override > 0 ? tokens_override : cfg.tokens;
            const int ctx = context_override > 0 ? context_override : cfg.model.context;
            scalefit::ParamCount pc = scalefit::param_count(cfg.model);
            emit(json{{"tokens", tokens},
                      {"context", ctx},
                      {"flops", scalefit::chinchilla_flops(cfg.model, tokens, ctx)},
                      {"params",
                       {{"embedding_vector", pc.embedding_vector},
                        {"unembedding", pc.unembedding},
                        {"hidden", pc.hidden},
                        {"total", pc.total()}}},
                      {"note", "vocab taken from the config; accounting counts 2 FLOPs per "
                               "multiply-accumulate and backward as twice forward"}},
                 out_path);
            return kExitOk;
        }
        if (*sens_cmd) {
            auto points = scalefit::read_sweep_csv(csv_path);
            const int n = static_cast<int>(points.size());
            json arr = json::array();
            const int k_lo = k_subset > 0 ? k_subset : 3;
            const int k_hi = k_subset > 0 ? k_subset : n - 1;
            for (int k = k_lo; k <= k_hi; ++k) {
                auto r = scalefit::sensitivity(points, k);
                arr.push_back({{"k", k},
                               {"mean_lr_rel_err_pct", r.mean_lr_rel_err_pct},
                               {"mean_loss_rel_err_pct", r.mean_loss_rel_err_pct},
                               {"subsets_total", r.subsets_total},
                               {"subsets_no_minimum", r.subsets_no_minimum},
                               {"subsets_extrapolated", r.subsets_extrapolated}});
            }
            emit(arr, out_path);
            return kExitOk;
        }
        if (*loo_cmd) {
            auto points = scalefit::read_xy_csv(csv_path);
            emit(json{{"mean_abs_rel_err_pct", scalefit::loo_cv_power(points)}}, out_path);
            return kExitOk;
        }
        if (*verify_cmd) return cmd_verify(seed.value_or(0), out_path);
        if (*plot_cmd) return cmd_plotdata(kind, csv_path, method_csv, use_floor, out_path);
    } catch (const train::TrainAborted& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFitVerifyFailure;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFitVerifyFailure;
    }
    return kExitConfigError;
}
