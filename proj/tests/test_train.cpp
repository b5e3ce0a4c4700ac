#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "spherelab/train.hpp"

using namespace spherelab;
using namespace spherelab::train;

namespace {

std::filesystem::path scratch() {
    auto p = std::filesystem::temp_directory_path() / "spherelab_train_tests";
    std::filesystem::create_directories(p);
    return p;
}

config::RunConfig desk_config(const std::string& run_name, long steps) {
    config::RunConfig cfg;
    cfg.model.depth = 2;
    cfg.model.aspect_ratio = 16;
    cfg.model.head_dim = 8;
    cfg.model.kv_heads = 4;
    cfg.model.vocab = 256;
    cfg.model.context = 64;
    cfg.model.scheme = hyperp::Scheme::HyperP;
    cfg.optimizer.base_lr = 0.02;
    cfg.batch_tokens = 128;  // 2 windows per step
    cfg.tokens = cfg.batch_tokens * steps;
    cfg.seed = 7;
    cfg.log_every = 10;

    auto dir = scratch() / run_name;
    std::filesystem::create_directories(dir);
    auto data = scratch() / "copy.bin";
    if (!std::filesystem::exists(data)) write_copy_task(data, 16, 20000, 99);
    cfg.data_path = data.string();
    cfg.out_dir = dir.string();
    return cfg;
}

std::string strip_wall_ms(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream out;
    std::string line;
    const std::regex wall(R"(,\"wall_ms\":[^}]*)");
    while (std::getline(in, line)) out << std::regex_replace(line, wall, "") << "\n";
    return out.str();
}

}  // namespace

TEST_CASE("config round-trips through json") {
    config::RunConfig cfg = desk_config("roundtrip", 4);
    cfg.model.moe = model::MoeConfig{2, 2, true, true, 0.1};
    config::apply_defaults(cfg);
    auto path = scratch() / "cfg.json";
    config::save_config(cfg, path);
    config::RunConfig back = config::load_config(path);
    CHECK(config::to_json(back) == config::to_json(cfg));
}

TEST_CASE("copy-task smoke training learns") {
    config::RunConfig cfg = desk_config("smoke", 200);
    TrainResult r = train_run(cfg);
    CHECK(r.steps == 200);

    // parse logged train losses
    std::ifstream in(r.log_path);
    std::string line;
    std::vector<double> losses;
    const std::regex loss_re(R"(\"train_loss\":([0-9.eE+-]+))");
    std::smatch m;
    while (std::getline(in, line))
        if (std::regex_search(line, m, loss_re)) losses.push_back(std::stod(m[1]));
    REQUIRE(losses.size() >= 10);

    // final << initial: at least 1 nat down on the copy task
    CHECK(losses.back() < losses.front() - 1.0);

    // decreasing over 20-step windows (2 records per window at log_every=10)
    for (size_t i = 0; i + 4 < losses.size(); i += 2) {
        const double w0 = (losses[i] + losses[i + 1]) / 2;
        const double w1 = (losses[i + 2] + losses[i + 3]) / 2;
        CHECK(w1 < w0 + 0.05);  // monotone up to step noise
    }

    // sphere parameters stay pinned throughout
    CHECK(r.max_sphere_drift < 1e-10);
    CHECK(r.val_loss > 0.0);
}

TEST_CASE("identical seeds give identical logs; decay is absent under the sphere scheme") {
    config::RunConfig a = desk_config("det_a", 30);
    config::RunConfig b = desk_config("det_b", 30);
    b.optimizer.weight_decay = 0.1;  // multiplied by the scheme's zero decay multipliers
    TrainResult ra = train_run(a);
    TrainResult rb = train_run(b);
    CHECK(strip_wall_ms(ra.log_path) == strip_wall_ms(rb.log_path));

    config::RunConfig c = desk_config("det_c", 30);
    c.seed = 8;
    TrainResult rc = train_run(c);
    CHECK(strip_wall_ms(ra.log_path) != strip_wall_ms(rc.log_path));
}

TEST_CASE("non-finite loss aborts with the offending step") {
    config::RunConfig cfg = desk_config("nan", 20);
    cfg.optimizer.hidden = "muon";
    cfg.optimizer.unembedding = "adamw";
    cfg.model.scheme = hyperp::Scheme::MuP;
    cfg.optimizer.base_lr = 1e200;
    CHECK_THROWS_AS(train_run(cfg), TrainAborted);
}

TEST_CASE("sweep emits a csv and a fit") {
    config::RunConfig cfg = desk_config("sweep", 12);
    SweepResult sw = sweep_run(cfg, {0.005, 0.01, 0.02, 0.04, 0.08});
    CHECK(sw.points.size() == 5);
    CHECK(std::filesystem::exists(sw.csv_path));

    std::ifstream in(sw.csv_path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "lr,loss");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 5);
}

TEST_CASE("moe training runs with balanced dispatch pressure") {
    config::RunConfig cfg = desk_config("moe", 30);
    cfg.model.moe = model::MoeConfig{2, 2, true, true, 0.1};
    cfg.model.context = 32;
    cfg.batch_tokens = 64;
    cfg.tokens = cfg.batch_tokens * 30;
    TrainResult r = train_run(cfg);
    CHECK(r.max_sphere_drift < 1e-10);

    // maxvio is logged and finite
    std::ifstream in(r.log_path);
    std::string line;
    const std::regex mv_re(R"(\"mean_maxvio\":([0-9.eE+-]+))");
    std::smatch m;
    bool found = false;
    while (std::getline(in, line))
        if (std::regex_search(line, m, mv_re)) {
            found = true;
            CHECK(std::stod(m[1]) >= 0.0);
        }
    CHECK(found);
}
