#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spherelab/config.hpp"
#include "spherelab/scalefit.hpp"

namespace spherelab::train {

struct TrainResult {
    double final_train_loss = 0.0;
    double val_loss = 0.0;
    long steps = 0;
    double max_sphere_drift = 0.0;  // worst |  ||W||_F - c_w | / c_w seen at any logged step
    std::filesystem::path log_path;
};

/// Thrown when the loss goes non-finite; carries the offending step.
struct TrainAborted : std::runtime_error {
    long step;
    explicit TrainAborted(long s)
        : std::runtime_error("training aborted: non-finite loss at step " + std::to_string(s)),
          step(s) {}
};

/// Deterministic training run. Writes <out_dir>/log.jsonl (one record per
/// logging interval) and <out_dir>/summary.json.
TrainResult train_run(const config::RunConfig& cfg);

struct SweepResult {
    std::vector<scalefit::SweepPoint> points;
    std::vector<std::string> failures;  // "lr=...: message" entries, excluded from the fit
    std::filesystem::path csv_path;
};

/// One training run per grid value (validation loss as the sweep objective).
/// Emits <out_dir>/sweep.csv.
SweepResult sweep_run(const config::RunConfig& base, const std::vector<double>& lr_grid);

/// Token stream helpers. A ".ids" / ".tokens" suffix selects the
/// whitespace-separated integer format; anything else is raw bytes.
std::vector<int> load_token_stream(const std::filesystem::path& path, int vocab);

/// Periodic random-block stream: a seeded random block of `period` ids
/// repeated to `length`. The model can drive next-token loss toward zero on
/// it, which makes it the smoke-test workload.
void write_copy_task(const std::filesystem::path& path, int period, int length, uint64_t seed);

}  // namespace spherelab::train
