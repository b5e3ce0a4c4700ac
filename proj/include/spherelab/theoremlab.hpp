#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace spherelab::theoremlab {

/// One numerical verification result. pass <=> statistic within threshold
/// (the meaning of "within" is per check and spelled out in details).
struct CheckReport {
    std::string name;
    long trials = 0;
    double statistic = 0.0;
    double threshold = 0.0;
    bool pass = false;
    nlohmann::json details;
};

/// All tolerance bands in one table; calibrated against Monte-Carlo noise at
/// the stated trial counts.
struct Thresholds {
    double ratio_lo = 0.2;           // quarter-ratio band for quadratic residuals
    double ratio_hi = 0.3;
    double ratio_pass_frac = 0.99;   // fraction of random trials that must land in band
    double width_rms_band = 0.10;    // width-transfer mean ratio within 1 +/- this
    double depth_slope_band = 0.07;  // depth exponents within target +/- this
    double depth_flatten_band = 0.15;  // lr-scaled perturbation spread
    double gating_band = 0.05;       // gating RMS within 5% of prediction
    double ln_jacobian_tol = 1e-6;   // max-abs analytic vs finite differences
};

inline constexpr Thresholds kThresholds{};

CheckReport check_first_order_expansion(uint64_t seed);
CheckReport check_wd_noop(uint64_t seed);
CheckReport check_width_transfer(uint64_t seed);
CheckReport check_depth_scaling(uint64_t seed);
CheckReport check_bounded_logits(uint64_t seed);
CheckReport check_gating_rms(uint64_t seed);
CheckReport check_ln_jacobian(uint64_t seed);

/// Run every check with seeds derived from the master seed.
std::vector<CheckReport> run_all_checks(uint64_t seed);

}  // namespace spherelab::theoremlab
