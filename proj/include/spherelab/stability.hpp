#pragma once

#include <span>
#include <vector>

#include "spherelab/linalg.hpp"

namespace spherelab::stability {

/// Per-step instability indicators.
struct StabilityReport {
    long step = 0;
    double attn_z = 0.0;
    double router_z = 0.0;
    double attn_rms = 0.0;
    double moe_rms = 0.0;
    double attn_outlier_pct = 0.0;
    double moe_outlier_pct = 0.0;
    double mean_maxvio = 0.0;
};

/// Mean over rows of LSE(row)^2, max-shifted for overflow safety. Rows may
/// be ragged (causal attention).
double z_metric(const std::vector<std::vector<double>>& logit_rows);

/// LSE of one row (max-shift trick).
double log_sum_exp(std::span<const double> row);

/// RMS over all elements of each matrix, averaged across the given mats
/// (one per layer).
double output_rms(std::span<const Mat> branch_outputs);

/// Percentage of elements farther than 5 population standard deviations
/// from their row (per-token) mean, averaged across layers. Constant rows
/// contribute no outliers.
double outlier_pct(std::span<const Mat> branch_outputs);

/// (max count - mean) / mean over expert dispatch counts.
double maxvio(std::span<const long> counts);

}  // namespace spherelab::stability
