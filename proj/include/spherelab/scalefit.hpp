#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spherelab/model.hpp"

namespace spherelab::scalefit {

struct SweepPoint {
    double lr = 0.0;
    double loss = 0.0;
};

struct QuadFit {
    double eta_star = 0.0;
    double loss_star = 0.0;
    double curvature = 0.0;  // a in loss = a*ln(eta)^2 + b*ln(eta) + c
    double r_squared = 0.0;
    bool has_minimum = false;   // curvature > 0
    bool extrapolated = false;  // eta_star outside [min lr / 4, max lr * 4]
};

/// Thrown when the fitted parabola opens downward; carries the fit.
struct NoInteriorMinimum : std::runtime_error {
    QuadFit fit;
    explicit NoInteriorMinimum(QuadFit f)
        : std::runtime_error("no interior minimum: fitted curvature <= 0"), fit(f) {}
};

/// Least-squares parabola in log(lr) space. Duplicate lrs collapse to their
/// mean loss first; needs >= 3 distinct lrs. Throws NoInteriorMinimum when
/// curvature <= 0.
QuadFit fit_quadratic_loglr(std::span<const SweepPoint> points);

/// Non-throwing variant: has_minimum = false instead of throwing.
QuadFit try_fit_quadratic_loglr(std::span<const SweepPoint> points);

/// Power law with optional irreducible floor: y = A * x^(-b) + C0.
struct PowerFit {
    double amplitude = 0.0;  // A > 0
    double exponent = 0.0;   // b, signed: y = A * x^(-b) + C0
    double floor = 0.0;      // C0 (0 when fitted floorless)
    double residual = 0.0;   // sum of squared residuals in linear space
};

struct XY {
    double x = 0.0;
    double y = 0.0;
};

/// Nonlinear least squares in linear space (residuals y - A*x^(-b) - C0),
/// seeded by a log-log regression. Floorless: 1-D search over the exponent
/// with the amplitude closed-form. With floor: golden-section over
/// C0 in [0, 0.999*min(y)] with the floorless fit inside.
PowerFit fit_power_law(std::span<const XY> points, bool with_floor);

/// Compute-efficiency leverage rho = C_base / c_star, with C_base the
/// baseline compute needed to reach l_star per its fitted law.
double cel(const PowerFit& baseline, double c_star, double l_star);

struct ParamCount {
    long long embedding_vector = 0;
    long long unembedding = 0;
    long long hidden = 0;
    long long total() const { return embedding_vector + unembedding + hidden; }
};

ParamCount param_count(const model::ModelConfig& cfg);

/// Fine-grained training FLOPs: 3 * T * (2 * active matmul params +
/// 2 * s * (q_width + v_width) * layers). Multiply-accumulate counts as 2
/// FLOPs; backward as twice forward.
double chinchilla_flops(const model::ModelConfig& cfg, double tokens, int context);

struct SensitivityResult {
    double mean_lr_rel_err_pct = 0.0;
    double mean_loss_rel_err_pct = 0.0;
    long long subsets_total = 0;
    long long subsets_no_minimum = 0;    // curvature <= 0, excluded from means
    long long subsets_extrapolated = 0;  // eta_star outside the trusted range, excluded
};

/// Enumerate all C(n,k) subsets, fit each, and report mean relative errors
/// of eta_star and loss_star against the full n-point fit.
SensitivityResult sensitivity(std::span<const SweepPoint> points, int k);

/// Leave-one-out cross-validation of the floorless power law; returns the
/// mean absolute relative prediction error in percent.
double loo_cv_power(std::span<const XY> points);

/// CSV helpers (two numeric columns; a non-numeric first row is a header).
std::vector<XY> read_xy_csv(const std::filesystem::path& path);
std::vector<SweepPoint> read_sweep_csv(const std::filesystem::path& path);

}  // namespace spherelab::scalefit
