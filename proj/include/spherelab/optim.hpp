#pragma once

#include <optional>
#include <string>

#include "spherelab/linalg.hpp"

namespace spherelab::optim {

/// Per-parameter optimizer buffers plus the sphere radii. c_w is frozen to
/// the initial Frobenius norm at step 0 and never changes; c_g defaults to
/// c_w but may be configured independently.
struct OptimizerState {
    Mat momentum;     // muon momentum buffer
    Mat adam_m;       // adam first moment
    Mat adam_v;       // adam second moment
    double c_w = 0.0; // sphere radius (initial weight norm)
    double c_g = 0.0; // update-normalization target
    long step = 0;

    static OptimizerState for_param(const Mat& w0, double cg_ratio = 1.0);
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
};

constexpr double kMuonMomentum = 0.95;

/// Tangent-space projection at W: Delta - (<Delta,W>_F / ||W||_F^2) W.
Mat tangent_project(const Mat& delta, const Mat& w);

/// Re-projection onto the Frobenius sphere of radius c_w.
Mat hypersphere_project(const Mat& w_tilde, double c_w);

/// Momentum accumulation + Nesterov blend + Newton-Schulz orthogonalization.
/// Mutates state.momentum.
Mat muon_raw_update(const Mat& grad, OptimizerState& state, double momentum = kMuonMomentum,
                    int ns_steps = 5);

/// Frobenius-sphere Muon step: normalize the raw update to c_g, descend,
/// re-project to the c_w sphere. Zero raw update is a skip (returns W).
Mat muonh_step(const Mat& w, const Mat& grad, double eta, OptimizerState& state);

/// Plain Muon step with independent weight decay (decay not multiplied by eta).
Mat muon_step(const Mat& w, const Mat& grad, double eta, double lambda, OptimizerState& state);

/// Decoupled-decay AdamW step (decay multiplied by eta, PyTorch convention).
Mat adamw_step(const Mat& w, const Mat& grad, double eta, double lambda, OptimizerState& state,
               const AdamHyper& h = {});

/// Adam moments with the same weight/update normalization as muonh; the
/// adaptive update is normalized to c_g and the result re-projected to the
/// c_w sphere. Weight decay is forced to zero.
Mat adamh_step(const Mat& w, const Mat& grad, double eta, OptimizerState& state,
               const AdamHyper& h = {});

/// Linear decay to 10% of peak, no warm-up.
double lr_schedule(long step, long total_steps, double eta_peak);

}  // namespace spherelab::optim
