#include "spherelab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace spherelab::optim {

OptimizerState OptimizerState::for_param(const Mat& w0, double cg_ratio) {
    OptimizerState s;
    s.momentum = Mat::zeros(w0.rows, w0.cols);
    s.adam_m = Mat::zeros(w0.rows, w0.cols);
    s.adam_v = Mat::zeros(w0.rows, w0.cols);
    s.c_w = frobenius_norm(w0);
    s.c_g = s.c_w * cg_ratio;
    return s;
}

Mat tangent_project(const Mat& delta, const Mat& w) {
    if (!delta.same_shape(w)) throw std::invalid_argument("tangent_project: shape mismatch");
    const double wn2 = fdot(w, w);
    if (wn2 == 0.0) throw std::invalid_argument("tangent_project: zero reference weight");
    Mat out = delta;
    axpy(-fdot(delta, w) / wn2, w, out);
    return out;
}

Mat hypersphere_project(const Mat& w_tilde, double c_w) {
    const double n = frobenius_norm(w_tilde);
    if (n == 0.0) throw std::invalid_argument("hypersphere_project: zero input");
    return scale(w_tilde, c_w / n);
}

Mat muon_raw_update(const Mat& grad, OptimizerState& state, double momentum, int ns_steps) {
    if (!grad.same_shape(state.momentum)) throw std::invalid_argument("muon_raw_update: shape mismatch");
    // m <- mu*m + g; Nesterov blend g + mu*m.
    for (size_t i = 0; i < state.momentum.v.size(); ++i)
        state.momentum.v[i] = momentum * state.momentum.v[i] + grad.v[i];
    Mat blend = grad;
    axpy(momentum, state.momentum, blend);
    if (frobenius_norm(blend) == 0.0) return Mat::zeros(grad.rows, grad.cols);
    return newton_schulz_orthogonalize(blend, ns_steps);
}

Mat muonh_step(const Mat& w, const Mat& grad, double eta, OptimizerState& state) {
    if (state.c_w <= 0.0) throw std::invalid_argument("muonh_step: sphere state not initialized");
    state.step += 1;
    Mat g = muon_raw_update(grad, state);
    const double gn = frobenius_norm(g);
    if (gn == 0.0) return w;  // skip: frozen branch, nothing to do
    Mat ghat = scale(g, state.c_g / gn);
    Mat wt = w;
    axpy(-eta, ghat, wt);
    return hypersphere_project(wt, state.c_w);
}

Mat muon_step(const Mat& w, const Mat& grad, double eta, double lambda, OptimizerState& state) {
    state.step += 1;
    Mat g = muon_raw_update(grad, state);
    Mat out = w;
    axpy(-eta, g, out);
    axpy(-lambda, w, out);  // independent decay: coefficient not multiplied by eta
    return out;
}

namespace {

Mat adam_direction(const Mat& grad, OptimizerState& state, const AdamHyper& h) {
    state.step += 1;
    for (size_t i = 0; i < grad.v.size(); ++i) {
        state.adam_m.v[i] = h.beta1 * state.adam_m.v[i] + (1.0 - h.beta1) * grad.v[i];
        state.adam_v.v[i] = h.beta2 * state.adam_v.v[i] + (1.0 - h.beta2) * grad.v[i] * grad.v[i];
    }
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
    Mat u(grad.rows, grad.cols);
    for (size_t i = 0; i < grad.v.size(); ++i) {
        const double mh = state.adam_m.v[i] / bc1;
        const double vh = state.adam_v.v[i] / bc2;
        u.v[i] = mh / (std::sqrt(vh) + h.eps);
    }
    return u;
}

}  // namespace

Mat adamw_step(const Mat& w, const Mat& grad, double eta, double lambda, OptimizerState& state,
               const AdamHyper& h) {
    if (!grad.same_shape(w)) throw std::invalid_argument("adamw_step: shape mismatch");
    Mat u = adam_direction(grad, state, h);
    Mat out = w;
    axpy(-eta, u, out);
    axpy(-eta * lambda, w, out);
    return out;
}

Mat adamh_step(const Mat& w, const Mat& grad, double eta, OptimizerState& state, const AdamHyper& h) {
    if (state.c_w <= 0.0) throw std::invalid_argument("adamh_step: sphere state not initialized");
    Mat u = adam_direction(grad, state, h);
    const double un = frobenius_norm(u);
    if (un == 0.0) return w;
    Mat uhat = scale(u, state.c_g / un);
    Mat wt = w;
    axpy(-eta, uhat, wt);
    return hypersphere_project(wt, state.c_w);
}

double lr_schedule(long step, long total_steps, double eta_peak) {
    if (total_steps <= 0) throw std::invalid_argument("lr_schedule: total_steps must be positive");
    if (step < 0 || step > total_steps) throw std::invalid_argument("lr_schedule: step out of range");
    return eta_peak * (1.0 - 0.9 * static_cast<double>(step) / static_cast<double>(total_steps));
}

}  // namespace spherelab::optim
