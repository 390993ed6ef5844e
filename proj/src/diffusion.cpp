// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/diffusion.hpp"

#include <cmath>

#include "mvht/ops.hpp"

namespace mvht {

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 2) throw param_error("build_schedule: T must be >= 2");
    if (!(beta_start > 0.0)) throw param_error("build_schedule: beta_start must be > 0");
    if (!(beta_end >= beta_start)) throw param_error("build_schedule: beta_end must be >= beta_start");
    if (!(beta_end < 1.0)) throw param_error("build_schedule: beta_end must be < 1");

    NoiseSchedule s;
    s.T = T;
    s.beta.resize(static_cast<size_t>(T));
    s.alpha_bar.resize(static_cast<size_t>(T));
    double r0 = std::sqrt(beta_start), r1 = std::sqrt(beta_end);
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        double r = r0 + (r1 - r0) * static_cast<double>(t) / static_cast<double>(T - 1);
        s.beta[static_cast<size_t>(t)] = r * r;
        prod *= 1.0 - r * r;
        s.alpha_bar[static_cast<size_t>(t)] = prod;
    }
    return s;
}

Tensor add_noise(const Tensor& z0, const Tensor& eps, int t, const NoiseSchedule& s) {
    if (!z0.same_shape(eps)) throw param_error("add_noise: shape mismatch");
    if (t < 0 || t >= s.T) throw param_error("add_noise: t out of range");
    double ab = s.alpha_bar[static_cast<size_t>(t)];
    double c0 = std::sqrt(ab), c1 = std::sqrt(1.0 - ab);
    Tensor out = z0;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = c0 * z0.data[i] + c1 * eps.data[i];
    return out;
}

double noise_prediction_loss(const Tensor& eps_pred, const Tensor& eps) {
    if (!eps_pred.same_shape(eps)) throw param_error("noise_prediction_loss: shape mismatch");
    // Same code path the trainer differentiates through.
    NoGradGuard ng;
    return ops::mse(constant(eps_pred), constant(eps))->val.data[0];
}

Tensor ddim_step(const Tensor& z_t, const Tensor& eps_pred, int t, int t_prev,
                 const NoiseSchedule& s) {
    if (!z_t.same_shape(eps_pred)) throw param_error("ddim_step: shape mismatch");
    if (t < 0 || t >= s.T) throw param_error("ddim_step: t out of range");
    if (t_prev >= t || t_prev < -1) throw param_error("ddim_step: t_prev must be in [-1, t)");
    double ab_t = s.alpha_bar[static_cast<size_t>(t)];
    double ab_p = t_prev < 0 ? 1.0 : s.alpha_bar[static_cast<size_t>(t_prev)];
    double inv = 1.0 / std::sqrt(ab_t), c1 = std::sqrt(1.0 - ab_t);
    double p0 = std::sqrt(ab_p), p1 = std::sqrt(1.0 - ab_p);
    Tensor out = z_t;
    for (size_t i = 0; i < out.data.size(); ++i) {
        double z0_hat = (z_t.data[i] - c1 * eps_pred.data[i]) * inv;
        out.data[i] = p0 * z0_hat + p1 * eps_pred.data[i];
    }
    return out;
}

Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double scale) {
    if (!eps_uncond.same_shape(eps_cond)) throw param_error("cfg_combine: shape mismatch");
    if (scale < 0.0) throw param_error("cfg_combine: scale must be >= 0");
    // Endpoints return the operand itself so the identities are bit-exact.
    if (scale == 0.0) return eps_uncond;
    if (scale == 1.0) return eps_cond;
    Tensor out = eps_uncond;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = eps_uncond.data[i] + scale * (eps_cond.data[i] - eps_uncond.data[i]);
    return out;
}

std::vector<int> ddim_timesteps(int T, int steps) {
    if (steps < 1 || steps > T) throw param_error("ddim_timesteps: steps must be in [1, T]");
    std::vector<int> ts(static_cast<size_t>(steps));
    for (int k = 0; k < steps; ++k)
        ts[static_cast<size_t>(steps - 1 - k)] = static_cast<int>(
            static_cast<int64_t>(k) * T / steps);
    return ts;
}

}  // namespace mvht
