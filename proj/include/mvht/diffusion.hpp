// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "mvht/tensor.hpp"

namespace mvht {

// Canonical schedule constants; every other default derives from these.
inline constexpr int kScheduleT = 1000;
inline constexpr double kBetaStart = 8.5e-4;
inline constexpr double kBetaEnd = 1.2e-2;

// Variance schedule with cached cumulative products. beta is scaled-linear
// (linear in sqrt-beta) between the configured endpoints.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha_bar;
};

struct GuidanceConfig {
    double cfg_scale = 1.5;
    int sampler_steps = 30;
};

NoiseSchedule build_schedule(int T, double beta_start, double beta_end);

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
Tensor add_noise(const Tensor& z0, const Tensor& eps, int t, const NoiseSchedule& s);

double noise_prediction_loss(const Tensor& eps_pred, const Tensor& eps);

// Deterministic DDIM update from t to t_prev. t_prev == -1 denotes the fully
// denoised endpoint (alpha_bar = 1), so the step returns the predicted z0.
Tensor ddim_step(const Tensor& z_t, const Tensor& eps_pred, int t, int t_prev,
                 const NoiseSchedule& s);

Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double scale);

// Descending uniform-stride sampling timesteps: floor(k*T/steps) for
// k = steps-1 .. 0. The implicit final target is -1.
std::vector<int> ddim_timesteps(int T, int steps);

}  // namespace mvht
