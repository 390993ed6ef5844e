// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/pose.hpp"

#include <cmath>
#include <numbers>

namespace mvht {

Tensor sinusoidal_embed(double value, int dim) {
    if (dim < 2 || dim % 2 != 0) throw param_error("sinusoidal_embed: dim must be even, >= 2");
    int half = dim / 2;
    Tensor out({dim});
    for (int i = 0; i < half; ++i) {
        double expo = half > 1 ? static_cast<double>(i) / static_cast<double>(half - 1) : 0.0;
        double w = std::pow(10000.0, -expo);
        out[i] = std::sin(value * w);
        out[half + i] = std::cos(value * w);
    }
    return out;
}

Tensor fuse_pose_time(int t, const CameraPose& pose, int dim) {
    if (dim % 6 != 0) throw param_error("fuse_pose_time: dim must be divisible by 6");
    Tensor e = sinusoidal_embed(static_cast<double>(t), dim);
    int sub = dim / 3;
    Tensor en = sinusoidal_embed(pose.pose_noise, sub);
    Tensor ep = sinusoidal_embed(pose.polar, sub);
    Tensor ea = sinusoidal_embed(pose.azimuth, sub);
    for (int i = 0; i < sub; ++i) {
        e[i] += en[i];
        e[sub + i] += ep[i];
        e[2 * sub + i] += ea[i];
    }
    return e;
}

CameraPose augment_pose(const CameraPose& pose, double sigma, Rng& rng) {
    if (sigma < 0.0) throw param_error("augment_pose: sigma must be >= 0");
    double dp = sigma * rng.gauss();
    double da = sigma * rng.gauss();
    CameraPose out;
    out.polar = std::clamp(pose.polar + dp, -std::numbers::pi / 2.0, std::numbers::pi / 2.0);
    double two_pi = 2.0 * std::numbers::pi;
    out.azimuth = std::fmod(pose.azimuth + da, two_pi);
    if (out.azimuth < 0.0) out.azimuth += two_pi;
    out.pose_noise = std::sqrt(dp * dp + da * da);
    return out;
}

}  // namespace mvht
