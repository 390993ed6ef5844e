// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvht/rng.hpp"
#include "mvht/tensor.hpp"

namespace mvht {

// Camera pose plus the sampled augmentation magnitude. pose_noise is always
// 0 at inference.
struct CameraPose {
    double polar = 0.0;       // radians, [-pi/2, pi/2]
    double azimuth = 0.0;     // radians, [0, 2*pi)
    double pose_noise = 0.0;  // L2 magnitude of the training perturbation
};

// Log-spaced sin/cos embedding, layout [sin(w_0 v)..sin(w_{h-1} v),
// cos(w_0 v)..], frequencies spanning 1 down to 1/10000.
Tensor sinusoidal_embed(double value, int dim);

// e_f = E(t) + concat(E(pose_noise), E(polar), E(azimuth)), sub-widths dim/3.
Tensor fuse_pose_time(int t, const CameraPose& pose, int dim);

// Perturbs polar and azimuth by N(0, sigma^2) draws, stores the perturbation
// magnitude, clamps polar and wraps azimuth back into range.
CameraPose augment_pose(const CameraPose& pose, double sigma, Rng& rng);

}  // namespace mvht
