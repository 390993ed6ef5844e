// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "mvht/model.hpp"

namespace mvht {

struct SampleOpts {
    int steps = GuidanceConfig{}.sampler_steps;
    double cfg_scale = GuidanceConfig{}.cfg_scale;
    uint64_t seed = 0;
};

struct FrameSequence {
    std::vector<Tensor> frames;       // [3,S,S] each, quantized to the 8-bit grid
    std::vector<CameraPose> poses;    // pass-through of the requested poses
};

// Removes hair from one source view with the dedicated converter checkpoint
// (stage "bald"). Guidance contrasts the identity-conditioned prediction
// against the unconditional one. Output is clipped and 8-bit-quantized, so
// PNG export round-trips losslessly.
Tensor bald_convert(const ModelBundle& bald, const Tensor& source, const CameraPose& pose,
                    const SampleOpts& opts);

// Hair transfer onto a bald proxy at one pose with a stage-2/3 checkpoint.
// Guidance contrasts the reference bank against the learned null bank;
// scale 1 skips the unconditional pass entirely.
Tensor transfer_single_view(const ModelBundle& main, const Tensor& bald_proxy,
                            const Tensor& reference, const CameraPose& pose,
                            const SampleOpts& opts);

// K-view transfer. temporal=false runs K independent single-view samples
// (per-frame seed stream); temporal=true denoises all frames jointly with
// temporal attention (stage-3 checkpoint, K <= max_frames) from the same
// per-frame noise streams.
FrameSequence transfer_multi_view(const ModelBundle& main, const Tensor& bald_proxy,
                                  const Tensor& reference, const std::vector<CameraPose>& poses,
                                  const SampleOpts& opts, bool temporal);

}  // namespace mvht
