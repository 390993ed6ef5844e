// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "mvht/tensor.hpp"

namespace mvht {

// image [C,H,W] -> fixed-width embedding vector. Implementations must keep
// the width constant; external-model adapters plug in through the same type.
using Embedder = std::function<Tensor(const Tensor&)>;

// Downsamples each channel to 8x8 block means, flattens and L2-normalizes
// (width 3*64 for RGB). Unit norm by construction; an all-zero image has no
// direction and raises data_error.
Embedder toy_embedder();

// Mean-squared-error PSNR over mask>0.5 pixels (all channels), peak 1.0,
// capped at 100 dB for identical regions.
double masked_psnr(const Tensor& a, const Tensor& b, const Tensor& mask);

// Mean SSIM over 8x8 stride-1 windows lying fully inside the mask, averaged
// across channels; k1=0.01, k2=0.03, peak 1.0, unbiased (n-1) moments.
double masked_ssim(const Tensor& a, const Tensor& b, const Tensor& mask);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}) over embedder outputs,
// with shrinkage Sa += lambda I, lambda = 1e-6 trace/width, so desk-scale
// sample counts stay nonsingular. Needs >= 2 images per set.
double frechet_distance(const std::vector<Tensor>& set_a, const std::vector<Tensor>& set_b,
                        const Embedder& embed);

// Cosine similarity of the two embeddings, in [-1, 1].
double embed_similarity(const Tensor& a, const Tensor& b, const Embedder& embed);

// Per-pixel mean absolute adjacent-frame difference. map is normalized to
// [0,1]; scale is the normalization constant (raw = map * scale).
struct Heatmap {
    Tensor map;  // [1,H,W]
    double scale = 0.0;
};
Heatmap frame_diff_heatmap(const std::vector<Tensor>& frames);

// Mean raw frame-difference value inside the union of the per-frame hair
// masks; lower is smoother. Equals the masked mean of map*scale.
double temporal_smoothness_score(const std::vector<Tensor>& frames,
                                 const std::vector<Tensor>& hair_masks);

}  // namespace mvht
