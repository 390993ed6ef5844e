// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "mvht/tensor.hpp"

namespace mvht {

// Exactly invertible image<->latent transform: space-to-depth by factor f,
// a fixed seeded orthogonal channel mix, then an affine shift that maps the
// [0,1] pixel box to a roughly zero-mean range. decode(encode(x)) == x to
// floating-point accuracy.
struct LatentCodec {
    int f = 2;
    int channels = 3;   // image channels
    uint64_t seed = 0;
    Tensor mixing;      // (channels*f^2) x (channels*f^2), orthogonal

    int latent_channels() const { return channels * f * f; }
};

LatentCodec make_codec(int f, int channels, uint64_t seed);

// img: [C,H,W] with values in [0,1], H and W divisible by f.
Tensor encode(const LatentCodec& c, const Tensor& img);

// latent: [C*f^2, H/f, W/f]. Output is not clipped; callers clip at export.
Tensor decode(const LatentCodec& c, const Tensor& latent);

}  // namespace mvht
