// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "mvht/tensor.hpp"

namespace mvht {

// 8-bit PNG IO over [C,H,W] tensors with values in [0,1]. Writes are
// deterministic (fixed filter/compression settings), so identical tensors
// yield identical bytes. C is 1 (grayscale) or 3 (RGB); reads expand
// palette/alpha/16-bit inputs down to those two layouts.
Tensor read_png(const std::string& path);
void write_png(const std::string& path, const Tensor& img);

// Rounds to the 8-bit grid after clipping to [0,1]; write_png applies this,
// and forge renders on-grid values so disk round-trips are lossless.
double quantize8(double v);

}  // namespace mvht
