// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "mvht/autodiff.hpp"

namespace mvht::ops {

// Elementwise. All binary ops require identical shapes.
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr mul_scalar(const NodePtr& a, double s);
NodePtr silu(const NodePtr& a);

// Reductions to a scalar node of shape [1].
NodePtr mean_all(const NodePtr& a);
NodePtr sum_all(const NodePtr& a);
NodePtr mse(const NodePtr& a, const NodePtr& b);

// x [N,K], w [K,M], b [M] -> [N,M].
NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b);

// x [B,C,H,W], w [O,C,kh,kw], b [O]. im2col + GEMM.
NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b, int stride, int pad);

// x [B,C,H,W], gamma/beta [C]. Normalizes each (sample, group) slice.
NodePtr group_norm(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta, int groups,
                   double eps = 1e-5);

// x [..., L], softmax over the last axis.
NodePtr softmax_lastdim(const NodePtr& x);

// Batched matmul. nn: [B,M,K]x[B,K,N]; nt: [B,M,K]x[B,N,K] -> a.b^T.
NodePtr bmm_nn(const NodePtr& a, const NodePtr& b);
NodePtr bmm_nt(const NodePtr& a, const NodePtr& b);

// Layout. permute supports rank <= 4.
NodePtr reshape(const NodePtr& x, std::vector<int> shape);
NodePtr permute(const NodePtr& x, const std::vector<int>& perm);
NodePtr slice0(const NodePtr& x, int start, int len);
NodePtr concat0(const std::vector<NodePtr>& parts);
NodePtr concat_lastdim(const std::vector<NodePtr>& parts);

// a [B,Ca,H,W], b [B,Cb,H,W] -> [B,Ca+Cb,H,W].
NodePtr concat_channels(const NodePtr& a, const NodePtr& b);

// x [B,C,H,W] -> [B,C,2H,2W].
NodePtr upsample_nearest2(const NodePtr& x);

// x [B,C,H,W] + v [B,C] broadcast over spatial dims.
NodePtr add_channel_vec(const NodePtr& x, const NodePtr& v);

}  // namespace mvht::ops
