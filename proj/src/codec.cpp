// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/codec.hpp"

#include <cmath>

#include "mvht/rng.hpp"

namespace mvht {

LatentCodec make_codec(int f, int channels, uint64_t seed) {
    if (f < 1) throw param_error("make_codec: f must be >= 1");
    if (channels < 1) throw param_error("make_codec: channels must be >= 1");
    LatentCodec c;
    c.f = f;
    c.channels = channels;
    c.seed = seed;
    int n = c.latent_channels();

    // Seeded Gaussian matrix orthonormalized by modified Gram-Schmidt with a
    // re-orthogonalization pass; n is small so this is exact to ~1e-15.
    Rng rng(child_seed(seed, "codec.mixing"));
    Tensor m({n, n});
    for (double& v : m.data) v = rng.gauss();
    for (int i = 0; i < n; ++i) {
        for (int pass = 0; pass < 2; ++pass)
            for (int j = 0; j < i; ++j) {
                double d = 0.0;
                for (int k = 0; k < n; ++k) d += m.at2(i, k) * m.at2(j, k);
                for (int k = 0; k < n; ++k) m.at2(i, k) -= d * m.at2(j, k);
            }
        double nrm = 0.0;
        for (int k = 0; k < n; ++k) nrm += m.at2(i, k) * m.at2(i, k);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-8) throw data_error("make_codec: degenerate mixing draw");
        for (int k = 0; k < n; ++k) m.at2(i, k) /= nrm;
    }
    c.mixing = std::move(m);
    return c;
}

Tensor encode(const LatentCodec& c, const Tensor& img) {
    if (img.rank() != 3) throw param_error("encode: want [C,H,W]");
    int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (C != c.channels) throw param_error("encode: channel count mismatch");
    if (H % c.f != 0 || W % c.f != 0) throw param_error("encode: dims not divisible by f");
    for (double v : img.data)
        if (v < -1e-9 || v > 1.0 + 1e-9) throw param_error("encode: pixel outside [0,1]");

    int f = c.f, n = c.latent_channels(), h = H / f, w = W / f;
    Tensor out({n, h, w});
    std::vector<double> u(static_cast<size_t>(n));
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            for (int ch = 0; ch < C; ++ch)
                for (int di = 0; di < f; ++di)
                    for (int dj = 0; dj < f; ++dj)
                        u[static_cast<size_t>(ch * f * f + di * f + dj)] =
                            2.0 * img.at3(ch, i * f + di, j * f + dj) - 1.0;
            for (int r = 0; r < n; ++r) {
                double s = 0.0;
                for (int k = 0; k < n; ++k) s += c.mixing.at2(r, k) * u[static_cast<size_t>(k)];
                out.at3(r, i, j) = s;
            }
        }
    return out;
}

Tensor decode(const LatentCodec& c, const Tensor& latent) {
    if (latent.rank() != 3) throw param_error("decode: want [C,H,W]");
    int n = c.latent_channels();
    if (latent.dim(0) != n) throw param_error("decode: latent channel count mismatch");
    int h = latent.dim(1), w = latent.dim(2), f = c.f, C = c.channels;

    Tensor out({C, h * f, w * f});
    std::vector<double> y(static_cast<size_t>(n));
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            for (int r = 0; r < n; ++r) y[static_cast<size_t>(r)] = latent.at3(r, i, j);
            for (int k = 0; k < n; ++k) {
                double s = 0.0;
                for (int r = 0; r < n; ++r) s += c.mixing.at2(r, k) * y[static_cast<size_t>(r)];
                double px = 0.5 * (s + 1.0);
                int ch = k / (f * f), di = (k % (f * f)) / f, dj = k % f;
                out.at3(ch, i * f + di, j * f + dj) = px;
            }
        }
    return out;
}

}  // namespace mvht
