// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "mvht/common.hpp"

namespace mvht {

namespace {

constexpr double kSsimK1 = 0.01, kSsimK2 = 0.03;
constexpr int kSsimWindow = 8;
constexpr double kPsnrCap = 100.0;

void check_pair(const Tensor& a, const Tensor& b, const Tensor& mask, const char* what) {
    if (a.rank() != 3 || b.rank() != 3)
        throw param_error(std::string(what) + ": images must be [C,H,W]");
    if (!a.same_shape(b)) throw param_error(std::string(what) + ": image shapes differ");
    if (mask.rank() != 3 || mask.dim(0) != 1 || mask.dim(1) != a.dim(1) ||
        mask.dim(2) != a.dim(2))
        throw param_error(std::string(what) + ": mask must be [1,H,W] matching the images");
}

bool on(const Tensor& mask, int y, int x) { return mask.at3(0, y, x) > 0.5; }

}  // namespace

Embedder toy_embedder() {
    return [](const Tensor& img) {
        if (img.rank() != 3) throw param_error("toy_embedder: image must be [C,H,W]");
        const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
        if (H % 8 != 0 || W % 8 != 0)
            throw param_error("toy_embedder: image sides must be divisible by 8");
        const int bh = H / 8, bw = W / 8;
        Tensor e({C * 64});
        int64_t i = 0;
        for (int c = 0; c < C; ++c)
            for (int by = 0; by < 8; ++by)
                for (int bx = 0; bx < 8; ++bx) {
                    double s = 0;
                    for (int y = by * bh; y < (by + 1) * bh; ++y)
                        for (int x = bx * bw; x < (bx + 1) * bw; ++x) s += img.at3(c, y, x);
                    e[i++] = s / (bh * bw);
                }
        double norm = 0;
        for (double v : e.data) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0) throw data_error("toy_embedder: zero-norm embedding (all-zero image)");
        for (double& v : e.data) v /= norm;
        return e;
    };
}

double masked_psnr(const Tensor& a, const Tensor& b, const Tensor& mask) {
    check_pair(a, b, mask, "masked_psnr");
    const int C = a.dim(0), H = a.dim(1), W = a.dim(2);
    double se = 0;
    int64_t n = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!on(mask, y, x)) continue;
            for (int c = 0; c < C; ++c) {
                double d = a.at3(c, y, x) - b.at3(c, y, x);
                se += d * d;
            }
            n += C;
        }
    if (n == 0) throw data_error("masked_psnr: empty mask");
    double mse = se / static_cast<double>(n);
    if (mse == 0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double masked_ssim(const Tensor& a, const Tensor& b, const Tensor& mask) {
    check_pair(a, b, mask, "masked_ssim");
    const int C = a.dim(0), H = a.dim(1), W = a.dim(2);
    if (H < kSsimWindow || W < kSsimWindow)
        throw param_error("masked_ssim: image smaller than the 8x8 window");
    const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
    const int n = kSsimWindow * kSsimWindow;
    double total = 0;
    int64_t windows = 0;
    for (int y0 = 0; y0 + kSsimWindow <= H; ++y0)
        for (int x0 = 0; x0 + kSsimWindow <= W; ++x0) {
            bool inside = true;
            for (int y = y0; inside && y < y0 + kSsimWindow; ++y)
                for (int x = x0; x < x0 + kSsimWindow; ++x)
                    if (!on(mask, y, x)) {
                        inside = false;
                        break;
                    }
            if (!inside) continue;
            for (int c = 0; c < C; ++c) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int y = y0; y < y0 + kSsimWindow; ++y)
                    for (int x = x0; x < x0 + kSsimWindow; ++x) {
                        double va = a.at3(c, y, x), vb = b.at3(c, y, x);
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                double ma = sa / n, mb = sb / n;
                double va = (saa - n * ma * ma) / (n - 1);
                double vb = (sbb - n * mb * mb) / (n - 1);
                double cov = (sab - n * ma * mb) / (n - 1);
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                         ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
            ++windows;
        }
    if (windows == 0) throw data_error("masked_ssim: no 8x8 window lies fully inside the mask");
    return total / static_cast<double>(windows * C);
}

double frechet_distance(const std::vector<Tensor>& set_a, const std::vector<Tensor>& set_b,
                        const Embedder& embed) {
    if (!embed) throw param_error("frechet_distance: missing embedder");
    if (set_a.size() < 2 || set_b.size() < 2)
        throw data_error("frechet_distance: each set needs >= 2 images");

    auto stats = [&](const std::vector<Tensor>& set, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
        const int64_t m = static_cast<int64_t>(set.size());
        Tensor e0 = embed(set[0]);
        const int64_t w = e0.numel();
        Eigen::MatrixXd X(m, w);
        for (int64_t i = 0; i < m; ++i) {
            Tensor e = i == 0 ? e0 : embed(set[static_cast<size_t>(i)]);
            if (e.numel() != w) throw data_error("frechet_distance: embedder width varies");
            for (int64_t j = 0; j < w; ++j) X(i, j) = e[j];
        }
        mu = X.colwise().mean();
        Eigen::MatrixXd D = X.rowwise() - mu.transpose();
        cov = D.transpose() * D / static_cast<double>(m - 1);
        // Shrinkage keeps small-sample covariances nonsingular.
        double lambda = 1e-6 * cov.trace() / static_cast<double>(w);
        cov += lambda * Eigen::MatrixXd::Identity(w, w);
    };

    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd ca, cb;
    stats(set_a, mu_a, ca);
    stats(set_b, mu_b, cb);
    if (mu_a.size() != mu_b.size()) throw data_error("frechet_distance: embedder width varies");

    // sqrt(Sa) via eigendecomposition, then Tr((Sa Sb)^{1/2}) through the
    // symmetric product sqrt(Sa) Sb sqrt(Sa).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_a(ca);
    Eigen::VectorXd ev = es_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd sqrt_a =
        es_a.eigenvectors() * ev.asDiagonal() * es_a.eigenvectors().transpose();
    Eigen::MatrixXd prod = sqrt_a * cb * sqrt_a;
    prod = 0.5 * (prod + prod.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_p(prod);
    double tr_sqrt = es_p.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    return (mu_a - mu_b).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
}

double embed_similarity(const Tensor& a, const Tensor& b, const Embedder& embed) {
    if (!embed) throw param_error("embed_similarity: missing embedder");
    Tensor ea = embed(a), eb = embed(b);
    if (!ea.same_shape(eb)) throw data_error("embed_similarity: embedder width varies");
    double dot = 0, na = 0, nb = 0;
    for (int64_t i = 0; i < ea.numel(); ++i) {
        dot += ea[i] * eb[i];
        na += ea[i] * ea[i];
        nb += eb[i] * eb[i];
    }
    if (na == 0 || nb == 0) throw data_error("embed_similarity: zero-norm embedding");
    double cs = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::max(-1.0, std::min(1.0, cs));
}

Heatmap frame_diff_heatmap(const std::vector<Tensor>& frames) {
    if (frames.size() < 2) throw param_error("frame_diff_heatmap: needs >= 2 frames");
    const Tensor& f0 = frames[0];
    if (f0.rank() != 3) throw param_error("frame_diff_heatmap: frames must be [C,H,W]");
    const int C = f0.dim(0), H = f0.dim(1), W = f0.dim(2);
    for (const Tensor& f : frames)
        if (!f.same_shape(f0)) throw param_error("frame_diff_heatmap: frame shapes differ");

    Heatmap hm;
    hm.map = Tensor({1, H, W});
    const double denom = static_cast<double>(frames.size() - 1) * C;
    for (size_t i = 0; i + 1 < frames.size(); ++i)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    hm.map.at3(0, y, x) +=
                        std::abs(frames[i + 1].at3(c, y, x) - frames[i].at3(c, y, x)) / denom;
    double mx = 0;
    for (double v : hm.map.data) mx = std::max(mx, v);
    hm.scale = mx;
    if (mx > 0)
        for (double& v : hm.map.data) v /= mx;
    return hm;
}

double temporal_smoothness_score(const std::vector<Tensor>& frames,
                                 const std::vector<Tensor>& hair_masks) {
    if (hair_masks.size() != frames.size())
        throw param_error("temporal_smoothness_score: one mask per frame required");
    Heatmap hm = frame_diff_heatmap(frames);
    const int H = hm.map.dim(1), W = hm.map.dim(2);
    for (const Tensor& m : hair_masks)
        if (m.rank() != 3 || m.dim(0) != 1 || m.dim(1) != H || m.dim(2) != W)
            throw param_error("temporal_smoothness_score: mask shape mismatch");
    double total = 0;
    int64_t n = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            bool any = false;
            for (const Tensor& m : hair_masks)
                if (on(m, y, x)) {
                    any = true;
                    break;
                }
            if (!any) continue;
            total += hm.map.at3(0, y, x) * hm.scale;
            ++n;
        }
    if (n == 0) throw data_error("temporal_smoothness_score: empty mask union");
    return total / static_cast<double>(n);
}

}  // namespace mvht
