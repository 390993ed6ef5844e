// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "mvht/metrics.hpp"
#include "mvht/rng.hpp"

using namespace mvht;

namespace {

Tensor rand_image(Rng& rng, int c = 3, int s = 32) {
    Tensor t({c, s, s});
    for (double& v : t.data) v = rng.uniform();
    return t;
}

Tensor full_mask(int s = 32) {
    Tensor m({1, s, s});
    for (double& v : m.data) v = 1.0;
    return m;
}

}  // namespace

TEST_CASE("masked psnr matches the analytic offset case and caps at 100") {
    Rng rng(1);
    Tensor a = rand_image(rng);
    Tensor mask = full_mask();
    CHECK(masked_psnr(a, a, mask) == 100.0);

    // Uniform 10/255 offset: PSNR = 20 log10(255/10), peak 1.0 scale.
    Tensor b = Tensor::full({3, 32, 32}, 0.5);
    Tensor c = b;
    for (double& v : c.data) v += 10.0 / 255.0;
    double want = 20.0 * std::log10(255.0 / 10.0);
    CHECK(std::abs(masked_psnr(b, c, mask) - want) < 1e-9);

    Tensor empty({1, 32, 32});
    CHECK_THROWS_AS(masked_psnr(a, a, empty), data_error);
}

TEST_CASE("masked psnr and ssim follow scalar-loop oracles under a partial mask") {
    Rng rng(2);
    Tensor a = rand_image(rng), b = rand_image(rng);
    Tensor mask({1, 32, 32});
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) mask.at3(0, y, x) = (y < 20 && x >= 4) ? 1.0 : 0.0;

    double se = 0;
    int n = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (mask.at3(0, y, x) > 0.5) {
                    double d = a.at3(c, y, x) - b.at3(c, y, x);
                    se += d * d;
                    ++n;
                }
    double want = 10.0 * std::log10(1.0 / (se / n));
    CHECK(std::abs(masked_psnr(a, b, mask) - want) < 1e-6);

    // SSIM oracle: average over fully-inside 8x8 windows and channels.
    double total = 0;
    int windows = 0;
    for (int y0 = 0; y0 + 8 <= 32; ++y0)
        for (int x0 = 0; x0 + 8 <= 32; ++x0) {
            bool inside = true;
            for (int y = y0; y < y0 + 8 && inside; ++y)
                for (int x = x0; x < x0 + 8; ++x)
                    if (mask.at3(0, y, x) <= 0.5) {
                        inside = false;
                        break;
                    }
            if (!inside) continue;
            ++windows;
            for (int c = 0; c < 3; ++c) {
                double ma = 0, mb = 0;
                for (int y = y0; y < y0 + 8; ++y)
                    for (int x = x0; x < x0 + 8; ++x) {
                        ma += a.at3(c, y, x);
                        mb += b.at3(c, y, x);
                    }
                ma /= 64;
                mb /= 64;
                double va = 0, vb = 0, cab = 0;
                for (int y = y0; y < y0 + 8; ++y)
                    for (int x = x0; x < x0 + 8; ++x) {
                        va += (a.at3(c, y, x) - ma) * (a.at3(c, y, x) - ma);
                        vb += (b.at3(c, y, x) - mb) * (b.at3(c, y, x) - mb);
                        cab += (a.at3(c, y, x) - ma) * (b.at3(c, y, x) - mb);
                    }
                va /= 63;
                vb /= 63;
                cab /= 63;
                double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
                total += (2 * ma * mb + c1) * (2 * cab + c2) /
                         ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
    REQUIRE(windows > 0);
    CHECK(std::abs(masked_ssim(a, b, mask) - total / (windows * 3)) < 1e-6);
    CHECK(masked_ssim(a, a, mask) == doctest::Approx(1.0).epsilon(1e-9));

    // Mask too sparse for any full window.
    Tensor sparse({1, 32, 32});
    sparse.at3(0, 5, 5) = 1.0;
    CHECK_THROWS_AS(masked_ssim(a, b, sparse), data_error);
}

TEST_CASE("toy embedder emits unit-norm block means") {
    Rng rng(3);
    Tensor img = rand_image(rng);
    Embedder e = toy_embedder();
    Tensor v = e(img);
    REQUIRE(v.numel() == 192);
    double norm = 0;
    for (double x : v.data) norm += x * x;
    CHECK(std::abs(norm - 1.0) < 1e-12);

    Tensor black({3, 32, 32});
    CHECK_THROWS_AS(e(black), data_error);
    Tensor odd({3, 30, 30});
    CHECK_THROWS_AS(e(odd), param_error);
}

TEST_CASE("embedding similarity: identity, antipodal and interpolation sweep") {
    Rng rng(4);
    Tensor a = rand_image(rng);
    Embedder e = toy_embedder();
    CHECK(embed_similarity(a, a, e) == doctest::Approx(1.0).epsilon(1e-9));

    Tensor neg = a;
    for (double& v : neg.data) v = -v;
    CHECK(embed_similarity(a, neg, e) == doctest::Approx(-1.0).epsilon(1e-9));

    // Moving toward b monotonically increases similarity to b.
    Tensor b = rand_image(rng);
    double prev = embed_similarity(a, b, e);
    for (int k = 1; k <= 4; ++k) {
        double w = k / 4.0;
        Tensor mix = a;
        for (int64_t i = 0; i < mix.numel(); ++i) mix[i] = (1 - w) * a[i] + w * b[i];
        double s = embed_similarity(mix, b, e);
        CHECK(s >= prev - 1e-12);
        prev = s;
    }
    CHECK(prev == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("frechet distance: zero on identical sets, symmetric, mean-shift analytic") {
    Rng rng(5);
    Embedder e = toy_embedder();
    std::vector<Tensor> set_a;
    for (int i = 0; i < 6; ++i) set_a.push_back(rand_image(rng));
    CHECK(std::abs(frechet_distance(set_a, set_a, e)) < 1e-6);

    std::vector<Tensor> set_b;
    for (int i = 0; i < 6; ++i) set_b.push_back(rand_image(rng));
    double ab = frechet_distance(set_a, set_b, e);
    double ba = frechet_distance(set_b, set_a, e);
    CHECK(ab > 0);
    CHECK(std::abs(ab - ba) < 1e-9);

    std::vector<Tensor> tiny = {set_a[0]};
    CHECK_THROWS_AS(frechet_distance(tiny, set_b, e), data_error);

    // Raw-vector embedder: shifting every embedding by v moves the Frechet
    // distance to ||v||^2 exactly (equal covariances).
    Embedder raw = [](const Tensor& img) {
        Tensor v({4});
        for (int i = 0; i < 4; ++i) v[i] = img[i];
        return v;
    };
    std::vector<Tensor> sa, sb;
    double shift[4] = {0.3, -0.2, 0.05, 0.4};
    double want = 0;
    for (double s : shift) want += s * s;
    for (int i = 0; i < 8; ++i) {
        Tensor x = rand_image(rng);
        sa.push_back(x);
        Tensor y = x;
        for (int j = 0; j < 4; ++j) y[j] += shift[j];
        sb.push_back(y);
    }
    CHECK(frechet_distance(sa, sb, raw) == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("frechet distance approximates the closed form on sampled gaussians") {
    // Two diagonal 4-d Gaussians with known parameters; closed form:
    // ||dmu||^2 + sum (sqrt(va) - sqrt(vb))^2 over the diagonal.
    Rng rng(6);
    const int dim = 4, n = 20000;
    double mu_a[dim] = {0.0, 1.0, -0.5, 2.0}, sd_a[dim] = {1.0, 0.5, 1.5, 0.8};
    double mu_b[dim] = {0.5, 1.0, 0.5, 1.0}, sd_b[dim] = {0.7, 1.2, 1.0, 1.1};
    double want = 0;
    for (int j = 0; j < dim; ++j) {
        want += (mu_a[j] - mu_b[j]) * (mu_a[j] - mu_b[j]);
        want += (sd_a[j] - sd_b[j]) * (sd_a[j] - sd_b[j]);
    }
    // Identity embedder over 4-pixel "images".
    Embedder raw = [](const Tensor& img) { return img; };
    std::vector<Tensor> sa, sb;
    for (int i = 0; i < n; ++i) {
        Tensor x({dim}), y({dim});
        for (int j = 0; j < dim; ++j) {
            x[j] = mu_a[j] + sd_a[j] * rng.gauss();
            y[j] = mu_b[j] + sd_b[j] * rng.gauss();
        }
        sa.push_back(x);
        sb.push_back(y);
    }
    double got = frechet_distance(sa, sb, raw);
    CHECK(std::abs(got - want) / want < 0.02);
}

TEST_CASE("frame difference heatmap matches its loop oracle") {
    Rng rng(7);
    std::vector<Tensor> frames;
    for (int i = 0; i < 4; ++i) frames.push_back(rand_image(rng, 3, 16));

    Heatmap hm = frame_diff_heatmap(frames);
    REQUIRE(hm.map.shape == std::vector<int>{1, 16, 16});
    double mx = 0;
    for (double v : hm.map.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        mx = std::max(mx, v);
    }
    CHECK(mx == doctest::Approx(1.0).epsilon(1e-12));

    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            double raw = 0;
            for (size_t i = 0; i + 1 < frames.size(); ++i)
                for (int c = 0; c < 3; ++c)
                    raw += std::abs(frames[i + 1].at3(c, y, x) - frames[i].at3(c, y, x));
            raw /= 3 * 3.0;
            CHECK(std::abs(hm.map.at3(0, y, x) * hm.scale - raw) < 1e-6);
        }

    CHECK_THROWS_AS(frame_diff_heatmap({frames[0]}), param_error);

    // Constant video: zero map, zero scale.
    std::vector<Tensor> still = {frames[0], frames[0], frames[0]};
    Heatmap flat = frame_diff_heatmap(still);
    CHECK(flat.scale == 0.0);
    for (double v : flat.map.data) CHECK(v == 0.0);
}

TEST_CASE("one toggling pixel dominates the heatmap") {
    Tensor a({1, 8, 8}), b({1, 8, 8});
    b.at3(0, 3, 4) = 1.0;
    Heatmap hm = frame_diff_heatmap({a, b, a, b});
    CHECK(hm.map.at3(0, 3, 4) == 1.0);
    CHECK(hm.scale == doctest::Approx(1.0));
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (y != 3 || x != 4) CHECK(hm.map.at3(0, y, x) == 0.0);
}

TEST_CASE("temporal smoothness equals the masked heatmap mean") {
    Rng rng(8);
    std::vector<Tensor> frames, masks;
    for (int i = 0; i < 5; ++i) {
        frames.push_back(rand_image(rng, 3, 16));
        Tensor m({1, 16, 16});
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) m.at3(0, y, x) = (x + y + i) % 3 == 0 ? 1.0 : 0.0;
        masks.push_back(m);
    }
    double got = temporal_smoothness_score(frames, masks);

    Heatmap hm = frame_diff_heatmap(frames);
    double total = 0;
    int n = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            bool any = false;
            for (const Tensor& m : masks) any = any || m.at3(0, y, x) > 0.5;
            if (!any) continue;
            total += hm.map.at3(0, y, x) * hm.scale;
            ++n;
        }
    REQUIRE(n > 0);
    CHECK(got == doctest::Approx(total / n).epsilon(1e-12));

    std::vector<Tensor> still = {frames[0], frames[0]};
    CHECK(temporal_smoothness_score(still, {masks[0], masks[1]}) == 0.0);
    CHECK_THROWS_AS(temporal_smoothness_score(frames, {masks[0]}), param_error);
}
