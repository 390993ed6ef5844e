// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "mvht/codec.hpp"
#include "mvht/rng.hpp"

using namespace mvht;

namespace {
Tensor rand_image(int c, int h, int w, Rng& rng) {
    Tensor t({c, h, w});
    for (double& v : t.data) v = rng.uniform();
    return t;
}
}  // namespace

TEST_CASE("mixing matrix is orthogonal and seed-deterministic") {
    auto c = make_codec(2, 3, 1234);
    int n = c.latent_channels();
    REQUIRE(n == 12);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double d = 0.0;
            for (int k = 0; k < n; ++k) d += c.mixing.at2(k, i) * c.mixing.at2(k, j);
            CHECK(std::fabs(d - (i == j ? 1.0 : 0.0)) < 1e-12);
        }

    auto c2 = make_codec(2, 3, 1234);
    CHECK(c.mixing.data == c2.mixing.data);
    auto c3 = make_codec(2, 3, 1235);
    CHECK(c.mixing.data != c3.mixing.data);
}

TEST_CASE("encode shape contract") {
    auto c = make_codec(2, 3, 7);
    Rng rng(1);
    Tensor img = rand_image(3, 32, 32, rng);
    Tensor z = encode(c, img);
    CHECK(z.shape == std::vector<int>{12, 16, 16});
}

TEST_CASE("roundtrip identity both directions") {
    auto c = make_codec(2, 3, 99);
    Rng rng(2);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor img = rand_image(3, 32, 32, rng);
        Tensor back = decode(c, encode(c, img));
        REQUIRE(back.shape == img.shape);
        for (size_t i = 0; i < img.data.size(); ++i)
            CHECK(std::fabs(back.data[i] - img.data[i]) < 1e-9);
    }
    for (int rep = 0; rep < 5; ++rep) {
        // Latents drawn inside the image of the [0,1] pixel box: each channel
        // vector has norm < 1, so decode stays in encode's valid range.
        Tensor z({12, 16, 16});
        for (double& v : z.data) v = 0.5 * rng.uniform() - 0.25;
        Tensor back = encode(c, decode(c, z));
        for (size_t i = 0; i < z.data.size(); ++i)
            CHECK(std::fabs(back.data[i] - z.data[i]) < 1e-9);
    }
}

TEST_CASE("mixing step preserves per-image norm") {
    auto c = make_codec(2, 3, 5);
    int n = c.latent_channels();
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> u(static_cast<size_t>(n)), y(static_cast<size_t>(n), 0.0);
        for (double& v : u) v = rng.gauss();
        for (int r = 0; r < n; ++r)
            for (int k = 0; k < n; ++k) y[static_cast<size_t>(r)] += c.mixing.at2(r, k) * u[static_cast<size_t>(k)];
        double nu = 0.0, ny = 0.0;
        for (int k = 0; k < n; ++k) {
            nu += u[static_cast<size_t>(k)] * u[static_cast<size_t>(k)];
            ny += y[static_cast<size_t>(k)] * y[static_cast<size_t>(k)];
        }
        CHECK(std::fabs(std::sqrt(nu) - std::sqrt(ny)) < 1e-6);
    }
}

TEST_CASE("zero latent decodes to mid-gray") {
    auto c = make_codec(2, 3, 11);
    Tensor z = Tensor::zeros({12, 4, 4});
    Tensor img = decode(c, z);
    for (double v : img.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("codec input validation") {
    auto c = make_codec(2, 3, 1);
    Rng rng(4);
    CHECK_THROWS_AS(encode(c, rand_image(3, 31, 32, rng)), param_error);
    CHECK_THROWS_AS(encode(c, rand_image(4, 32, 32, rng)), param_error);
    Tensor bad = rand_image(3, 8, 8, rng);
    bad.data[0] = 1.5;
    CHECK_THROWS_AS(encode(c, bad), param_error);
    CHECK_THROWS_AS(decode(c, Tensor::zeros({11, 4, 4})), param_error);
    CHECK_THROWS_AS(make_codec(0, 3, 1), param_error);
}
