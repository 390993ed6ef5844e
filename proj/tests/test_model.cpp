// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "mvht/model.hpp"
#include "mvht/rng.hpp"

using namespace mvht;

namespace {

// Small-but-complete config: every structural feature is exercised while a
// full forward pass stays in the millisecond range.
ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.image_size = 8;
    cfg.image_channels = 3;
    cfg.f = 2;
    cfg.base_channels = 4;
    cfg.multipliers = {1, 2};
    cfg.blocks_per_level = 1;
    cfg.heads = 2;
    cfg.embed_dim = 12;
    cfg.max_frames = 12;
    return cfg;
}

NodePtr rand_leaf(Rng& rng, std::vector<int> shape, double sd = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = sd * rng.gauss();
    return leaf(std::move(t));
}

NodePtr latent_leaf(const ModelConfig& cfg, Rng& rng, int B) {
    return rand_leaf(rng, {B, cfg.latent_channels(), cfg.latent_size(), cfg.latent_size()});
}

NodePtr embed_leaf(const Model& m, const std::vector<int>& ts,
                   const std::vector<CameraPose>& poses) {
    return constant(m.fused_embedding_batch(ts, poses));
}

NodePtr default_embed(const Model& m, int B) {
    std::vector<int> ts(static_cast<size_t>(B), 500);
    std::vector<CameraPose> poses(static_cast<size_t>(B));
    for (size_t i = 0; i < poses.size(); ++i) poses[i].azimuth = 0.3 * static_cast<double>(i);
    return embed_leaf(m, ts, poses);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (a.data[static_cast<size_t>(i)] != b.data[static_cast<size_t>(i)]) return false;
    return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(a.data[static_cast<size_t>(i)] - b.data[static_cast<size_t>(i)]));
    return m;
}

// Replaces zero-initialized projection weights with small random values so
// gradients reach the otherwise-gated subgraphs.
void unlock_zero_projections(Model& m, uint64_t seed) {
    Rng rng(seed);
    for (const auto& [name, node] : m.params.all()) {
        bool zero_proj = name.find(".o.w") != std::string::npos ||
                         name.rfind("identity.outproj.", 0) == 0;
        if (!zero_proj) continue;
        bool all_zero = true;
        for (double v : node->val.data) all_zero = all_zero && v == 0.0;
        if (all_zero)
            for (double& v : node->val.data) v = 0.05 * rng.gauss();
    }
}

}  // namespace

TEST_CASE("block_layout enumerates the injection surface") {
    ModelConfig cfg;  // defaults: 2 levels, 1 block per level
    auto layout = block_layout(cfg);
    // Count oracle: blocks per side * levels + middle.
    REQUIRE(static_cast<int>(layout.size()) ==
            2 * static_cast<int>(cfg.multipliers.size()) * cfg.blocks_per_level + 1);
    CHECK(layout[0].key == "down0.0");
    CHECK(layout[0].channels == 32);
    CHECK(layout[0].spatial == 16);
    CHECK(layout[1].key == "down1.0");
    CHECK(layout[1].channels == 64);
    CHECK(layout[1].spatial == 8);
    CHECK(layout[2].key == "mid");
    CHECK(layout[2].level == -1);
    CHECK(layout[2].channels == 64);
    CHECK(layout[2].spatial == 8);
    CHECK(layout[3].key == "up1.0");
    CHECK(layout[3].channels == 64);
    CHECK(layout[3].spatial == 8);
    CHECK(layout[4].key == "up0.0");
    CHECK(layout[4].channels == 32);
    CHECK(layout[4].spatial == 16);

    // Deterministic across calls.
    auto again = block_layout(cfg);
    for (size_t i = 0; i < layout.size(); ++i) {
        CHECK(layout[i].key == again[i].key);
        CHECK(layout[i].channels == again[i].channels);
        CHECK(layout[i].spatial == again[i].spatial);
    }

    ModelConfig deep = tiny_cfg();
    deep.blocks_per_level = 2;
    auto dl = block_layout(deep);
    REQUIRE(dl.size() == 9);
    CHECK(dl[1].key == "down0.1");
    CHECK(dl[5].key == "up1.0");
    CHECK(dl[6].key == "up1.1");
}

TEST_CASE("config validation rejects inconsistent shapes") {
    ModelConfig cfg = tiny_cfg();
    CHECK_NOTHROW(cfg.validate());
    cfg.embed_dim = 10;
    CHECK_THROWS_AS(cfg.validate(), param_error);
    cfg = tiny_cfg();
    cfg.heads = 3;  // 4 % 3 != 0
    CHECK_THROWS_AS(cfg.validate(), param_error);
    cfg = tiny_cfg();
    cfg.multipliers = {1, 2, 4, 8};  // latent 4 cannot halve three times
    CHECK_THROWS_AS(cfg.validate(), param_error);
    cfg = tiny_cfg();
    cfg.identity_mode = "none";
    CHECK_THROWS_AS(cfg.validate(), param_error);
    cfg = tiny_cfg();
    cfg.max_frames = 4;
    CHECK_THROWS_AS(cfg.validate(), param_error);
}

TEST_CASE("fresh model is seed-deterministic and namespaced") {
    ModelConfig cfg = tiny_cfg();
    Model a = Model::fresh(cfg, 7);
    Model b = Model::fresh(cfg, 7);
    Model c = Model::fresh(cfg, 8);
    CHECK(a.params.checksum() == b.params.checksum());
    CHECK(a.params.checksum() != c.params.checksum());
    for (const char* ns : {"backbone.", "identity.", "hair.", "temporal."})
        CHECK(a.params.count(ns) > 0);
    // Every parameter lives in exactly one namespace.
    int64_t total = 0;
    for (const char* ns : {"backbone.", "identity.", "hair.", "temporal."})
        total += a.params.count(ns);
    CHECK(total == a.params.count(""));
}

TEST_CASE("denoise maps latents to noise predictions of the same shape") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 11);
    Rng rng(3);
    NodePtr z = latent_leaf(cfg, rng, 2);
    NodePtr ef = default_embed(m, 2);
    NodePtr eps = m.denoise(z, ef, {});
    CHECK(eps->val.shape == z->val.shape);
    // Near-zero output head at fresh init: predictions are tiny but the
    // graph is differentiable end to end.
    for (double v : eps->val.data) CHECK(std::abs(v) < 1.0);

    NodePtr bad = latent_leaf(cfg, rng, 2);
    bad->val = Tensor::zeros({2, 3, 4, 4});
    CHECK_THROWS_AS(m.denoise(bad, ef, {}), param_error);
    NodePtr bad_ef = constant(Tensor::zeros({2, 10}));
    CHECK_THROWS_AS(m.denoise(z, bad_ef, {}), param_error);
}

TEST_CASE("identity residuals are exactly zero at fresh initialization") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 21);
    Rng rng(5);
    NodePtr z = latent_leaf(cfg, rng, 2);
    NodePtr cond = latent_leaf(cfg, rng, 2);
    NodePtr ef = default_embed(m, 2);
    FeatureMap res = m.identity_residuals(cond, z, ef);
    auto layout = block_layout(cfg);
    REQUIRE(res.size() == layout.size());
    for (const auto& bi : layout) {
        REQUIRE(res.count(bi.key) == 1);
        const Tensor& t = res.at(bi.key)->val;
        CHECK(t.shape == std::vector<int>{2, bi.channels, bi.spatial, bi.spatial});
        for (double v : t.data) CHECK(v == 0.0);
    }
}

TEST_CASE("fresh conditioning pathways are bit-exact no-ops") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 31);
    Rng rng(9);
    NodePtr z = latent_leaf(cfg, rng, 2);
    NodePtr cond = latent_leaf(cfg, rng, 2);
    NodePtr ref = latent_leaf(cfg, rng, 2);
    NodePtr ef = default_embed(m, 2);

    Tensor base = m.denoise(z, ef, {})->val;

    // Zero-initialized identity output projections: adding the residuals
    // reproduces the unconditioned forward bit for bit.
    FeatureMap res = m.identity_residuals(cond, z, ef);
    Model::DenoiseOpts with_res;
    with_res.residuals = &res;
    CHECK(bitwise_equal(m.denoise(z, ef, with_res)->val, base));

    // Zero-initialized cross-attention output projections: a real bank and
    // the null bank are both inert.
    FeatureMap bank = m.extract_reference_features(ref);
    Model::DenoiseOpts with_bank;
    with_bank.hair_bank = &bank;
    CHECK(bitwise_equal(m.denoise(z, ef, with_bank)->val, base));
    Model::DenoiseOpts with_null;
    with_null.null_bank = true;
    CHECK(bitwise_equal(m.denoise(z, ef, with_null)->val, base));

    // Zero-initialized temporal output projections.
    Model::DenoiseOpts with_temporal;
    with_temporal.temporal = true;
    CHECK(bitwise_equal(m.denoise(z, ef, with_temporal)->val, base));

    // All pathways at once.
    Model::DenoiseOpts all;
    all.residuals = &res;
    all.hair_bank = &bank;
    all.temporal = true;
    CHECK(bitwise_equal(m.denoise(z, ef, all)->val, base));
}

TEST_CASE("denoise validates its injection surfaces") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 41);
    Rng rng(13);
    NodePtr z = latent_leaf(cfg, rng, 2);
    NodePtr ef = default_embed(m, 2);

    FeatureMap res = m.identity_residuals(latent_leaf(cfg, rng, 2), z, ef);
    FeatureMap partial = res;
    partial.erase("mid");
    Model::DenoiseOpts o1;
    o1.residuals = &partial;
    CHECK_THROWS_WITH_AS(m.denoise(z, ef, o1), doctest::Contains("mid"), param_error);

    FeatureMap wrong = res;
    wrong["mid"] = constant(Tensor::zeros({2, 8, 2, 2}));
    wrong["mid"]->val = Tensor::zeros({2, 8, 4, 4});  // wrong spatial for mid
    Model::DenoiseOpts o2;
    o2.residuals = &wrong;
    CHECK_THROWS_WITH_AS(m.denoise(z, ef, o2), doctest::Contains("mid"), param_error);

    FeatureMap bank = m.extract_reference_features(latent_leaf(cfg, rng, 2));
    FeatureMap bad_bank = bank;
    bad_bank.erase("up0.0");
    Model::DenoiseOpts o3;
    o3.hair_bank = &bad_bank;
    CHECK_THROWS_WITH_AS(m.denoise(z, ef, o3), doctest::Contains("up0.0"), param_error);

    FeatureMap mislabeled = bank;
    mislabeled["up9.9"] = bank.at("mid");
    Model::DenoiseOpts o4;
    o4.hair_bank = &mislabeled;
    CHECK_THROWS_WITH_AS(m.denoise(z, ef, o4), doctest::Contains("up9.9"), param_error);

    Model::DenoiseOpts o5;
    o5.hair_bank = &bank;
    o5.null_bank = true;
    CHECK_THROWS_AS(m.denoise(z, ef, o5), param_error);

    // Temporal mode caps the frame-axis length.
    ModelConfig small = tiny_cfg();
    Model ms = Model::fresh(small, 1);
    NodePtr zs = latent_leaf(small, rng, small.max_frames + 1);
    std::vector<int> ts(static_cast<size_t>(small.max_frames + 1), 10);
    std::vector<CameraPose> poses(static_cast<size_t>(small.max_frames + 1));
    NodePtr efs = embed_leaf(ms, ts, poses);
    Model::DenoiseOpts o6;
    o6.temporal = true;
    CHECK_THROWS_AS(ms.denoise(zs, efs, o6), param_error);
    CHECK_NOTHROW(ms.denoise(zs, efs, {}));  // fine without temporal mode
}

TEST_CASE("identity branch validates the condition's representation space") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 51);
    Rng rng(17);
    NodePtr z = latent_leaf(cfg, rng, 1);
    NodePtr ef = default_embed(m, 1);

    // Latent mode rejects a pixel-shaped condition.
    NodePtr pix = constant(Tensor::zeros({1, 3, 8, 8}));
    CHECK_THROWS_WITH_AS(m.identity_residuals(pix, z, ef), doctest::Contains("latent"),
                         param_error);

    // Pixel-mode ablation accepts images and rejects latents.
    ModelConfig pcfg = tiny_cfg();
    pcfg.identity_mode = "pixel";
    Model pm = Model::fresh(pcfg, 52);
    NodePtr zp = latent_leaf(pcfg, rng, 1);
    NodePtr efp = default_embed(pm, 1);
    FeatureMap res = pm.identity_residuals(pix, zp, efp);
    CHECK(res.size() == block_layout(pcfg).size());
    CHECK_THROWS_AS(pm.identity_residuals(zp, zp, efp), param_error);
}

TEST_CASE("reference bank tokens live in block feature spaces") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 61);
    Rng rng(19);
    FeatureMap bank = m.extract_reference_features(latent_leaf(cfg, rng, 3));
    auto layout = block_layout(cfg);
    REQUIRE(bank.size() == layout.size());
    for (const auto& bi : layout) {
        const Tensor& t = bank.at(bi.key)->val;
        CHECK(t.shape == std::vector<int>{3, bi.spatial * bi.spatial, bi.channels});
    }
    FeatureMap nb = m.null_bank(3);
    for (const auto& bi : layout)
        CHECK(nb.at(bi.key)->val.shape == std::vector<int>{3, 1, bi.channels});
    CHECK_THROWS_AS(m.null_bank(0), param_error);
}

TEST_CASE("cross-attention is invariant to bank token order") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 71);
    unlock_zero_projections(m, 900);
    Rng rng(23);
    NodePtr z = latent_leaf(cfg, rng, 1);
    NodePtr ef = default_embed(m, 1);
    FeatureMap bank = m.extract_reference_features(latent_leaf(cfg, rng, 1));

    Model::DenoiseOpts opts;
    opts.hair_bank = &bank;
    Tensor out = m.denoise(z, ef, opts)->val;

    // Reverse the token axis of every bank entry.
    FeatureMap reversed;
    for (const auto& [key, node] : bank) {
        Tensor t = node->val;
        int B = t.dim(0), T = t.dim(1), C = t.dim(2);
        Tensor r = t;
        for (int b = 0; b < B; ++b)
            for (int tk = 0; tk < T; ++tk)
                for (int c = 0; c < C; ++c) r.at3(b, tk, c) = t.at3(b, T - 1 - tk, c);
        reversed[key] = constant(std::move(r));
    }
    Model::DenoiseOpts ropts;
    ropts.hair_bank = &reversed;
    Tensor rout = m.denoise(z, ef, ropts)->val;
    CHECK(max_abs_diff(out, rout) < 1e-6);

    // The bank is not ignored: zeroing it changes the output.
    FeatureMap zeroed;
    for (const auto& [key, node] : bank) zeroed[key] = constant(Tensor::zeros(node->val.shape));
    Model::DenoiseOpts zopts;
    zopts.hair_bank = &zeroed;
    CHECK(max_abs_diff(out, m.denoise(z, ef, zopts)->val) > 1e-8);
}

TEST_CASE("temporal attention: identity cases and frame equivariance") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 81);
    unlock_zero_projections(m, 901);
    Rng rng(29);

    // Single frame: structurally the same node.
    NodePtr one = rand_leaf(rng, {1, 4, 8});
    CHECK(m.temporal_self_attention("mid", one).get() == one.get());

    // Too many frames.
    NodePtr long_seq = rand_leaf(rng, {cfg.max_frames + 1, 4, 8});
    CHECK_THROWS_AS(m.temporal_self_attention("mid", long_seq), param_error);

    // Channel mismatch against the block's parameters.
    NodePtr wrong_c = rand_leaf(rng, {2, 4, 6});
    CHECK_THROWS_WITH_AS(m.temporal_self_attention("mid", wrong_c), doctest::Contains("mid"),
                         param_error);

    // Without the frame-position encoding the op commutes with frame
    // reversal (softmax attention is permutation-equivariant).
    int F = 4, T = 3, C = 8;
    NodePtr feats = rand_leaf(rng, {F, T, C});
    Tensor out = m.temporal_self_attention("mid", feats, false)->val;
    Tensor rev({F, T, C});
    for (int f = 0; f < F; ++f)
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < C; ++c) rev.at3(f, t, c) = feats->val.at3(F - 1 - f, t, c);
    Tensor rout = m.temporal_self_attention("mid", constant(std::move(rev)), false)->val;
    double worst = 0.0;
    for (int f = 0; f < F; ++f)
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < C; ++c)
                worst = std::max(worst, std::abs(rout.at3(f, t, c) - out.at3(F - 1 - f, t, c)));
    CHECK(worst < 1e-9);

    // With the encoding enabled, reversal is no longer a symmetry.
    Tensor pe_out = m.temporal_self_attention("mid", feats, true)->val;
    CHECK(max_abs_diff(pe_out, out) > 1e-8);
}

TEST_CASE("every parameter receives gradient somewhere in the training surface") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 91);
    m.params.set_trainable([](const std::string&) { return true; });
    Rng rng(31);
    Adam opt;
    opt.lr = 1e-2;

    std::set<std::string> touched;
    const int B = 2;
    for (int step = 0; step < 8; ++step) {
        m.params.zero_grad();
        NodePtr z = latent_leaf(cfg, rng, B);
        NodePtr cond = latent_leaf(cfg, rng, B);
        NodePtr ref = latent_leaf(cfg, rng, B);
        NodePtr ef = default_embed(m, B);
        NodePtr target = latent_leaf(cfg, rng, B);

        FeatureMap res = m.identity_residuals(cond, z, ef);
        FeatureMap bank;
        Model::DenoiseOpts opts;
        opts.residuals = &res;
        opts.temporal = true;
        if (step % 2 == 0) {
            bank = m.extract_reference_features(ref);
            opts.hair_bank = &bank;
        } else {
            opts.null_bank = true;
        }
        NodePtr loss = ops::mse(m.denoise(z, ef, opts), target);
        backward(loss);
        for (const auto& [name, node] : m.params.all()) {
            if (node->grad.numel() == 0) continue;
            for (double g : node->grad.data)
                if (g != 0.0) {
                    touched.insert(name);
                    break;
                }
        }
        opt.step(m.params);
    }

    std::vector<std::string> dead;
    for (const auto& [name, node] : m.params.all())
        if (touched.count(name) == 0) dead.push_back(name);
    for (const auto& name : dead) MESSAGE("dead parameter: ", name);
    CHECK(dead.empty());
}

TEST_CASE("model gradients match finite differences through the full loss") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 101);
    unlock_zero_projections(m, 902);
    m.params.set_trainable([](const std::string&) { return true; });
    Rng rng(37);
    const int B = 2;
    NodePtr z = latent_leaf(cfg, rng, B);
    NodePtr cond = latent_leaf(cfg, rng, B);
    NodePtr ref = latent_leaf(cfg, rng, B);
    NodePtr ef = default_embed(m, B);
    NodePtr target = latent_leaf(cfg, rng, B);

    // Sum of a real-bank and a null-bank pass so every pathway, including
    // the learned null tokens, is inside one differentiable graph.
    auto forward = [&]() {
        FeatureMap res = m.identity_residuals(cond, z, ef);
        FeatureMap bank = m.extract_reference_features(ref);
        Model::DenoiseOpts opts;
        opts.residuals = &res;
        opts.hair_bank = &bank;
        opts.temporal = true;
        Model::DenoiseOpts nopts;
        nopts.residuals = &res;
        nopts.null_bank = true;
        return ops::add(ops::mse(m.denoise(z, ef, opts), target),
                        ops::mse(m.denoise(z, ef, nopts), target));
    };

    m.params.zero_grad();
    backward(forward());

    // A spread of parameters across all four namespaces and layer types.
    const std::vector<std::string> names = {
        "backbone.conv_in.w",        "backbone.mid.res.conv1.w", "backbone.mid.sa.q.w",
        "backbone.down0.0.res.emb.w", "backbone.out.conv.w",      "backbone.time.l1.w",
        "backbone.up0.0.res.gn2.g",  "identity.cond.w",          "identity.down1.0.res.conv2.w",
        "identity.outproj.up1.0.w",  "hair.ext.conv_in.w",       "hair.ext.mid.sa.k.w",
        "hair.ca.mid.k.w",           "hair.ca.down0.0.o.w",      "hair.null.mid",
        "temporal.mid.q.w",          "temporal.up0.0.o.w",       "temporal.down1.0.gn.g",
    };
    Rng pick(41);
    const double h = 1e-5;
    for (const auto& name : names) {
        REQUIRE(m.params.has(name));
        const NodePtr& p = m.params.get(name);
        REQUIRE(p->grad.numel() == p->val.numel());
        for (int rep = 0; rep < 2; ++rep) {
            int64_t i = static_cast<int64_t>(pick.uniform_int(p->val.numel()));
            double keep = p->val.data[static_cast<size_t>(i)];
            double lo, hi;
            {
                NoGradGuard ng;
                p->val.data[static_cast<size_t>(i)] = keep + h;
                hi = forward()->val[0];
                p->val.data[static_cast<size_t>(i)] = keep - h;
                lo = forward()->val[0];
                p->val.data[static_cast<size_t>(i)] = keep;
            }
            double fd = (hi - lo) / (2.0 * h);
            double ad = p->grad.data[static_cast<size_t>(i)];
            double tol = 2e-4 * std::max({1.0, std::abs(fd), std::abs(ad)});
            INFO("param ", name, " index ", i);
            CHECK(std::abs(fd - ad) < tol);
        }
    }
}

TEST_CASE("extractor warm start copies the backbone trunk") {
    ModelConfig cfg = tiny_cfg();
    Model m = Model::fresh(cfg, 111);
    uint64_t before = m.params.checksum("hair.ext.");
    m.init_extractor_from_backbone();
    CHECK(m.params.checksum("hair.ext.") != before);
    for (const auto& [name, node] : m.params.all()) {
        if (name.rfind("backbone.", 0) != 0 || name.rfind("backbone.out.", 0) == 0) continue;
        const NodePtr& twin = m.params.get("hair.ext." + name.substr(9));
        CHECK(bitwise_equal(twin->val, node->val));
    }
    // Output head is backbone-only and has no extractor twin.
    CHECK(!m.params.has("hair.ext.out.conv.w"));
}

TEST_CASE("bundle save/load round-trips parameters, codec and schedule") {
    ModelConfig cfg = tiny_cfg();
    ModelBundle b = make_bundle(cfg, 123, 456, 200, 1e-3, 2e-2);
    b.stage = "s2";
    const std::string path = "test_bundle_roundtrip.ckpt";
    save_bundle(path, b);
    ModelBundle r = load_bundle(path);
    std::remove(path.c_str());

    CHECK(r.model.params.checksum() == b.model.params.checksum());
    CHECK(r.model.cfg.image_size == cfg.image_size);
    CHECK(r.model.cfg.multipliers == cfg.multipliers);
    CHECK(r.model.cfg.identity_mode == cfg.identity_mode);
    CHECK(r.stage == "s2");
    CHECK(r.codec_seed == 456);
    CHECK(r.schedule_T == 200);
    CHECK(r.beta_start == 1e-3);
    CHECK(r.beta_end == 2e-2);
    CHECK(bitwise_equal(r.codec.mixing, b.codec.mixing));
    REQUIRE(r.schedule.beta.size() == b.schedule.beta.size());
    for (size_t i = 0; i < b.schedule.beta.size(); ++i)
        CHECK(r.schedule.beta[i] == b.schedule.beta[i]);

    // Identical state implies identical predictions.
    Rng rng(43);
    NodePtr z = latent_leaf(cfg, rng, 1);
    NodePtr ef = default_embed(b.model, 1);
    CHECK(bitwise_equal(b.model.denoise(z, ef, {})->val, r.model.denoise(z, ef, {})->val));
}

TEST_CASE("checkpoint loading rejects mismatched tensor sets") {
    ModelConfig cfg = tiny_cfg();
    ModelBundle b = make_bundle(cfg, 1, 2, 100, 1e-4, 1e-2);
    const std::string path = "test_bundle_tamper.ckpt";
    save_bundle(path, b);
    Checkpoint ck = load_checkpoint(path);
    std::remove(path.c_str());

    Checkpoint missing = ck;
    missing.tensors.erase("backbone.conv_in.w");
    CHECK_THROWS_AS(Model::from_checkpoint(missing), data_error);

    Checkpoint extra = ck;
    extra.tensors["rogue.w"] = Tensor::zeros({1});
    CHECK_THROWS_AS(Model::from_checkpoint(extra), data_error);

    Checkpoint reshaped = ck;
    reshaped.tensors["backbone.conv_in.w"] = Tensor::zeros({1, 1, 1, 1});
    CHECK_THROWS_AS(Model::from_checkpoint(reshaped), data_error);

    Checkpoint no_meta = ck;
    no_meta.meta.erase("cfg.heads");
    CHECK_THROWS_AS(Model::from_checkpoint(no_meta), data_error);
}
