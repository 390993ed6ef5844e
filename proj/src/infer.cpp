// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/infer.hpp"

#include <functional>

#include "mvht/common.hpp"
#include "mvht/image.hpp"

namespace mvht {

namespace {

void check_opts(const SampleOpts& o) {
    if (o.steps < 1) throw param_error("sampling: steps must be >= 1");
    if (o.cfg_scale < 0) throw param_error("sampling: guidance scale must be >= 0");
}

void check_image(const Tensor& img, const ModelConfig& cfg, const char* what) {
    if (img.rank() != 3 || img.dim(0) != cfg.image_channels || img.dim(1) != cfg.image_size ||
        img.dim(2) != cfg.image_size)
        throw param_error(std::string(what) + ": expected [" +
                          std::to_string(cfg.image_channels) + "," +
                          std::to_string(cfg.image_size) + "," + std::to_string(cfg.image_size) +
                          "], got " + shape_str(img.shape));
}

Tensor quantize_image(Tensor t) {
    for (double& v : t.data) v = quantize8(v);
    return t;
}

Tensor init_noise(uint64_t seed, int frames, int lc, int ls) {
    Rng rng(child_seed(seed, "sample.init"));
    Tensor z({frames, lc, ls, ls});
    for (double& v : z.data) v = rng.gauss();
    return z;
}

// Deterministic DDIM descent; eps_fn maps (z_t, t) to the guided noise
// prediction for the whole batch.
Tensor ddim_sample(const ModelBundle& b, Tensor z,
                   const std::function<Tensor(const Tensor&, int)>& eps_fn, int steps) {
    std::vector<int> ts = ddim_timesteps(b.schedule.T, steps);
    for (size_t i = 0; i < ts.size(); ++i) {
        int t = ts[i];
        int t_prev = i + 1 < ts.size() ? ts[i + 1] : -1;
        z = ddim_step(z, eps_fn(z, t), t, t_prev, b.schedule);
    }
    return z;
}

Tensor decode_batch_frame(const ModelBundle& b, const Tensor& z, int frame) {
    const int lc = b.model.cfg.latent_channels(), ls = b.model.cfg.latent_size();
    Tensor one({lc, ls, ls});
    int64_t per = one.numel();
    std::copy(z.data.begin() + per * frame, z.data.begin() + per * (frame + 1),
              one.data.begin());
    return quantize_image(decode(b.codec, one));
}

FeatureMap tile_bank(const FeatureMap& bank1, int n) {
    if (n == 1) return bank1;
    FeatureMap out;
    for (const auto& [key, tok] : bank1)
        out[key] = ops::concat0(std::vector<NodePtr>(static_cast<size_t>(n), tok));
    return out;
}

// One-frame transfer with a precomputed condition latent and reference bank.
Tensor sample_transfer_frame(const ModelBundle& main, const Tensor& cond1,
                             const FeatureMap& bank1, const CameraPose& pose,
                             const SampleOpts& opts) {
    const Model& model = main.model;
    const int lc = model.cfg.latent_channels(), ls = model.cfg.latent_size();
    NodePtr cond_n = constant(cond1);
    Tensor z = init_noise(opts.seed, 1, lc, ls);
    z = ddim_sample(main, z, [&](const Tensor& zt, int t) {
        NodePtr zt_n = constant(zt);
        NodePtr ef_n = constant(model.fused_embedding_batch({t}, {pose}));
        FeatureMap res = model.identity_residuals(cond_n, zt_n, ef_n);
        Model::DenoiseOpts dc;
        dc.residuals = &res;
        dc.hair_bank = &bank1;
        Tensor eps_c = model.denoise(zt_n, ef_n, dc)->val;
        if (opts.cfg_scale == 1.0) return eps_c;
        Model::DenoiseOpts du;
        du.residuals = &res;
        du.null_bank = true;
        Tensor eps_u = model.denoise(zt_n, ef_n, du)->val;
        return cfg_combine(eps_u, eps_c, opts.cfg_scale);
    }, opts.steps);
    return decode_batch_frame(main, z, 0);
}

void check_transfer_inputs(const ModelBundle& main, const Tensor& bald_proxy,
                           const Tensor& reference) {
    if (main.stage != "s2" && main.stage != "s3")
        throw prereq_error("transfer: requires a stage-s2 or stage-s3 checkpoint, got stage '" +
                           main.stage + "'");
    check_image(bald_proxy, main.model.cfg, "transfer bald proxy");
    check_image(reference, main.model.cfg, "transfer reference");
}

}  // namespace

Tensor bald_convert(const ModelBundle& bald, const Tensor& source, const CameraPose& pose,
                    const SampleOpts& opts) {
    check_opts(opts);
    if (bald.stage != "bald")
        throw prereq_error("bald_convert: requires a bald-converter checkpoint (stage 'bald'), "
                           "got stage '" + bald.stage + "'");
    const Model& model = bald.model;
    check_image(source, model.cfg, "bald_convert source");

    NoGradGuard ng;
    const int lc = model.cfg.latent_channels(), ls = model.cfg.latent_size();
    Tensor cond = encode(bald.codec, source);
    cond.shape = {1, lc, ls, ls};
    NodePtr cond_n = constant(cond);

    Tensor z = init_noise(opts.seed, 1, lc, ls);
    z = ddim_sample(bald, z, [&](const Tensor& zt, int t) {
        NodePtr zt_n = constant(zt);
        NodePtr ef_n = constant(model.fused_embedding_batch({t}, {pose}));
        FeatureMap res = model.identity_residuals(cond_n, zt_n, ef_n);
        Model::DenoiseOpts dc;
        dc.residuals = &res;
        Tensor eps_c = model.denoise(zt_n, ef_n, dc)->val;
        if (opts.cfg_scale == 1.0) return eps_c;
        Tensor eps_u = model.denoise(zt_n, ef_n, {})->val;
        return cfg_combine(eps_u, eps_c, opts.cfg_scale);
    }, opts.steps);
    return decode_batch_frame(bald, z, 0);
}

Tensor transfer_single_view(const ModelBundle& main, const Tensor& bald_proxy,
                            const Tensor& reference, const CameraPose& pose,
                            const SampleOpts& opts) {
    check_opts(opts);
    check_transfer_inputs(main, bald_proxy, reference);
    NoGradGuard ng;
    const int lc = main.model.cfg.latent_channels(), ls = main.model.cfg.latent_size();
    Tensor cond1 = encode(main.codec, bald_proxy);
    cond1.shape = {1, lc, ls, ls};
    Tensor ref_lat = encode(main.codec, reference);
    ref_lat.shape = {1, lc, ls, ls};
    FeatureMap bank1 = main.model.extract_reference_features(constant(ref_lat));
    return sample_transfer_frame(main, cond1, bank1, pose, opts);
}

FrameSequence transfer_multi_view(const ModelBundle& main, const Tensor& bald_proxy,
                                  const Tensor& reference, const std::vector<CameraPose>& poses,
                                  const SampleOpts& opts, bool temporal) {
    check_opts(opts);
    if (poses.empty()) throw param_error("transfer: empty pose list");
    check_transfer_inputs(main, bald_proxy, reference);
    if (temporal && main.stage != "s3")
        throw prereq_error("transfer: temporal sampling requires a stage-s3 checkpoint, got "
                           "stage '" + main.stage + "'");
    const Model& model = main.model;
    const int K = static_cast<int>(poses.size());
    if (temporal && K > model.cfg.max_frames)
        throw param_error("transfer: " + std::to_string(K) + " frames exceed max_frames = " +
                          std::to_string(model.cfg.max_frames));

    NoGradGuard ng;
    const int lc = model.cfg.latent_channels(), ls = model.cfg.latent_size();
    Tensor cond1 = encode(main.codec, bald_proxy);
    cond1.shape = {1, lc, ls, ls};
    Tensor ref_lat = encode(main.codec, reference);
    ref_lat.shape = {1, lc, ls, ls};
    FeatureMap bank1 = model.extract_reference_features(constant(ref_lat));

    auto frame_seed = [&](int i) { return child_seed(opts.seed, "frame." + std::to_string(i)); };

    FrameSequence out;
    out.poses = poses;
    if (!temporal) {
        // Literally K independent single-view samples; frame i reproduces a
        // transfer_single_view call seeded with child_seed(seed, "frame.i").
        for (int i = 0; i < K; ++i) {
            SampleOpts per = opts;
            per.seed = frame_seed(i);
            out.frames.push_back(
                sample_transfer_frame(main, cond1, bank1, poses[static_cast<size_t>(i)], per));
        }
        return out;
    }

    // Joint denoising: the batch axis is the frame axis, every frame shares
    // each DDIM timestep, and frame i starts from the same noise as the
    // independent sampler seeded with child_seed(seed, "frame.i").
    Tensor z({K, lc, ls, ls});
    const int64_t per = static_cast<int64_t>(lc) * ls * ls;
    for (int i = 0; i < K; ++i) {
        Tensor zi = init_noise(frame_seed(i), 1, lc, ls);
        std::copy(zi.data.begin(), zi.data.end(), z.data.begin() + per * i);
    }
    Tensor condK({K, lc, ls, ls});
    for (int i = 0; i < K; ++i)
        std::copy(cond1.data.begin(), cond1.data.end(), condK.data.begin() + per * i);
    NodePtr cond_n = constant(condK);
    FeatureMap bankK = tile_bank(bank1, K);

    z = ddim_sample(main, z, [&](const Tensor& zt, int t) {
        NodePtr zt_n = constant(zt);
        std::vector<int> ts(static_cast<size_t>(K), t);
        NodePtr ef_n = constant(model.fused_embedding_batch(ts, poses));
        FeatureMap res = model.identity_residuals(cond_n, zt_n, ef_n);
        Model::DenoiseOpts dc;
        dc.residuals = &res;
        dc.hair_bank = &bankK;
        dc.temporal = true;
        Tensor eps_c = model.denoise(zt_n, ef_n, dc)->val;
        if (opts.cfg_scale == 1.0) return eps_c;
        Model::DenoiseOpts du;
        du.residuals = &res;
        du.null_bank = true;
        du.temporal = true;
        Tensor eps_u = model.denoise(zt_n, ef_n, du)->val;
        return cfg_combine(eps_u, eps_c, opts.cfg_scale);
    }, opts.steps);
    for (int i = 0; i < K; ++i) out.frames.push_back(decode_batch_frame(main, z, i));
    return out;
}

}  // namespace mvht
