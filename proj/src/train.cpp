// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/train.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "mvht/common.hpp"

namespace mvht {

namespace {

const std::vector<std::string> kAllNamespaces = {"backbone.", "identity.", "hair.", "temporal."};

// Per-identity latent cache for one stage; refs are encoded on demand.
struct LatentCache {
    std::vector<std::vector<Tensor>> source, bald, refs;  // [train index][frame]
};

Tensor stack4(const std::vector<const Tensor*>& xs) {
    const Tensor& t0 = *xs[0];
    int64_t per = t0.numel();
    Tensor out({static_cast<int>(xs.size()), t0.shape[0], t0.shape[1], t0.shape[2]});
    for (size_t i = 0; i < xs.size(); ++i) {
        if (!xs[i]->same_shape(t0)) throw data_error("train: inconsistent image shapes");
        std::copy(xs[i]->data.begin(), xs[i]->data.end(), out.data.begin() + per * i);
    }
    return out;
}

std::string required_prev(Stage s) {
    switch (s) {
        case Stage::bald:
        case Stage::s1: return "fresh";
        case Stage::s2: return "s1";
        case Stage::s3: return "s2";
    }
    throw param_error("unknown stage");
}

struct Sample {
    int id = 0;          // index into data.train
    int cond_frame = 0;  // bald/source frame used as condition
    int target_frame = 0;
    int ref = -1;  // reference index, s2/s3 only
};

}  // namespace

Stage stage_from_string(const std::string& name) {
    if (name == "bald") return Stage::bald;
    if (name == "s1") return Stage::s1;
    if (name == "s2") return Stage::s2;
    if (name == "s3") return Stage::s3;
    throw param_error("unknown stage '" + name + "' (expected bald|s1|s2|s3)");
}

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::bald: return "bald";
        case Stage::s1: return "s1";
        case Stage::s2: return "s2";
        case Stage::s3: return "s3";
    }
    throw param_error("unknown stage");
}

std::vector<std::string> trainable_namespaces(Stage s) {
    switch (s) {
        case Stage::bald:
        case Stage::s1: return {"backbone.", "identity."};
        case Stage::s2: return {"hair."};
        case Stage::s3: return {"temporal."};
    }
    throw param_error("unknown stage");
}

std::vector<std::string> frozen_namespaces(Stage s) {
    auto on = trainable_namespaces(s);
    std::vector<std::string> out;
    for (const auto& ns : kAllNamespaces)
        if (std::find(on.begin(), on.end(), ns) == on.end()) out.push_back(ns);
    return out;
}

S2Draw draw_s2(Rng& rng, const LoadedDataset& data) {
    S2Draw d;
    d.id = data.train[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(data.train.size())))];
    d.frame = static_cast<int>(rng.uniform_int(data.views));
    int64_t n_refs = static_cast<int64_t>(data.ids[static_cast<size_t>(d.id)].refs.size());
    d.ref = static_cast<int>(rng.uniform_int(n_refs));
    return d;
}

S3Draw draw_s3(Rng& rng, const LoadedDataset& data, int k) {
    S3Draw d;
    d.id = data.train[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(data.train.size())))];
    d.start = static_cast<int>(rng.uniform_int(data.views - k + 1));
    d.bald_frame = static_cast<int>(rng.uniform_int(data.views));
    int64_t n_refs = static_cast<int64_t>(data.ids[static_cast<size_t>(d.id)].refs.size());
    d.ref = static_cast<int>(rng.uniform_int(n_refs));
    return d;
}

ModelBundle train_stage(ModelBundle bundle, const LoadedDataset& data, const StageConfig& cfg,
                        TrainReport* report) {
    if (cfg.steps < 1) throw param_error("train: steps must be >= 1");
    if (cfg.batch < 1) throw param_error("train: batch must be >= 1");
    if (cfg.lr <= 0) throw param_error("train: learning rate must be > 0");
    if (cfg.dropout < 0 || cfg.dropout > 1) throw param_error("train: dropout must be in [0,1]");
    const bool s3 = cfg.stage == Stage::s3;
    if (s3) {
        if (cfg.k < 2) throw param_error("train s3: window length k must be >= 2");
        if (cfg.k > data.views)
            throw param_error("train s3: window length k = " + std::to_string(cfg.k) +
                              " exceeds view count K = " + std::to_string(data.views));
    }
    if (data.train.empty()) throw data_error("train: dataset has no training identities");
    if (data.views < 1) throw data_error("train: dataset has no frames");
    const bool needs_refs = cfg.stage == Stage::s2 || s3;
    for (int id : data.train) {
        const auto& ident = data.ids[static_cast<size_t>(id)];
        if (ident.bald.size() != static_cast<size_t>(data.views))
            throw data_error("train: identity " + std::to_string(id) + " is missing bald frames");
        if (ident.source.size() != static_cast<size_t>(data.views))
            throw data_error("train: identity " + std::to_string(id) + " is missing source frames");
        if (needs_refs && ident.refs.empty())
            throw data_error("train: identity " + std::to_string(id) + " has no references");
    }

    const std::string want = required_prev(cfg.stage);
    if (bundle.stage != want)
        throw prereq_error("train " + stage_name(cfg.stage) + ": requires a '" + want +
                           "' checkpoint, got stage '" + bundle.stage + "'");
    if (cfg.stage == Stage::s2) bundle.model.init_extractor_from_backbone();

    Model& model = bundle.model;
    const auto on = trainable_namespaces(cfg.stage);
    const auto off = frozen_namespaces(cfg.stage);
    model.params.set_trainable([&on](const std::string& name) {
        for (const auto& ns : on)
            if (name.rfind(ns, 0) == 0) return true;
        return false;
    });
    if (report) {
        report->trainable = on;
        report->frozen = off;
        for (const auto& ns : kAllNamespaces)
            report->checksum_before[ns] = model.params.checksum(ns);
        for (const auto& ns : off) report->frozen_grad_norm_max[ns] = 0.0;
        report->loss.clear();
    }

    // Latents of every frame the stage can touch, encoded once.
    LatentCache cache;
    cache.source.resize(data.train.size());
    cache.bald.resize(data.train.size());
    cache.refs.resize(data.train.size());
    const bool needs_source = cfg.stage != Stage::s1;
    for (size_t i = 0; i < data.train.size(); ++i) {
        const auto& ident = data.ids[static_cast<size_t>(data.train[i])];
        for (int f = 0; f < data.views; ++f) {
            cache.bald[i].push_back(encode(bundle.codec, ident.bald[static_cast<size_t>(f)]));
            if (needs_source)
                cache.source[i].push_back(encode(bundle.codec, ident.source[static_cast<size_t>(f)]));
        }
        if (needs_refs)
            for (const Tensor& r : ident.refs) cache.refs[i].push_back(encode(bundle.codec, r));
    }
    const std::vector<std::vector<CameraPose>> id_poses = [&] {
        std::vector<std::vector<CameraPose>> p(data.train.size());
        for (size_t i = 0; i < data.train.size(); ++i)
            p[i] = data.ids[static_cast<size_t>(data.train[i])].poses;
        return p;
    }();

    Rng rng(child_seed(cfg.seed, "train." + stage_name(cfg.stage)));
    Adam opt;
    opt.lr = cfg.lr;
    const int T = bundle.schedule.T;
    const int lc = model.cfg.latent_channels(), ls = model.cfg.latent_size();

    auto train_index = [&](int id) {
        for (size_t i = 0; i < data.train.size(); ++i)
            if (data.train[i] == id) return i;
        throw data_error("train: drawn identity outside the train split");
    };

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<Sample> batch;
        int shared_t = -1;
        if (s3) {
            S3Draw d = draw_s3(rng, data, cfg.k);
            size_t ti = train_index(d.id);
            for (int f = 0; f < cfg.k; ++f) {
                Sample s;
                s.id = static_cast<int>(ti);
                s.target_frame = d.start + f;
                s.cond_frame = cfg.s3_bald_shared ? d.bald_frame : d.start + f;
                s.ref = d.ref;
                batch.push_back(s);
            }
            // Joint denoising uses one noise level per window, matching the
            // sampler, which steps all frames at the same timestep.
            shared_t = static_cast<int>(rng.uniform_int(T));
        } else {
            for (int b = 0; b < cfg.batch; ++b) {
                Sample s;
                if (cfg.stage == Stage::s2) {
                    S2Draw d = draw_s2(rng, data);
                    s.id = static_cast<int>(train_index(d.id));
                    s.cond_frame = s.target_frame = d.frame;
                    s.ref = d.ref;
                } else {
                    s.id = static_cast<int>(
                        rng.uniform_int(static_cast<int64_t>(data.train.size())));
                    int i = static_cast<int>(rng.uniform_int(data.views));
                    if (cfg.stage == Stage::bald) {
                        s.cond_frame = s.target_frame = i;
                    } else {  // s1: cross-pose bald pair, target pose conditions
                        s.cond_frame = i;
                        s.target_frame = static_cast<int>(rng.uniform_int(data.views));
                    }
                }
                batch.push_back(s);
            }
        }
        const int B = static_cast<int>(batch.size());

        Tensor zt({B, lc, ls, ls}), eps({B, lc, ls, ls}), cond({B, lc, ls, ls});
        std::vector<int> ts;
        std::vector<CameraPose> poses;
        const int64_t per = lc * ls * ls;
        for (int b = 0; b < B; ++b) {
            const Sample& s = batch[static_cast<size_t>(b)];
            const auto& tgt_lat = (cfg.stage == Stage::s1 ? cache.bald : cache.source)
                                      [static_cast<size_t>(s.id)][static_cast<size_t>(s.target_frame)];
            const auto& cond_lat =
                cfg.stage == Stage::bald
                    ? cache.source[static_cast<size_t>(s.id)][static_cast<size_t>(s.cond_frame)]
                    : cache.bald[static_cast<size_t>(s.id)][static_cast<size_t>(s.cond_frame)];
            int t = s3 ? shared_t : static_cast<int>(rng.uniform_int(T));
            ts.push_back(t);
            CameraPose pose = id_poses[static_cast<size_t>(s.id)][static_cast<size_t>(s.target_frame)];
            if (cfg.pose_noise_sigma > 0) pose = augment_pose(pose, cfg.pose_noise_sigma, rng);
            poses.push_back(pose);
            Tensor e({lc, ls, ls});
            for (auto& v : e.data) v = rng.gauss();
            Tensor z = add_noise(tgt_lat, e, t, bundle.schedule);
            std::copy(e.data.begin(), e.data.end(), eps.data.begin() + per * b);
            std::copy(z.data.begin(), z.data.end(), zt.data.begin() + per * b);
            std::copy(cond_lat.data.begin(), cond_lat.data.end(), cond.data.begin() + per * b);
        }

        // One condition-dropout draw per batch; bald/s1 drop the identity
        // branch, s2 swaps the reference bank for the learned null bank.
        bool drop = cfg.stage != Stage::s3 && rng.uniform() < cfg.dropout;

        model.params.zero_grad();
        NodePtr zt_n = constant(zt);
        NodePtr ef_n = constant(model.fused_embedding_batch(ts, poses));

        FeatureMap res, bank;
        Model::DenoiseOpts opts;
        bool use_identity = !(drop && (cfg.stage == Stage::bald || cfg.stage == Stage::s1));
        if (use_identity) {
            res = model.identity_residuals(constant(cond), zt_n, ef_n);
            opts.residuals = &res;
        }
        if (needs_refs) {
            if (cfg.stage == Stage::s2 && drop) {
                opts.null_bank = true;
            } else {
                std::vector<const Tensor*> refs;
                for (const Sample& s : batch)
                    refs.push_back(
                        &cache.refs[static_cast<size_t>(s.id)][static_cast<size_t>(s.ref)]);
                bank = model.extract_reference_features(constant(stack4(refs)));
                opts.hair_bank = &bank;
            }
        }
        opts.temporal = s3;

        NodePtr eps_hat = model.denoise(zt_n, ef_n, opts);
        NodePtr loss = ops::mse(eps_hat, constant(eps));
        backward(loss);
        opt.step(model.params);

        if (report) {
            report->loss.push_back(loss->val.data[0]);
            for (const auto& ns : off) {
                double g = model.params.grad_norm(ns);
                auto& mx = report->frozen_grad_norm_max[ns];
                if (g > mx) mx = g;
            }
        }
    }

    if (report)
        for (const auto& ns : kAllNamespaces)
            report->checksum_after[ns] = model.params.checksum(ns);
    bundle.stage = stage_name(cfg.stage);
    return bundle;
}

void write_loss_csv(const std::string& path, const std::vector<double>& loss,
                    const std::string& header_comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write loss csv: " + path);
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    out << "step,loss\n";
    char buf[64];
    for (size_t i = 0; i < loss.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", loss[i]);
        out << i << "," << buf << "\n";
    }
    if (!out) throw io_error("failed writing loss csv: " + path);
}

double eval_stage1_loss(const ModelBundle& bundle, const LoadedDataset& data, bool same_frame,
                        int n, uint64_t seed) {
    if (n < 1) throw param_error("eval_stage1_loss: n must be >= 1");
    std::vector<int> pool = data.val;
    pool.insert(pool.end(), data.test.begin(), data.test.end());
    if (pool.empty()) pool = data.train;
    if (pool.empty()) throw data_error("eval_stage1_loss: empty dataset");
    if (!same_frame && data.views < 2)
        throw data_error("eval_stage1_loss: cross-pose eval needs >= 2 views");

    NoGradGuard ng;
    const Model& model = bundle.model;
    Rng rng(child_seed(seed, same_frame ? "eval.s1.same" : "eval.s1.cross"));
    const int lc = model.cfg.latent_channels(), ls = model.cfg.latent_size();
    double total = 0;
    for (int it = 0; it < n; ++it) {
        const auto& ident =
            data.ids[static_cast<size_t>(pool[static_cast<size_t>(rng.uniform_int(
                static_cast<int64_t>(pool.size())))])];
        int i = static_cast<int>(rng.uniform_int(data.views));
        int j = i;
        if (!same_frame)
            while (j == i) j = static_cast<int>(rng.uniform_int(data.views));
        Tensor z0 = encode(bundle.codec, ident.bald[static_cast<size_t>(j)]);
        Tensor cond = encode(bundle.codec, ident.bald[static_cast<size_t>(i)]);
        z0.shape = {1, lc, ls, ls};
        cond.shape = {1, lc, ls, ls};
        int t = static_cast<int>(rng.uniform_int(bundle.schedule.T));
        Tensor e({1, lc, ls, ls});
        for (auto& v : e.data) v = rng.gauss();
        Tensor zt = add_noise(z0, e, t, bundle.schedule);
        NodePtr zt_n = constant(zt);
        NodePtr ef_n = constant(
            model.fused_embedding_batch({t}, {ident.poses[static_cast<size_t>(j)]}));
        FeatureMap res = model.identity_residuals(constant(cond), zt_n, ef_n);
        Model::DenoiseOpts opts;
        opts.residuals = &res;
        NodePtr eps_hat = model.denoise(zt_n, ef_n, opts);
        total += noise_prediction_loss(eps_hat->val, e);
    }
    return total / n;
}

}  // namespace mvht
