// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/model.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "mvht/rng.hpp"

namespace mvht {

namespace {

// Largest group count <= 8 that divides the width (concat-skip inputs can
// have widths like 12 that 8 does not divide).
int groups_for(int channels) {
    for (int g = std::min(8, channels); g > 1; --g)
        if (channels % g == 0) return g;
    return 1;
}

// Per-block build/run plan including concat-skip channel accounting.
struct BlockPlan {
    std::string key;
    int in_ch;
    int out_ch;
    int spatial;
    int level;  // -1 for mid
    enum Phase { kDown, kMid, kUp } phase;
};

std::vector<BlockPlan> make_plan(const ModelConfig& cfg) {
    std::vector<BlockPlan> plan;
    int levels = static_cast<int>(cfg.multipliers.size());
    int cur = cfg.base_channels;
    int sp = cfg.latent_size();
    std::vector<int> skips;
    for (int L = 0; L < levels; ++L) {
        int target = cfg.base_channels * cfg.multipliers[static_cast<size_t>(L)];
        for (int b = 0; b < cfg.blocks_per_level; ++b) {
            plan.push_back({"down" + std::to_string(L) + "." + std::to_string(b), cur, target, sp,
                            L, BlockPlan::kDown});
            cur = target;
            skips.push_back(cur);
        }
        if (L + 1 < levels) sp /= 2;
    }
    plan.push_back({"mid", cur, cur, sp, -1, BlockPlan::kMid});
    for (int L = levels - 1; L >= 0; --L) {
        int target = cfg.base_channels * cfg.multipliers[static_cast<size_t>(L)];
        for (int b = 0; b < cfg.blocks_per_level; ++b) {
            int skip = skips.back();
            skips.pop_back();
            plan.push_back({"up" + std::to_string(L) + "." + std::to_string(b), cur + skip, target,
                            sp, L, BlockPlan::kUp});
            cur = target;
        }
        if (L > 0) sp *= 2;
    }
    return plan;
}

// Up block key -> the down block whose features mirror it (for the identity
// branch, which only runs the encoder).
std::string mirror_key(const ModelConfig& cfg, const std::string& key) {
    if (key == "mid" || key.rfind("down", 0) == 0) return key;
    size_t dot = key.find('.');
    std::string level = key.substr(2, dot - 2);
    int b = std::stoi(key.substr(dot + 1));
    return "down" + level + "." + std::to_string(cfg.blocks_per_level - 1 - b);
}

NodePtr to_tokens(const NodePtr& x) {
    int B = x->val.dim(0), C = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    return ops::permute(ops::reshape(x, {B, C, H * W}), {0, 2, 1});
}

NodePtr to_spatial(const NodePtr& t, int H, int W) {
    int B = t->val.dim(0), C = t->val.dim(2);
    return ops::reshape(ops::permute(t, {0, 2, 1}), {B, C, H, W});
}

// x [B,T,C] -> [B,T,M] through a shared per-token linear.
NodePtr tokl(const NodePtr& x, const NodePtr& w, const NodePtr& b) {
    int B = x->val.dim(0), T = x->val.dim(1), C = x->val.dim(2);
    int M = w->val.dim(1);
    return ops::reshape(ops::linear(ops::reshape(x, {B * T, C}), w, b), {B, T, M});
}

// Multi-head scaled dot-product attention; q [B,Tq,C], k/v [B,Tk,C].
NodePtr mha(const NodePtr& q, const NodePtr& k, const NodePtr& v, int heads) {
    int B = q->val.dim(0), Tq = q->val.dim(1), C = q->val.dim(2);
    int Tk = k->val.dim(1);
    int dh = C / heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    auto split = [&](const NodePtr& x, int T) {
        return ops::reshape(ops::permute(ops::reshape(x, {B, T, heads, dh}), {0, 2, 1, 3}),
                            {B * heads, T, dh});
    };
    NodePtr att =
        ops::softmax_lastdim(ops::mul_scalar(ops::bmm_nt(split(q, Tq), split(k, Tk)), scale));
    NodePtr out = ops::bmm_nn(att, split(v, Tk));
    return ops::reshape(ops::permute(ops::reshape(out, {B, heads, Tq, dh}), {0, 2, 1, 3}),
                        {B, Tq, C});
}

struct TrunkCtx {
    const ModelConfig* cfg;
    const ParamStore* params;
    std::string ns;
    // Backbone-only injection surfaces.
    const FeatureMap* residuals = nullptr;
    const FeatureMap* bank = nullptr;  // [B,Tk,C] per key (real or null)
    bool temporal = false;
    const Model* model = nullptr;
    // Harvesting.
    FeatureMap* block_outputs = nullptr;
    FeatureMap* sa_tokens = nullptr;
};

NodePtr pget(const TrunkCtx& c, const std::string& rel) { return c.params->get(c.ns + rel); }

NodePtr run_resblock(const TrunkCtx& c, const BlockPlan& p, NodePtr x, const NodePtr& temb_silu) {
    const std::string& b = p.key;
    NodePtr h = ops::group_norm(x, pget(c, b + ".res.gn1.g"), pget(c, b + ".res.gn1.b"),
                                groups_for(p.in_ch));
    h = ops::conv2d(ops::silu(h), pget(c, b + ".res.conv1.w"), pget(c, b + ".res.conv1.b"), 1, 1);
    NodePtr emb = ops::linear(temb_silu, pget(c, b + ".res.emb.w"), pget(c, b + ".res.emb.b"));
    h = ops::add_channel_vec(h, emb);
    h = ops::group_norm(h, pget(c, b + ".res.gn2.g"), pget(c, b + ".res.gn2.b"),
                        groups_for(p.out_ch));
    h = ops::conv2d(ops::silu(h), pget(c, b + ".res.conv2.w"), pget(c, b + ".res.conv2.b"), 1, 1);
    NodePtr skip = x;
    if (p.in_ch != p.out_ch)
        skip = ops::conv2d(x, pget(c, b + ".res.skip.w"), pget(c, b + ".res.skip.b"), 1, 0);
    return ops::add(skip, h);
}

NodePtr run_attn(const TrunkCtx& c, const BlockPlan& p, NodePtr x) {
    const std::string& b = p.key;
    int H = x->val.dim(2), W = x->val.dim(3);
    NodePtr tok = to_tokens(ops::group_norm(x, pget(c, b + ".sa.gn.g"), pget(c, b + ".sa.gn.b"),
                                            groups_for(p.out_ch)));
    NodePtr q = tokl(tok, pget(c, b + ".sa.q.w"), pget(c, b + ".sa.q.b"));
    NodePtr k = tokl(tok, pget(c, b + ".sa.k.w"), pget(c, b + ".sa.k.b"));
    NodePtr v = tokl(tok, pget(c, b + ".sa.v.w"), pget(c, b + ".sa.v.b"));
    NodePtr sa = mha(q, k, v, c.cfg->heads);
    NodePtr out =
        ops::add(x, to_spatial(tokl(sa, pget(c, b + ".sa.o.w"), pget(c, b + ".sa.o.b")), H, W));
    if (c.bank) {
        auto it = c.bank->find(p.key);
        if (it == c.bank->end()) throw param_error("denoise: hair bank missing block " + p.key);
        const NodePtr& entry = it->second;
        if (entry->val.rank() != 3 || entry->val.dim(0) != x->val.dim(0) ||
            entry->val.dim(2) != p.out_ch)
            throw param_error("denoise: hair bank shape mismatch at block " + p.key);
        // Q shared with self-attention; K/V projected from the bank entry;
        // zero-initialized output projection keeps the pathway neutral at
        // stage-2 start.
        NodePtr kr = tokl(entry, c.params->get("hair.ca." + p.key + ".k.w"),
                          c.params->get("hair.ca." + p.key + ".k.b"));
        NodePtr vr = tokl(entry, c.params->get("hair.ca." + p.key + ".v.w"),
                          c.params->get("hair.ca." + p.key + ".v.b"));
        NodePtr ca = mha(q, kr, vr, c.cfg->heads);
        NodePtr proj = tokl(ca, c.params->get("hair.ca." + p.key + ".o.w"),
                            c.params->get("hair.ca." + p.key + ".o.b"));
        out = ops::add(out, to_spatial(proj, H, W));
    }
    return out;
}

NodePtr run_block(const TrunkCtx& c, const BlockPlan& p, NodePtr x, const NodePtr& temb_silu) {
    x = run_resblock(c, p, x, temb_silu);
    x = run_attn(c, p, x);
    if (c.residuals) x = ops::add(x, c.residuals->at(p.key));
    if (c.temporal) x = c.model->temporal_self_attention_spatial(p.key, x);
    if (c.block_outputs) (*c.block_outputs)[p.key] = x;
    // Bank tokens are block outputs so every extractor parameter, including
    // the last block's attention, shapes the harvested features.
    if (c.sa_tokens) (*c.sa_tokens)[p.key] = to_tokens(x);
    return x;
}

// Runs the trunk from the post-conv_in features; stops after the middle
// block when up_path is false.
NodePtr run_trunk(const TrunkCtx& c, NodePtr x, const NodePtr& temb_silu, bool up_path) {
    auto plan = make_plan(*c.cfg);
    int levels = static_cast<int>(c.cfg->multipliers.size());
    std::vector<NodePtr> skips;
    size_t i = 0;
    for (int L = 0; L < levels; ++L) {
        for (int b = 0; b < c.cfg->blocks_per_level; ++b, ++i) {
            x = run_block(c, plan[i], x, temb_silu);
            skips.push_back(x);
        }
        if (L + 1 < levels) {
            std::string ds = "down" + std::to_string(L) + ".ds";
            x = ops::conv2d(x, pget(c, ds + ".w"), pget(c, ds + ".b"), 2, 1);
        }
    }
    x = run_block(c, plan[i], x, temb_silu);
    ++i;
    if (!up_path) return x;
    for (int L = levels - 1; L >= 0; --L) {
        for (int b = 0; b < c.cfg->blocks_per_level; ++b, ++i) {
            x = ops::concat_channels(x, skips.back());
            skips.pop_back();
            x = run_block(c, plan[i], x, temb_silu);
        }
        if (L > 0) {
            std::string us = "up" + std::to_string(L) + ".us";
            x = ops::conv2d(ops::upsample_nearest2(x), pget(c, us + ".w"), pget(c, us + ".b"), 1,
                            1);
        }
    }
    return x;
}

NodePtr time_forward(const ParamStore& params, const std::string& ns, const NodePtr& e_f) {
    NodePtr a = ops::linear(e_f, params.get(ns + "time.l1.w"), params.get(ns + "time.l1.b"));
    a = ops::linear(ops::silu(a), params.get(ns + "time.l2.w"), params.get(ns + "time.l2.b"));
    return ops::silu(a);
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void ModelConfig::validate() const {
    if (image_size < 4) throw param_error("ModelConfig: image_size too small");
    if (f < 1 || image_size % f != 0) throw param_error("ModelConfig: f must divide image_size");
    if (image_channels < 1) throw param_error("ModelConfig: image_channels must be >= 1");
    if (base_channels < 2) throw param_error("ModelConfig: base_channels too small");
    if (multipliers.empty()) throw param_error("ModelConfig: multipliers empty");
    if (blocks_per_level < 1) throw param_error("ModelConfig: blocks_per_level must be >= 1");
    if (heads < 1) throw param_error("ModelConfig: heads must be >= 1");
    if (embed_dim % 6 != 0 || embed_dim < 6)
        throw param_error("ModelConfig: embed_dim must be divisible by 6");
    if (max_frames < 12) throw param_error("ModelConfig: max_frames must be >= 12");
    if (identity_mode != "latent" && identity_mode != "pixel")
        throw param_error("ModelConfig: identity_mode must be latent or pixel");
    int sp = latent_size();
    for (size_t L = 0; L + 1 < multipliers.size(); ++L) {
        if (sp % 2 != 0) throw param_error("ModelConfig: latent size not divisible across levels");
        sp /= 2;
    }
    for (int m : multipliers) {
        if (m < 1) throw param_error("ModelConfig: multiplier must be >= 1");
        int ch = base_channels * m;
        if (ch % heads != 0) throw param_error("ModelConfig: channels not divisible by heads");
        if (ch % 2 != 0) throw param_error("ModelConfig: channels must be even");
    }
}

std::vector<BlockInfo> block_layout(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<BlockInfo> out;
    for (const auto& p : make_plan(cfg)) {
        int b = p.phase == BlockPlan::kMid ? 0 : std::stoi(p.key.substr(p.key.find('.') + 1));
        out.push_back({p.key, p.level, b, p.out_ch, p.spatial});
    }
    return out;
}

void Model::build_params(uint64_t seed) {
    auto gauss_tensor = [&](const std::string& name, std::vector<int> shape, double sd) {
        Rng r(child_seed(seed, name));
        Tensor t(std::move(shape));
        for (double& v : t.data) v = sd * r.gauss();
        return t;
    };
    auto conv = [&](const std::string& name, int O, int C, int k, const std::string& mode) {
        double sd = 0.0;
        if (mode == "he") sd = std::sqrt(2.0 / (C * k * k));
        else if (mode == "tiny") sd = 1e-3;
        params.add(name + ".w", sd == 0.0 ? Tensor::zeros({O, C, k, k})
                                          : gauss_tensor(name + ".w", {O, C, k, k}, sd));
        params.add(name + ".b", Tensor::zeros({O}));
    };
    auto lin = [&](const std::string& name, int K, int M, const std::string& mode) {
        double sd = 0.0;
        if (mode == "he") sd = std::sqrt(2.0 / K);
        else if (mode == "attn") sd = std::sqrt(1.0 / K);
        params.add(name + ".w",
                   sd == 0.0 ? Tensor::zeros({K, M}) : gauss_tensor(name + ".w", {K, M}, sd));
        params.add(name + ".b", Tensor::zeros({M}));
    };
    auto gn = [&](const std::string& name, int C) {
        params.add(name + ".g", Tensor::full({C}, 1.0));
        params.add(name + ".b", Tensor::zeros({C}));
    };

    auto plan = make_plan(cfg);
    int levels = static_cast<int>(cfg.multipliers.size());
    int d = cfg.embed_dim;

    // One UNet trunk under ns; up_path=false is the IdentityNet encoder copy.
    auto trunk = [&](const std::string& ns, bool up_path) {
        conv(ns + "conv_in", cfg.base_channels, cfg.latent_channels(), 3, "he");
        lin(ns + "time.l1", d, d, "he");
        lin(ns + "time.l2", d, d, "he");
        for (const auto& p : plan) {
            if (!up_path && p.phase == BlockPlan::kUp) continue;
            std::string b = ns + p.key;
            gn(b + ".res.gn1", p.in_ch);
            conv(b + ".res.conv1", p.out_ch, p.in_ch, 3, "he");
            lin(b + ".res.emb", d, p.out_ch, "he");
            gn(b + ".res.gn2", p.out_ch);
            conv(b + ".res.conv2", p.out_ch, p.out_ch, 3, "he");
            if (p.in_ch != p.out_ch) conv(b + ".res.skip", p.out_ch, p.in_ch, 1, "he");
            gn(b + ".sa.gn", p.out_ch);
            lin(b + ".sa.q", p.out_ch, p.out_ch, "attn");
            lin(b + ".sa.k", p.out_ch, p.out_ch, "attn");
            lin(b + ".sa.v", p.out_ch, p.out_ch, "attn");
            lin(b + ".sa.o", p.out_ch, p.out_ch, "attn");
        }
        for (int L = 0; L + 1 < levels; ++L) {
            int ch = cfg.base_channels * cfg.multipliers[static_cast<size_t>(L)];
            conv(ns + "down" + std::to_string(L) + ".ds", ch, ch, 3, "he");
        }
        if (up_path)
            for (int L = levels - 1; L > 0; --L) {
                int ch = cfg.base_channels * cfg.multipliers[static_cast<size_t>(L)];
                conv(ns + "up" + std::to_string(L) + ".us", ch, ch, 3, "he");
            }
    };

    trunk("backbone.", true);
    gn("backbone.out.gn", cfg.base_channels * cfg.multipliers[0]);
    // Near-zero head: step-0 predictions are ~0 (unit loss against unit
    // noise) while gradients still reach every upstream parameter.
    conv("backbone.out.conv", cfg.latent_channels(), cfg.base_channels * cfg.multipliers[0], 3,
         "tiny");

    trunk("identity.", false);
    if (cfg.identity_mode == "latent") {
        conv("identity.cond", cfg.base_channels, cfg.latent_channels(), 1, "he");
    } else {
        conv("identity.pix.c1", cfg.base_channels, cfg.image_channels, 3, "he");
        conv("identity.pix.c2", cfg.base_channels, cfg.base_channels, 3, "he");
    }
    for (const auto& p : plan) conv("identity.outproj." + p.key, p.out_ch, p.out_ch, 1, "zero");

    trunk("hair.ext.", true);
    for (const auto& p : plan) {
        std::string b = "hair.ca." + p.key;
        lin(b + ".k", p.out_ch, p.out_ch, "attn");
        lin(b + ".v", p.out_ch, p.out_ch, "attn");
        lin(b + ".o", p.out_ch, p.out_ch, "zero");
        params.add("hair.null." + p.key, gauss_tensor("hair.null." + p.key, {1, p.out_ch}, 0.01));
    }

    for (const auto& p : plan) {
        std::string b = "temporal." + p.key;
        gn(b + ".gn", p.out_ch);
        lin(b + ".q", p.out_ch, p.out_ch, "attn");
        lin(b + ".k", p.out_ch, p.out_ch, "attn");
        lin(b + ".v", p.out_ch, p.out_ch, "attn");
        lin(b + ".o", p.out_ch, p.out_ch, "zero");
    }
}

Model Model::fresh(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.build_params(seed);
    return m;
}

Tensor Model::fused_embedding_batch(const std::vector<int>& ts,
                                    const std::vector<CameraPose>& poses) const {
    if (ts.size() != poses.size() || ts.empty())
        throw param_error("fused_embedding_batch: ts/poses size mismatch");
    int B = static_cast<int>(ts.size());
    Tensor out({B, cfg.embed_dim});
    for (int i = 0; i < B; ++i) {
        Tensor row = fuse_pose_time(ts[static_cast<size_t>(i)], poses[static_cast<size_t>(i)],
                                    cfg.embed_dim);
        std::copy(row.data.begin(), row.data.end(),
                  out.data.begin() + static_cast<int64_t>(i) * cfg.embed_dim);
    }
    return out;
}

NodePtr Model::denoise(const NodePtr& z_t, const NodePtr& e_f, const DenoiseOpts& opts) const {
    int ls = cfg.latent_size(), lc = cfg.latent_channels();
    if (z_t->val.rank() != 4 || z_t->val.dim(1) != lc || z_t->val.dim(2) != ls ||
        z_t->val.dim(3) != ls)
        throw param_error("denoise: z_t shape " + shape_str(z_t->val.shape));
    int B = z_t->val.dim(0);
    if (e_f->val.rank() != 2 || e_f->val.dim(0) != B || e_f->val.dim(1) != cfg.embed_dim)
        throw param_error("denoise: e_f shape " + shape_str(e_f->val.shape));
    if (opts.temporal && B > cfg.max_frames) throw param_error("denoise: sequence too long");
    if (opts.hair_bank && opts.null_bank)
        throw param_error("denoise: hair_bank and null_bank are mutually exclusive");

    auto layout = make_plan(cfg);
    auto known_key = [&](const std::string& key) {
        for (const auto& p : layout)
            if (p.key == key) return true;
        return false;
    };
    if (opts.residuals) {
        for (const auto& p : layout) {
            auto it = opts.residuals->find(p.key);
            if (it == opts.residuals->end())
                throw param_error("denoise: residuals missing block " + p.key);
            const Tensor& t = it->second->val;
            if (t.shape != std::vector<int>{B, p.out_ch, p.spatial, p.spatial})
                throw param_error("denoise: residual shape mismatch at block " + p.key);
        }
        for (const auto& [key, node] : *opts.residuals)
            if (!known_key(key)) throw param_error("denoise: residuals have unknown block " + key);
    }
    if (opts.hair_bank)
        for (const auto& [key, node] : *opts.hair_bank)
            if (!known_key(key)) throw param_error("denoise: hair bank has unknown block " + key);

    FeatureMap nb;
    const FeatureMap* bank = opts.hair_bank;
    if (opts.null_bank) {
        nb = null_bank(B);
        bank = &nb;
    }

    TrunkCtx c;
    c.cfg = &cfg;
    c.params = &params;
    c.ns = "backbone.";
    c.residuals = opts.residuals;
    c.bank = bank;
    c.temporal = opts.temporal;
    c.model = this;

    NodePtr temb = time_forward(params, "backbone.", e_f);
    NodePtr x = ops::conv2d(z_t, params.get("backbone.conv_in.w"),
                            params.get("backbone.conv_in.b"), 1, 1);
    x = run_trunk(c, x, temb, true);
    x = ops::group_norm(x, params.get("backbone.out.gn.g"), params.get("backbone.out.gn.b"),
                        groups_for(x->val.dim(1)));
    return ops::conv2d(ops::silu(x), params.get("backbone.out.conv.w"),
                       params.get("backbone.out.conv.b"), 1, 1);
}

FeatureMap Model::identity_residuals(const NodePtr& cond, const NodePtr& z_t,
                                     const NodePtr& e_f) const {
    int ls = cfg.latent_size(), lc = cfg.latent_channels();
    if (z_t->val.rank() != 4 || z_t->val.dim(1) != lc || z_t->val.dim(2) != ls ||
        z_t->val.dim(3) != ls)
        throw param_error("identity_residuals: z_t shape " + shape_str(z_t->val.shape));
    int B = z_t->val.dim(0);
    if (e_f->val.rank() != 2 || e_f->val.dim(0) != B || e_f->val.dim(1) != cfg.embed_dim)
        throw param_error("identity_residuals: e_f shape " + shape_str(e_f->val.shape));

    NodePtr cond_feat;
    if (cfg.identity_mode == "latent") {
        // Structural contract: the condition enters at latent resolution.
        if (cond->val.shape != std::vector<int>{B, lc, ls, ls})
            throw param_error("identity_residuals: condition must be a latent [B," +
                              std::to_string(lc) + "," + std::to_string(ls) + "," +
                              std::to_string(ls) + "], got " + shape_str(cond->val.shape));
        cond_feat =
            ops::conv2d(cond, params.get("identity.cond.w"), params.get("identity.cond.b"), 1, 0);
    } else {
        if (cond->val.shape !=
            std::vector<int>{B, cfg.image_channels, cfg.image_size, cfg.image_size})
            throw param_error("identity_residuals: condition must be a pixel image, got " +
                              shape_str(cond->val.shape));
        NodePtr h = ops::conv2d(cond, params.get("identity.pix.c1.w"),
                                params.get("identity.pix.c1.b"), cfg.f, 1);
        cond_feat = ops::conv2d(ops::silu(h), params.get("identity.pix.c2.w"),
                                params.get("identity.pix.c2.b"), 1, 1);
    }

    TrunkCtx c;
    c.cfg = &cfg;
    c.params = &params;
    c.ns = "identity.";
    FeatureMap feats;
    c.block_outputs = &feats;

    NodePtr temb = time_forward(params, "identity.", e_f);
    NodePtr x = ops::conv2d(z_t, params.get("identity.conv_in.w"),
                            params.get("identity.conv_in.b"), 1, 1);
    x = ops::add(x, cond_feat);
    run_trunk(c, x, temb, false);

    FeatureMap out;
    for (const auto& p : make_plan(cfg)) {
        const NodePtr& src = feats.at(mirror_key(cfg, p.key));
        out[p.key] = ops::conv2d(src, params.get("identity.outproj." + p.key + ".w"),
                                 params.get("identity.outproj." + p.key + ".b"), 1, 0);
    }
    return out;
}

FeatureMap Model::extract_reference_features(const NodePtr& ref_latent) const {
    int ls = cfg.latent_size(), lc = cfg.latent_channels();
    if (ref_latent->val.rank() != 4 || ref_latent->val.dim(1) != lc ||
        ref_latent->val.dim(2) != ls || ref_latent->val.dim(3) != ls)
        throw param_error("extract_reference_features: latent shape " +
                          shape_str(ref_latent->val.shape));
    int B = ref_latent->val.dim(0);

    // Clean input: fixed timestep 0, zero pose.
    std::vector<int> ts(static_cast<size_t>(B), 0);
    std::vector<CameraPose> poses(static_cast<size_t>(B));
    NodePtr e_f = constant(fused_embedding_batch(ts, poses));

    TrunkCtx c;
    c.cfg = &cfg;
    c.params = &params;
    c.ns = "hair.ext.";
    FeatureMap tokens;
    c.sa_tokens = &tokens;

    NodePtr temb = time_forward(params, "hair.ext.", e_f);
    NodePtr x = ops::conv2d(ref_latent, params.get("hair.ext.conv_in.w"),
                            params.get("hair.ext.conv_in.b"), 1, 1);
    run_trunk(c, x, temb, true);
    return tokens;
}

FeatureMap Model::null_bank(int batch) const {
    if (batch < 1) throw param_error("null_bank: batch must be >= 1");
    FeatureMap out;
    for (const auto& p : make_plan(cfg)) {
        NodePtr tokrow = ops::reshape(params.get("hair.null." + p.key), {1, 1, p.out_ch});
        if (batch == 1) {
            out[p.key] = tokrow;
        } else {
            std::vector<NodePtr> reps(static_cast<size_t>(batch), tokrow);
            out[p.key] = ops::concat0(reps);
        }
    }
    return out;
}

NodePtr Model::temporal_self_attention(const std::string& key, const NodePtr& features,
                                       bool use_pe) const {
    if (features->val.rank() != 3)
        throw param_error("temporal_self_attention: want [frames,tokens,channels]");
    int F = features->val.dim(0), T = features->val.dim(1), C = features->val.dim(2);
    if (F > cfg.max_frames) throw param_error("temporal_self_attention: sequence too long");
    std::string b = "temporal." + key;
    if (params.get(b + ".gn.g")->val.dim(0) != C)
        throw param_error("temporal_self_attention: channel mismatch at block " + key);
    if (F == 1) return features;  // structural identity

    NodePtr g4 = ops::reshape(ops::permute(features, {0, 2, 1}), {F, C, T, 1});
    g4 = ops::group_norm(g4, params.get(b + ".gn.g"), params.get(b + ".gn.b"), groups_for(C));
    NodePtr g = ops::permute(ops::reshape(g4, {F, C, T}), {0, 2, 1});
    if (use_pe) {
        Tensor pe({F, T, C});
        for (int f = 0; f < F; ++f) {
            Tensor row = sinusoidal_embed(static_cast<double>(f), C);
            for (int t = 0; t < T; ++t)
                std::copy(row.data.begin(), row.data.end(),
                          pe.data.begin() + (static_cast<int64_t>(f) * T + t) * C);
        }
        g = ops::add(g, constant(std::move(pe)));
    }
    // Frame-axis attention independently per spatial token.
    NodePtr across = ops::permute(g, {1, 0, 2});  // [T,F,C]
    NodePtr q = tokl(across, params.get(b + ".q.w"), params.get(b + ".q.b"));
    NodePtr k = tokl(across, params.get(b + ".k.w"), params.get(b + ".k.b"));
    NodePtr v = tokl(across, params.get(b + ".v.w"), params.get(b + ".v.b"));
    NodePtr att = mha(q, k, v, cfg.heads);
    NodePtr o = tokl(att, params.get(b + ".o.w"), params.get(b + ".o.b"));
    return ops::add(features, ops::permute(o, {1, 0, 2}));
}

NodePtr Model::temporal_self_attention_spatial(const std::string& key, const NodePtr& x) const {
    if (x->val.rank() != 4) throw param_error("temporal attention: want [F,C,H,W]");
    if (x->val.dim(0) == 1) return x;  // structural identity, no relayout
    int H = x->val.dim(2), W = x->val.dim(3);
    return to_spatial(temporal_self_attention(key, to_tokens(x), true), H, W);
}

void Model::init_extractor_from_backbone() {
    for (const auto& [name, node] : params.all()) {
        if (name.rfind("backbone.", 0) != 0 || name.rfind("backbone.out.", 0) == 0) continue;
        std::string target = "hair.ext." + name.substr(9);
        const NodePtr& dst = params.get(target);
        if (!dst->val.same_shape(node->val))
            throw data_error("init_extractor_from_backbone: shape mismatch at " + target);
        dst->val.data = node->val.data;
    }
}

Model Model::from_checkpoint(const Checkpoint& ck) {
    ModelConfig cfg;
    auto need = [&](const std::string& k) -> const std::string& {
        auto it = ck.meta.find(k);
        if (it == ck.meta.end()) throw data_error("checkpoint: missing meta key " + k);
        return it->second;
    };
    cfg.image_size = std::stoi(need("cfg.image_size"));
    cfg.image_channels = std::stoi(need("cfg.image_channels"));
    cfg.f = std::stoi(need("cfg.f"));
    cfg.base_channels = std::stoi(need("cfg.base_channels"));
    cfg.multipliers.clear();
    {
        std::istringstream is(need("cfg.multipliers"));
        std::string tok;
        while (std::getline(is, tok, ',')) cfg.multipliers.push_back(std::stoi(tok));
    }
    cfg.blocks_per_level = std::stoi(need("cfg.blocks_per_level"));
    cfg.heads = std::stoi(need("cfg.heads"));
    cfg.embed_dim = std::stoi(need("cfg.embed_dim"));
    cfg.max_frames = std::stoi(need("cfg.max_frames"));
    cfg.identity_mode = need("cfg.identity_mode");

    Model m = fresh(cfg, 0);
    size_t used = 0;
    for (const auto& [name, node] : m.params.all()) {
        auto it = ck.tensors.find(name);
        if (it == ck.tensors.end()) throw data_error("checkpoint: missing tensor " + name);
        if (!it->second.same_shape(node->val))
            throw data_error("checkpoint: tensor shape mismatch at " + name);
        node->val.data = it->second.data;
        ++used;
    }
    if (used != ck.tensors.size()) throw data_error("checkpoint: contains unknown tensors");
    return m;
}

ModelBundle make_bundle(const ModelConfig& cfg, uint64_t model_seed, uint64_t codec_seed,
                        int schedule_T, double beta_start, double beta_end) {
    ModelBundle b;
    b.model = Model::fresh(cfg, model_seed);
    b.codec = make_codec(cfg.f, cfg.image_channels, codec_seed);
    b.schedule = build_schedule(schedule_T, beta_start, beta_end);
    b.stage = "fresh";
    b.codec_seed = codec_seed;
    b.schedule_T = schedule_T;
    b.beta_start = beta_start;
    b.beta_end = beta_end;
    return b;
}

void save_bundle(const std::string& path, const ModelBundle& b) {
    std::map<std::string, std::string> meta;
    const ModelConfig& c = b.model.cfg;
    meta["cfg.image_size"] = std::to_string(c.image_size);
    meta["cfg.image_channels"] = std::to_string(c.image_channels);
    meta["cfg.f"] = std::to_string(c.f);
    meta["cfg.base_channels"] = std::to_string(c.base_channels);
    {
        std::string ms;
        for (size_t i = 0; i < c.multipliers.size(); ++i)
            ms += (i ? "," : "") + std::to_string(c.multipliers[i]);
        meta["cfg.multipliers"] = ms;
    }
    meta["cfg.blocks_per_level"] = std::to_string(c.blocks_per_level);
    meta["cfg.heads"] = std::to_string(c.heads);
    meta["cfg.embed_dim"] = std::to_string(c.embed_dim);
    meta["cfg.max_frames"] = std::to_string(c.max_frames);
    meta["cfg.identity_mode"] = c.identity_mode;
    meta["codec.seed"] = std::to_string(b.codec_seed);
    meta["schedule.T"] = std::to_string(b.schedule_T);
    meta["schedule.beta_start"] = fmt_double(b.beta_start);
    meta["schedule.beta_end"] = fmt_double(b.beta_end);
    meta["stage"] = b.stage;
    save_checkpoint(path, meta, b.model.params);
}

ModelBundle load_bundle(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    ModelBundle b;
    b.model = Model::from_checkpoint(ck);
    auto need = [&](const std::string& k) -> const std::string& {
        auto it = ck.meta.find(k);
        if (it == ck.meta.end()) throw data_error("checkpoint: missing meta key " + k);
        return it->second;
    };
    b.codec_seed = std::stoull(need("codec.seed"));
    b.schedule_T = std::stoi(need("schedule.T"));
    b.beta_start = std::stod(need("schedule.beta_start"));
    b.beta_end = std::stod(need("schedule.beta_end"));
    b.stage = need("stage");
    b.codec = make_codec(b.model.cfg.f, b.model.cfg.image_channels, b.codec_seed);
    b.schedule = build_schedule(b.schedule_T, b.beta_start, b.beta_end);
    return b;
}

}  // namespace mvht
