// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvht/codec.hpp"
#include "mvht/diffusion.hpp"
#include "mvht/ops.hpp"
#include "mvht/params.hpp"
#include "mvht/pose.hpp"

namespace mvht {

struct ModelConfig {
    int image_size = 32;
    int image_channels = 3;
    int f = 2;  // codec space-to-depth factor
    int base_channels = 32;
    std::vector<int> multipliers = {1, 2};
    int blocks_per_level = 1;
    int heads = 4;
    int embed_dim = 96;  // d; divisible by 6
    int max_frames = 24;
    std::string identity_mode = "latent";  // "latent" or "pixel" (ablation)

    int latent_size() const { return image_size / f; }
    int latent_channels() const { return image_channels * f * f; }
    void validate() const;
};

// Deterministic enumeration of the backbone's injection surface, in forward
// order: down blocks, middle, up blocks.
struct BlockInfo {
    std::string key;  // "down<level>.<block>", "mid", "up<level>.<block>"
    int level;        // -1 for mid
    int block;        // index within level, 0 for mid
    int channels;     // block output channels
    int spatial;      // block output spatial size
};

std::vector<BlockInfo> block_layout(const ModelConfig& cfg);

using FeatureMap = std::map<std::string, NodePtr>;  // keyed by block key

// Backbone + IdentityNet + Hair Extractor/cross-attention + temporal blocks
// over one ParamStore, partitioned by the namespaces "backbone.",
// "identity.", "hair." and "temporal.".
class Model {
public:
    ModelConfig cfg;
    ParamStore params;

    static Model fresh(const ModelConfig& cfg, uint64_t seed);
    static Model from_checkpoint(const Checkpoint& ck);

    // Batched Eq.-2 fusion: one row per (t, pose).
    Tensor fused_embedding_batch(const std::vector<int>& ts,
                                 const std::vector<CameraPose>& poses) const;

    struct DenoiseOpts {
        const FeatureMap* residuals = nullptr;  // identity residuals per block
        const FeatureMap* hair_bank = nullptr;  // (B, tokens, C) per block
        bool null_bank = false;                 // use the learned null bank
        bool temporal = false;                  // batch axis is the frame axis
    };

    // z_t [B,Cl,h,w], e_f [B,d] -> eps_pred [B,Cl,h,w].
    NodePtr denoise(const NodePtr& z_t, const NodePtr& e_f, const DenoiseOpts& opts) const;

    // cond is a latent [B,Cl,h,w] in latent mode, a pixel image
    // [B,c,H,W] in pixel mode. Residuals cover every block_layout key and
    // are exactly zero at fresh initialization.
    FeatureMap identity_residuals(const NodePtr& cond, const NodePtr& z_t,
                                  const NodePtr& e_f) const;

    // Clean reference latent [B,Cl,h,w] -> per-block self-attention token
    // banks [B,tokens,C], harvested at timestep 0 with zero pose.
    FeatureMap extract_reference_features(const NodePtr& ref_latent) const;

    // Builds the per-key null bank [B,1,C] from the learned null tokens.
    FeatureMap null_bank(int batch) const;

    // Standalone temporal attention over [frames, tokens, channels] for one
    // block key; use_pe=false zeroes the frame-position encoding (test
    // symmetry oracle). frames==1 returns the input node unchanged.
    NodePtr temporal_self_attention(const std::string& key, const NodePtr& features,
                                    bool use_pe = true) const;

    // Same operation on [frames, C, H, W] features (in-network layout).
    NodePtr temporal_self_attention_spatial(const std::string& key, const NodePtr& x) const;

    // Copies every backbone.* parameter onto its hair.ext.* counterpart
    // (stage-2 initialization).
    void init_extractor_from_backbone();

    Model() = default;  // empty shell; use fresh() or from_checkpoint()

private:
    void build_params(uint64_t seed);
};

// Checkpoint glue: model config + codec + schedule + stage tag round-trip
// through checkpoint metadata.
struct ModelBundle {
    Model model;
    LatentCodec codec;
    NoiseSchedule schedule;
    std::string stage;  // "fresh", "bald", "s1", "s2", "s3"
    uint64_t codec_seed = 0;
    int schedule_T = kScheduleT;
    double beta_start = kBetaStart;
    double beta_end = kBetaEnd;
};

ModelBundle make_bundle(const ModelConfig& cfg, uint64_t model_seed, uint64_t codec_seed,
                        int schedule_T, double beta_start, double beta_end);
void save_bundle(const std::string& path, const ModelBundle& b);
ModelBundle load_bundle(const std::string& path);

}  // namespace mvht
