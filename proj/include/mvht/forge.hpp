// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "mvht/pose.hpp"
#include "mvht/rng.hpp"
#include "mvht/tensor.hpp"

namespace mvht {

// Canonical dataset-shape constants.
inline constexpr int kDefaultViews = 21;
inline constexpr int kDefaultRefs = 10;
inline constexpr int kBackgroundCount = 100;
inline constexpr double kRefScaleJitter = 0.15;

// Procedural avatar description. Hair geometry is a function of the hair
// block (and pose/scale) only, never of the identity block, so hair masks
// can be predicted for any head.
struct AvatarSpec {
    // identity
    std::array<double, 3> skin{0.8, 0.65, 0.55};
    std::array<double, 3> feature{0.1, 0.1, 0.1};
    double face_aspect = 1.0;  // widens/narrows the head ellipse
    double eye_dx = 0.11;      // lateral eye offset
    double eye_y = 0.50;       // eye row, fraction of height
    double mouth_y = 0.66;
    int background = 0;  // id into the fixed procedural set
    double scale = 1.0;  // framing jitter (references only)
    // hair
    std::array<double, 3> hair_color{0.2, 0.1, 0.05};
    double hair_len = 0.4;      // fringe depth fraction
    double hair_curl = 0.5;     // fringe waviness
    double hair_coverage = 1.0; // 0 renders the bald variant
    uint64_t seed = 0;          // identity tag, recorded in spec files
};

struct ForgeConfig {
    int image_size = 32;
    double arc = 2.0944;           // full azimuth sweep, radians (~120 deg)
    double polar_max = 0.7853981;  // |polar| bound (~45 deg)
    int backgrounds = kBackgroundCount;  // ids drawn from [0, backgrounds)
};

struct RenderOut {
    Tensor image;      // [3,S,S], values on the 8-bit grid
    Tensor hair_mask;  // [1,S,S], exact {0,1}
    Tensor face_mask;  // [1,S,S], exact {0,1}, disjoint from hair
};

// Pose-dependent raster of one avatar. Deterministic; throws param_error
// when the pose leaves the configured range.
RenderOut render_avatar(const AvatarSpec& spec, const CameraPose& pose,
                        const ForgeConfig& fc = {});

// Hair mask alone, for predicting where a donor hairstyle lands on any head.
Tensor hair_mask_for(const AvatarSpec& hair_donor, const CameraPose& pose,
                     const ForgeConfig& fc = {});

// One of the fixed procedural backgrounds (id in [0, kBackgroundCount)).
Tensor make_background(int id, int size);

// mask ? source : background, pixel-exact.
Tensor composite_augment(const Tensor& source, const Tensor& mask, const Tensor& background);

// K poses sweeping the configured arc uniformly at polar 0.
std::vector<CameraPose> arc_poses(int K, const ForgeConfig& fc = {});

struct MultiView {
    std::vector<RenderOut> source;
    std::vector<RenderOut> bald;
    std::vector<CameraPose> poses;
};

// Pose-aligned source/bald sequences (bald = same spec at coverage 0).
MultiView make_multiview(const AvatarSpec& spec, int K, const ForgeConfig& fc = {});

// Fresh identity with randomized colors, geometry, hair and background.
AvatarSpec random_spec(Rng& rng, const ForgeConfig& fc = {});

// n identity/background resamples sharing spec's hair block, with scale
// jitter; pairwise-distinct skin colors.
std::vector<AvatarSpec> make_reference_specs(const AvatarSpec& spec, int n, Rng& rng);

// Spec (de)serialization as `key = value` text, exact double round-trip.
void save_spec(const std::string& path, const AvatarSpec& spec);
AvatarSpec load_spec(const std::string& path);

// Pose sidecar format: one "index polar azimuth" line per frame.
void save_poses(const std::string& path, const std::vector<CameraPose>& poses);
std::vector<CameraPose> load_poses(const std::string& path);

struct BuildOpts {
    std::string out_dir;
    int identities = 8;
    int views = kDefaultViews;
    int refs = kDefaultRefs;
    uint64_t seed = 0;
    ForgeConfig fc;
};

struct BuildSummary {
    int identities = 0;
    int files = 0;
    uint64_t manifest_hash = 0;
    bool manifest_identical = false;  // rebuild matched an existing manifest
};

// Writes `<root>/<identity>/{source,bald,ref,masks}/...`, per-identity
// poses.txt and spec.txt, and a checksummed manifest.txt with the
// deterministic train/val/test split.
BuildSummary build_dataset(const BuildOpts& opts);

// Re-hashes every manifest entry; returns human-readable problems, empty
// when the tree is intact.
std::vector<std::string> verify_dataset(const std::string& root);

struct IdentityData {
    AvatarSpec spec;
    std::vector<Tensor> source, bald, hair_mask, face_mask;
    std::vector<CameraPose> poses;
    std::vector<Tensor> refs;
};

struct LoadedDataset {
    std::vector<IdentityData> ids;
    std::vector<int> train, val, test;  // identity indices
    int views = 0;
    int image_size = 0;
};

LoadedDataset load_dataset(const std::string& root);

}  // namespace mvht
