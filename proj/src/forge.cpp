// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/forge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mvht/common.hpp"
#include "mvht/image.hpp"

namespace fs = std::filesystem;

namespace mvht {

namespace {

// Scene layout constants. Hair geometry deliberately shares nothing with the
// face-geometry fields of AvatarSpec.
constexpr double kHeadCy = 0.56;
constexpr double kHeadRx = 0.30;
constexpr double kHeadRy = 0.36;
// Hair is sized to dominate the canvas so that hair appearance carries a
// large share of the image signal the transfer pathway must supply, and the
// remaining features are low-frequency enough for a small denoiser to nail.
constexpr double kHairRx = 0.46;
constexpr double kHairRy = 0.50;
constexpr double kHairLift = 0.02;     // hair ellipse sits above head center
constexpr double kHeadShift = 0.06;    // head parallax per sin(azimuth)
constexpr double kFeatShift = 0.14;    // feature parallax per sin(azimuth)
constexpr double kPolarShift = 0.05;
constexpr double kFringeBase = 0.48;   // fringe depth at hair_len 0
constexpr double kFringeLen = 0.20;    // extra depth per unit hair_len
constexpr double kCurlAmp = 0.035;     // fringe wave amplitude per unit curl
constexpr double kCurlFreq = 7.0;
constexpr double kCurlPhase = 2.2;     // wave phase sweep per radian azimuth
constexpr double kEyeR = 0.06;
constexpr double kMouthRx = 0.12;
constexpr double kMouthRy = 0.05;
constexpr uint64_t kBackgroundFamilySeed = 1001;

double signed_azimuth(double azimuth) { return std::atan2(std::sin(azimuth), std::cos(azimuth)); }

void check_pose(const CameraPose& pose, const ForgeConfig& fc) {
    double s = signed_azimuth(pose.azimuth);
    if (std::abs(s) > fc.arc / 2.0 + 1e-9)
        throw param_error("render_avatar: azimuth outside the configured arc");
    if (std::abs(pose.polar) > fc.polar_max + 1e-9)
        throw param_error("render_avatar: polar out of range");
}

struct Scene {
    double s;             // signed azimuth
    double cxh, cyh;      // head center
    double rxh, ryh;      // head radii
    double cxr, cyr;      // hair ellipse center
    double rxr, ryr;      // hair radii
};

Scene scene_for(const AvatarSpec& spec, const CameraPose& pose) {
    Scene sc;
    sc.s = signed_azimuth(pose.azimuth);
    double dx = kHeadShift * std::sin(sc.s);
    double dy = kPolarShift * std::sin(pose.polar);
    sc.cxh = 0.5 + dx;
    sc.cyh = kHeadCy + dy;
    sc.rxh = kHeadRx * spec.face_aspect * spec.scale;
    sc.ryh = kHeadRy * spec.scale;
    sc.cxr = 0.5 + dx;
    sc.cyr = kHeadCy + dy - kHairLift * spec.scale;
    sc.rxr = kHairRx * spec.scale;
    sc.ryr = kHairRy * spec.scale;
    return sc;
}

bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
    double u = (x - cx) / rx, v = (y - cy) / ry;
    return u * u + v * v <= 1.0;
}

bool hair_at(const AvatarSpec& spec, const Scene& sc, double x, double y) {
    if (spec.hair_coverage <= 0.0) return false;
    if (!in_ellipse(x, y, sc.cxr, sc.cyr, sc.rxr, sc.ryr)) return false;
    double wave = kCurlAmp * spec.hair_curl *
                  std::sin(kCurlFreq * (x - sc.cxr) / sc.rxr + kCurlPhase * sc.s);
    double depth =
        spec.hair_coverage * (kFringeBase + kFringeLen * spec.hair_len + wave) * 2.0 * sc.ryr;
    return y <= sc.cyr - sc.ryr + depth;
}

}  // namespace

Tensor make_background(int id, int size) {
    if (id < 0 || id >= kBackgroundCount) throw param_error("make_background: id out of range");
    if (size < 1) throw param_error("make_background: bad size");
    Rng rng(child_seed(kBackgroundFamilySeed, "bg." + std::to_string(id)));
    // Four random corner colors, bilinearly interpolated then snapped to the
    // 8-bit grid.
    double corner[4][3];
    for (auto& c : corner)
        for (double& v : c) v = static_cast<double>(rng.uniform_int(256)) / 255.0;
    Tensor out({3, size, size});
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double fx = (x + 0.5) / size, fy = (y + 0.5) / size;
            for (int c = 0; c < 3; ++c) {
                double top = corner[0][c] * (1 - fx) + corner[1][c] * fx;
                double bot = corner[2][c] * (1 - fx) + corner[3][c] * fx;
                out.at3(c, y, x) = quantize8(top * (1 - fy) + bot * fy);
            }
        }
    return out;
}

RenderOut render_avatar(const AvatarSpec& spec, const CameraPose& pose, const ForgeConfig& fc) {
    check_pose(pose, fc);
    int S = fc.image_size;
    Scene sc = scene_for(spec, pose);
    double dxf = kFeatShift * std::sin(sc.s);
    double dyf = 0.4 * kPolarShift * std::sin(pose.polar);
    double eye_span = spec.eye_dx * std::cos(sc.s) * spec.scale;
    double ey = sc.cyh + (spec.eye_y - kHeadCy) * spec.scale + dyf;
    double my = sc.cyh + (spec.mouth_y - kHeadCy) * spec.scale + dyf;
    double ex_l = sc.cxh + dxf - eye_span;
    double ex_r = sc.cxh + dxf + eye_span;
    double mx = sc.cxh + dxf;

    RenderOut out;
    out.image = make_background(spec.background, S);
    out.hair_mask = Tensor::zeros({1, S, S});
    out.face_mask = Tensor::zeros({1, S, S});

    std::array<double, 3> skin{}, feat{}, hair{};
    for (int c = 0; c < 3; ++c) {
        skin[static_cast<size_t>(c)] = quantize8(spec.skin[static_cast<size_t>(c)]);
        feat[static_cast<size_t>(c)] = quantize8(spec.feature[static_cast<size_t>(c)]);
        hair[static_cast<size_t>(c)] = quantize8(spec.hair_color[static_cast<size_t>(c)]);
    }

    for (int yi = 0; yi < S; ++yi)
        for (int xi = 0; xi < S; ++xi) {
            double x = (xi + 0.5) / S, y = (yi + 0.5) / S;
            bool hair_px = hair_at(spec, sc, x, y);
            bool head_px = in_ellipse(x, y, sc.cxh, sc.cyh, sc.rxh, sc.ryh);
            if (hair_px) {
                out.hair_mask.at3(0, yi, xi) = 1.0;
                for (int c = 0; c < 3; ++c)
                    out.image.at3(c, yi, xi) = hair[static_cast<size_t>(c)];
                continue;
            }
            if (!head_px) continue;
            out.face_mask.at3(0, yi, xi) = 1.0;
            bool feature_px = in_ellipse(x, y, ex_l, ey, kEyeR * spec.scale, kEyeR * spec.scale) ||
                              in_ellipse(x, y, ex_r, ey, kEyeR * spec.scale, kEyeR * spec.scale) ||
                              in_ellipse(x, y, mx, my, kMouthRx * spec.scale,
                                         kMouthRy * spec.scale);
            const auto& col = feature_px ? feat : skin;
            for (int c = 0; c < 3; ++c) out.image.at3(c, yi, xi) = col[static_cast<size_t>(c)];
        }
    return out;
}

Tensor hair_mask_for(const AvatarSpec& hair_donor, const CameraPose& pose,
                     const ForgeConfig& fc) {
    check_pose(pose, fc);
    int S = fc.image_size;
    Scene sc = scene_for(hair_donor, pose);
    Tensor m = Tensor::zeros({1, S, S});
    for (int yi = 0; yi < S; ++yi)
        for (int xi = 0; xi < S; ++xi)
            if (hair_at(hair_donor, sc, (xi + 0.5) / S, (yi + 0.5) / S)) m.at3(0, yi, xi) = 1.0;
    return m;
}

Tensor composite_augment(const Tensor& source, const Tensor& mask, const Tensor& background) {
    if (!source.same_shape(background))
        throw param_error("composite_augment: source/background size mismatch");
    if (source.rank() != 3 || mask.rank() != 3 || mask.dim(0) != 1 ||
        mask.dim(1) != source.dim(1) || mask.dim(2) != source.dim(2))
        throw param_error("composite_augment: mask size mismatch");
    for (double v : mask.data)
        if (v != 0.0 && v != 1.0) throw param_error("composite_augment: mask must be binary");
    Tensor out = source;
    int C = source.dim(0), H = source.dim(1), W = source.dim(2);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (mask.at3(0, y, x) == 0.0)
                for (int c = 0; c < C; ++c) out.at3(c, y, x) = background.at3(c, y, x);
    return out;
}

std::vector<CameraPose> arc_poses(int K, const ForgeConfig& fc) {
    if (K < 1) throw param_error("arc_poses: K must be >= 1");
    std::vector<CameraPose> poses(static_cast<size_t>(K));
    for (int i = 0; i < K; ++i) {
        double a = K == 1 ? 0.0 : -fc.arc / 2.0 + fc.arc * i / (K - 1);
        if (a < 0) a += 2.0 * 3.14159265358979323846;
        poses[static_cast<size_t>(i)].azimuth = a;
    }
    return poses;
}

MultiView make_multiview(const AvatarSpec& spec, int K, const ForgeConfig& fc) {
    MultiView mv;
    mv.poses = arc_poses(K, fc);
    AvatarSpec bald = spec;
    bald.hair_coverage = 0.0;
    for (const auto& pose : mv.poses) {
        mv.source.push_back(render_avatar(spec, pose, fc));
        mv.bald.push_back(render_avatar(bald, pose, fc));
    }
    return mv;
}

AvatarSpec random_spec(Rng& rng, const ForgeConfig& fc) {
    if (fc.backgrounds < 1 || fc.backgrounds > kBackgroundCount)
        throw param_error("random_spec: backgrounds out of range");
    AvatarSpec s;
    for (double& v : s.skin) v = (120.0 + static_cast<double>(rng.uniform_int(111))) / 255.0;
    for (double& v : s.feature) v = static_cast<double>(rng.uniform_int(90)) / 255.0;
    for (double& v : s.hair_color) v = static_cast<double>(rng.uniform_int(256)) / 255.0;
    s.face_aspect = 0.9 + 0.2 * rng.uniform();
    s.eye_dx = 0.08 + 0.06 * rng.uniform();
    s.eye_y = 0.47 + 0.05 * rng.uniform();
    s.mouth_y = 0.63 + 0.05 * rng.uniform();
    s.background = static_cast<int>(rng.uniform_int(fc.backgrounds));
    s.hair_len = 0.15 + 0.6 * rng.uniform();
    s.hair_curl = rng.uniform();
    s.hair_coverage = 1.0;
    s.scale = 1.0;
    return s;
}

std::vector<AvatarSpec> make_reference_specs(const AvatarSpec& spec, int n, Rng& rng) {
    if (n < 1) throw param_error("make_reference_specs: n must be >= 1");
    std::vector<AvatarSpec> out;
    auto skin_used = [&](const std::array<double, 3>& skin) {
        if (skin == spec.skin) return true;
        for (const auto& r : out)
            if (r.skin == skin) return true;
        return false;
    };
    for (int j = 0; j < n; ++j) {
        AvatarSpec r = random_spec(rng, {});
        // Keep identities pairwise distinct in at least the skin channel.
        int guard = 0;
        while (skin_used(r.skin)) {
            for (double& v : r.skin)
                v = (120.0 + static_cast<double>(rng.uniform_int(111))) / 255.0;
            if (++guard > 10000)
                throw data_error("make_reference_specs: cannot draw distinct identities");
        }
        r.hair_color = spec.hair_color;
        r.hair_len = spec.hair_len;
        r.hair_curl = spec.hair_curl;
        r.hair_coverage = spec.hair_coverage;
        r.seed = spec.seed;
        r.scale = 1.0 + kRefScaleJitter * (2.0 * rng.uniform() - 1.0);
        out.push_back(r);
    }
    return out;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for write: " + path);
    f << text;
    if (!f) throw io_error("write failure: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

uint64_t hash_file(const std::string& path) {
    std::string bytes = read_text(path);
    return fnv1a_str(fnv1a_init(), bytes);
}

std::string frame_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", i);
    return buf;
}

std::string ref_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d", i);
    return buf;
}

}  // namespace

void save_spec(const std::string& path, const AvatarSpec& s) {
    std::ostringstream o;
    o << "skin_r = " << fmt17(s.skin[0]) << "\nskin_g = " << fmt17(s.skin[1])
      << "\nskin_b = " << fmt17(s.skin[2]) << "\nfeature_r = " << fmt17(s.feature[0])
      << "\nfeature_g = " << fmt17(s.feature[1]) << "\nfeature_b = " << fmt17(s.feature[2])
      << "\nface_aspect = " << fmt17(s.face_aspect) << "\neye_dx = " << fmt17(s.eye_dx)
      << "\neye_y = " << fmt17(s.eye_y) << "\nmouth_y = " << fmt17(s.mouth_y)
      << "\nbackground = " << s.background << "\nscale = " << fmt17(s.scale)
      << "\nhair_r = " << fmt17(s.hair_color[0]) << "\nhair_g = " << fmt17(s.hair_color[1])
      << "\nhair_b = " << fmt17(s.hair_color[2]) << "\nhair_len = " << fmt17(s.hair_len)
      << "\nhair_curl = " << fmt17(s.hair_curl)
      << "\nhair_coverage = " << fmt17(s.hair_coverage) << "\nseed = " << s.seed << "\n";
    write_text(path, o.str());
}

AvatarSpec load_spec(const std::string& path) {
    std::istringstream in(read_text(path));
    std::map<std::string, std::string> kv;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        size_t eq = line.find(" = ");
        if (eq == std::string::npos)
            throw data_error(path + ":" + std::to_string(n) + ": expected 'key = value'");
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    auto need = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw data_error(path + ": missing field " + k);
        return it->second;
    };
    AvatarSpec s;
    s.skin = {std::stod(need("skin_r")), std::stod(need("skin_g")), std::stod(need("skin_b"))};
    s.feature = {std::stod(need("feature_r")), std::stod(need("feature_g")),
                 std::stod(need("feature_b"))};
    s.face_aspect = std::stod(need("face_aspect"));
    s.eye_dx = std::stod(need("eye_dx"));
    s.eye_y = std::stod(need("eye_y"));
    s.mouth_y = std::stod(need("mouth_y"));
    s.background = std::stoi(need("background"));
    s.scale = std::stod(need("scale"));
    s.hair_color = {std::stod(need("hair_r")), std::stod(need("hair_g")),
                    std::stod(need("hair_b"))};
    s.hair_len = std::stod(need("hair_len"));
    s.hair_curl = std::stod(need("hair_curl"));
    s.hair_coverage = std::stod(need("hair_coverage"));
    s.seed = std::stoull(need("seed"));
    return s;
}

void save_poses(const std::string& path, const std::vector<CameraPose>& poses) {
    std::ostringstream o;
    for (size_t i = 0; i < poses.size(); ++i)
        o << i << " " << fmt17(poses[i].polar) << " " << fmt17(poses[i].azimuth) << "\n";
    write_text(path, o.str());
}

std::vector<CameraPose> load_poses(const std::string& path) {
    std::istringstream in(read_text(path));
    std::vector<CameraPose> poses;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        std::istringstream ls(line);
        long long idx;
        CameraPose p;
        if (!(ls >> idx >> p.polar >> p.azimuth) || idx != static_cast<long long>(poses.size()))
            throw data_error(path + ":" + std::to_string(n) +
                             ": expected 'index polar azimuth'");
        poses.push_back(p);
    }
    return poses;
}

BuildSummary build_dataset(const BuildOpts& opts) {
    if (opts.identities < 1) throw param_error("build_dataset: identities must be >= 1");
    if (opts.views < 1) throw param_error("build_dataset: views must be >= 1");
    if (opts.refs < 1) throw param_error("build_dataset: refs must be >= 1");
    fs::path root(opts.out_dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw io_error("build_dataset: cannot create " + opts.out_dir);

    std::string old_manifest;
    if (fs::exists(root / "manifest.txt")) old_manifest = read_text((root / "manifest.txt").string());

    std::vector<std::string> file_lines;
    auto emit = [&](const fs::path& p, const std::string& rel) {
        file_lines.push_back("file " + rel + " " + hex64(hash_file(p.string())));
    };

    BuildSummary sum;
    sum.identities = opts.identities;
    for (int i = 0; i < opts.identities; ++i) {
        std::string id = "id" + frame_name(i);
        fs::path base = root / id;
        for (const char* sub : {"source", "bald", "ref", "masks"})
            fs::create_directories(base / sub);

        Rng rng(child_seed(opts.seed, "identity." + std::to_string(i)));
        AvatarSpec spec = random_spec(rng, opts.fc);
        spec.seed = child_seed(opts.seed, "identity." + std::to_string(i));
        MultiView mv = make_multiview(spec, opts.views, opts.fc);
        auto ref_specs = make_reference_specs(spec, opts.refs, rng);

        for (int k = 0; k < opts.views; ++k) {
            std::string f = frame_name(k);
            write_png((base / "source" / (f + ".png")).string(), mv.source[static_cast<size_t>(k)].image);
            write_png((base / "bald" / (f + ".png")).string(), mv.bald[static_cast<size_t>(k)].image);
            write_png((base / "masks" / (f + "_hair.png")).string(),
                      mv.source[static_cast<size_t>(k)].hair_mask);
            write_png((base / "masks" / (f + "_face.png")).string(),
                      mv.source[static_cast<size_t>(k)].face_mask);
            emit(base / "source" / (f + ".png"), id + "/source/" + f + ".png");
            emit(base / "bald" / (f + ".png"), id + "/bald/" + f + ".png");
            emit(base / "masks" / (f + "_hair.png"), id + "/masks/" + f + "_hair.png");
            emit(base / "masks" / (f + "_face.png"), id + "/masks/" + f + "_face.png");
        }
        for (int j = 0; j < opts.refs; ++j) {
            RenderOut r = render_avatar(ref_specs[static_cast<size_t>(j)], CameraPose{}, opts.fc);
            std::string f = ref_name(j);
            write_png((base / "ref" / (f + ".png")).string(), r.image);
            emit(base / "ref" / (f + ".png"), id + "/ref/" + f + ".png");
        }
        save_poses((base / "poses.txt").string(), mv.poses);
        save_spec((base / "spec.txt").string(), spec);
        emit(base / "poses.txt", id + "/poses.txt");
        emit(base / "spec.txt", id + "/spec.txt");
    }

    // Deterministic identity split: shuffle, then carve test/val off the end.
    std::vector<int> order(static_cast<size_t>(opts.identities));
    for (int i = 0; i < opts.identities; ++i) order[static_cast<size_t>(i)] = i;
    Rng split_rng(child_seed(opts.seed, "split"));
    for (int i = opts.identities - 1; i > 0; --i)
        std::swap(order[static_cast<size_t>(i)],
                  order[static_cast<size_t>(split_rng.uniform_int(i + 1))]);
    int n = opts.identities;
    int n_test = n >= 2 ? std::max(1, n / 8) : 0;
    int n_val = n >= 5 ? std::max(1, n / 8) : 0;
    std::vector<int> train(order.begin(), order.begin() + (n - n_test - n_val));
    std::vector<int> val(order.begin() + (n - n_test - n_val), order.begin() + (n - n_test));
    std::vector<int> test(order.begin() + (n - n_test), order.end());
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    std::sort(test.begin(), test.end());

    auto join = [](const std::vector<int>& v) {
        std::string s;
        for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    std::ostringstream m;
    m << "# mvht dataset v1\n";
    m << "seed = " << opts.seed << "\n";
    m << "identities = " << opts.identities << "\n";
    m << "views = " << opts.views << "\n";
    m << "refs = " << opts.refs << "\n";
    m << "image_size = " << opts.fc.image_size << "\n";
    m << "arc = " << fmt17(opts.fc.arc) << "\n";
    m << "split_train = " << join(train) << "\n";
    m << "split_val = " << join(val) << "\n";
    m << "split_test = " << join(test) << "\n";
    for (const auto& l : file_lines) m << l << "\n";
    std::string manifest = m.str();
    write_text((root / "manifest.txt").string(), manifest);

    sum.files = static_cast<int>(file_lines.size()) + 1;
    sum.manifest_hash = fnv1a_str(fnv1a_init(), manifest);
    sum.manifest_identical = !old_manifest.empty() && old_manifest == manifest;
    return sum;
}

namespace {

std::map<std::string, std::string> parse_manifest_header(const std::string& root,
                                                         std::vector<std::string>* files) {
    std::istringstream in(read_text((fs::path(root) / "manifest.txt").string()));
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("file ", 0) == 0) {
            if (files) files->push_back(line.substr(5));
            continue;
        }
        size_t eq = line.find(" = ");
        if (eq == std::string::npos) throw data_error("manifest.txt: malformed line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return kv;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    if (s.empty()) return out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

}  // namespace

std::vector<std::string> verify_dataset(const std::string& root) {
    std::vector<std::string> files;
    parse_manifest_header(root, &files);
    std::vector<std::string> problems;
    for (const auto& entry : files) {
        size_t sp = entry.rfind(' ');
        if (sp == std::string::npos) {
            problems.push_back("malformed manifest entry: " + entry);
            continue;
        }
        std::string rel = entry.substr(0, sp), want = entry.substr(sp + 1);
        fs::path p = fs::path(root) / rel;
        if (!fs::exists(p)) {
            problems.push_back("missing: " + rel);
            continue;
        }
        if (hex64(hash_file(p.string())) != want) problems.push_back("checksum mismatch: " + rel);
    }
    return problems;
}

LoadedDataset load_dataset(const std::string& root) {
    auto kv = parse_manifest_header(root, nullptr);
    auto need = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw data_error("manifest.txt: missing field " + k);
        return it->second;
    };
    LoadedDataset d;
    int identities = std::stoi(need("identities"));
    d.views = std::stoi(need("views"));
    d.image_size = std::stoi(need("image_size"));
    int refs = std::stoi(need("refs"));
    d.train = parse_int_list(need("split_train"));
    d.val = parse_int_list(need("split_val"));
    d.test = parse_int_list(need("split_test"));

    for (int i = 0; i < identities; ++i) {
        fs::path base = fs::path(root) / ("id" + frame_name(i));
        IdentityData id;
        id.spec = load_spec((base / "spec.txt").string());
        id.poses = load_poses((base / "poses.txt").string());
        if (static_cast<int>(id.poses.size()) != d.views)
            throw data_error("load_dataset: pose count mismatch in " + base.string());
        for (int k = 0; k < d.views; ++k) {
            std::string f = frame_name(k);
            id.source.push_back(read_png((base / "source" / (f + ".png")).string()));
            id.bald.push_back(read_png((base / "bald" / (f + ".png")).string()));
            id.hair_mask.push_back(read_png((base / "masks" / (f + "_hair.png")).string()));
            id.face_mask.push_back(read_png((base / "masks" / (f + "_face.png")).string()));
        }
        for (int j = 0; j < refs; ++j)
            id.refs.push_back(read_png((base / "ref" / (ref_name(j) + ".png")).string()));
        d.ids.push_back(std::move(id));
    }
    return d;
}

}  // namespace mvht
