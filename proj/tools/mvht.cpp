// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset forging, staged training, hair-transfer
// inference, and evaluation, driven by `key = value` config files with flag
// overrides. Every run prints a header with version, config hash and seed.
// Exit codes: 0 success, 1 unexpected failure, 2 bad parameter/config,
// 3 missing prerequisite (stage order, checkpoints), 4 io/data failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvht/common.hpp"
#include "mvht/config.hpp"
#include "mvht/forge.hpp"
#include "mvht/image.hpp"
#include "mvht/infer.hpp"
#include "mvht/metrics.hpp"
#include "mvht/model.hpp"
#include "mvht/train.hpp"

namespace fs = std::filesystem;

namespace {

using namespace mvht;

// All relative paths hang off --root; absolute paths pass through.
std::string rooted(const std::string& root, const std::string& p) {
    fs::path q(p);
    if (q.is_absolute()) return p;
    return (fs::path(root) / q).lexically_normal().string();
}

std::string run_header(const Config& cfg) {
    return std::string(kVersion) + " config=" + hex64(cfg.hash()) + " seed=" + cfg.gets("seed");
}

// defaults -> optional file -> flag overrides, in that order.
Config load_config(const std::string& root, const std::string& config_path,
                   const std::map<std::string, std::string>& overrides) {
    Config cfg = config_path.empty() ? Config::defaults() : Config::from_file(rooted(root, config_path));
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    return cfg;
}

void ensure_parent_dir(const std::string& path) {
    fs::path parent = fs::path(path).parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw io_error("cannot create directory " + parent.string());
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw io_error("cannot create directory " + path);
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string frame_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d.png", i);
    return buf;
}

ForgeConfig forge_config_of(const Config& cfg) {
    ForgeConfig fc;
    fc.image_size = cfg.geti("image_size");
    fc.arc = cfg.getd("arc");
    fc.polar_max = cfg.getd("polar_max");
    fc.backgrounds = cfg.geti("backgrounds");
    return fc;
}

// ---------------------------------------------------------------- forge --

struct ForgeArgs {
    std::string root = ".", config, out = "data";
    std::map<std::string, std::string> ov;
};

void run_forge(const ForgeArgs& a) {
    Config cfg = load_config(a.root, a.config, a.ov);
    std::cout << "# " << run_header(cfg) << "\n";

    BuildOpts opts;
    opts.out_dir = rooted(a.root, a.out);
    opts.identities = cfg.geti("identities");
    opts.views = cfg.geti("views");
    opts.refs = cfg.geti("refs");
    opts.seed = cfg.getu("seed");
    opts.fc = forge_config_of(cfg);

    BuildSummary s = build_dataset(opts);
    std::cout << "forge: " << s.identities << " identities, " << opts.views << " views, "
              << opts.refs << " refs, " << s.files << " files -> " << a.out << "\n";
    std::cout << "manifest: " << hex64(s.manifest_hash)
              << (s.manifest_identical ? " (manifest identical)" : "") << "\n";
}

// ---------------------------------------------------------------- train --

struct TrainArgs {
    std::string root = ".", config, stage, data = "data", resume, out, loss_csv;
    std::string steps, k;  // stage-dependent keys, applied after parsing
    std::map<std::string, std::string> ov;
};

void run_train(const TrainArgs& a) {
    Stage st = stage_from_string(a.stage);
    Config cfg = load_config(a.root, a.config, a.ov);
    if (!a.steps.empty()) cfg.set("steps_" + a.stage, a.steps);
    if (!a.k.empty()) cfg.set("seq_len", a.k);
    std::cout << "# " << run_header(cfg) << "\n";

    StageConfig sc;
    sc.stage = st;
    sc.steps = cfg.geti("steps_" + a.stage);
    sc.batch = cfg.geti("batch");
    sc.lr = cfg.getd("lr");
    sc.k = cfg.geti("seq_len");
    sc.dropout = cfg.getd("dropout");
    sc.seed = cfg.getu("seed");
    sc.s3_bald_shared = cfg.getb("s3_bald_shared");
    sc.pose_noise_sigma = cfg.getd("pose_noise_sigma");

    LoadedDataset data = load_dataset(rooted(a.root, a.data));

    ModelBundle bundle =
        a.resume.empty()
            ? make_bundle(cfg.model_config(), cfg.getu("model_seed"), cfg.getu("codec_seed"),
                          cfg.geti("schedule_t"), cfg.getd("beta_start"), cfg.getd("beta_end"))
            : load_bundle(rooted(a.root, a.resume));

    std::cout << "train " << a.stage << ": steps " << sc.steps << ", batch "
              << (st == Stage::s3 ? sc.k : sc.batch) << ", lr " << fmt6(sc.lr)
              << (st == Stage::s3 ? ", k " + std::to_string(sc.k) : "") << "\n";

    TrainReport rep;
    bundle = train_stage(std::move(bundle), data, sc, &rep);

    std::string joined;
    for (const auto& ns : rep.trainable) joined += (joined.empty() ? "" : " ") + ns;
    std::cout << "trainable: " << joined << "\n";
    bool frozen_ok = true;
    for (const auto& ns : rep.frozen) {
        const bool intact = rep.checksum_before.at(ns) == rep.checksum_after.at(ns) &&
                            rep.frozen_grad_norm_max.at(ns) == 0.0;
        frozen_ok = frozen_ok && intact;
        std::cout << "frozen " << ns << " grad_norm_max " << fmt6(rep.frozen_grad_norm_max.at(ns))
                  << " checksum " << hex64(rep.checksum_before.at(ns)) << " -> "
                  << hex64(rep.checksum_after.at(ns)) << (intact ? " intact" : " VIOLATED") << "\n";
    }

    const size_t n = rep.loss.size();
    const size_t w = std::min<size_t>(10, n);
    double lead = 0, trail = 0;
    for (size_t i = 0; i < w; ++i) {
        lead += rep.loss[i] / static_cast<double>(w);
        trail += rep.loss[n - 1 - i] / static_cast<double>(w);
    }
    std::cout << "loss: leading-" << w << " mean " << fmt6(lead) << ", trailing-" << w << " mean "
              << fmt6(trail) << "\n";

    std::string out = a.out.empty() ? "ckpt/" + a.stage + ".bin" : a.out;
    std::string csv = a.loss_csv.empty() ? "ckpt/" + a.stage + "_loss.csv" : a.loss_csv;
    out = rooted(a.root, out);
    csv = rooted(a.root, csv);
    ensure_parent_dir(out);
    ensure_parent_dir(csv);
    save_bundle(out, bundle);
    write_loss_csv(csv, rep.loss, run_header(cfg) + " stage=" + a.stage);
    std::cout << "checkpoint: " << out << " (stage " << bundle.stage << ")\n";
    std::cout << "loss_csv: " << csv << "\n";

    if (!frozen_ok) throw std::runtime_error("freeze contract violated; see report above");
}

// ---------------------------------------------------------------- infer --

struct InferArgs {
    std::string root = ".", config, source, reference, ckpt, bald_ckpt, gt_bald;
    std::string poses, out = "out";
    double source_polar = 0.0, source_azimuth = 0.0;
    bool no_temporal = false, sheet = false;
    std::map<std::string, std::string> ov;
};

Tensor contact_sheet(const std::vector<Tensor>& frames) {
    const int C = frames[0].dim(0), H = frames[0].dim(1), W = frames[0].dim(2);
    const int K = static_cast<int>(frames.size());
    Tensor strip({C, H, W * K});
    for (int k = 0; k < K; ++k)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) strip.at3(c, y, k * W + x) = frames[k].at3(c, y, x);
    return strip;
}

void run_infer(const InferArgs& a) {
    Config cfg = load_config(a.root, a.config, a.ov);
    std::cout << "# " << run_header(cfg) << "\n";

    SampleOpts so;
    so.steps = cfg.geti("ddim_steps");
    so.cfg_scale = cfg.getd("cfg_scale");
    so.seed = cfg.getu("seed");

    ModelBundle main_bundle = load_bundle(rooted(a.root, a.ckpt));
    Tensor source = read_png(rooted(a.root, a.source));
    Tensor reference = read_png(rooted(a.root, a.reference));

    Tensor bald;
    if (!a.gt_bald.empty()) {
        bald = read_png(rooted(a.root, a.gt_bald));
        std::cout << "bald proxy: " << a.gt_bald << " (ground truth)\n";
    } else if (!a.bald_ckpt.empty()) {
        ModelBundle bc = load_bundle(rooted(a.root, a.bald_ckpt));
        CameraPose src_pose{a.source_polar, a.source_azimuth, 0.0};
        bald = bald_convert(bc, source, src_pose, so);
        std::cout << "bald proxy: converted from " << a.source << "\n";
    } else {
        throw param_error("infer: provide --bald-ckpt or --gt-bald");
    }

    std::vector<CameraPose> poses = a.poses.empty()
                                        ? arc_poses(cfg.geti("views"), forge_config_of(cfg))
                                        : load_poses(rooted(a.root, a.poses));
    // A single frame never runs the joint sampler, so frame 0 is identical
    // across --views values under the per-frame seed policy.
    const bool temporal = !a.no_temporal && poses.size() > 1;

    FrameSequence seq = transfer_multi_view(main_bundle, bald, reference, poses, so, temporal);

    std::string out_dir = rooted(a.root, a.out);
    ensure_dir(out_dir);
    for (size_t i = 0; i < seq.frames.size(); ++i)
        write_png((fs::path(out_dir) / frame_name(static_cast<int>(i))).string(), seq.frames[i]);
    save_poses((fs::path(out_dir) / "poses.txt").string(), seq.poses);
    write_png((fs::path(out_dir) / "bald.png").string(), bald);
    if (a.sheet) write_png((fs::path(out_dir) / "sheet.png").string(), contact_sheet(seq.frames));

    std::cout << "infer: " << seq.frames.size() << " frames -> " << a.out << " (temporal "
              << (temporal ? "on" : "off") << ", steps " << so.steps << ", cfg "
              << fmt6(so.cfg_scale) << ")\n";
}

// ----------------------------------------------------------------- eval --

struct EvalArgs {
    std::string root = ".", config, generated, target, ablation_b, masks, manifest;
    std::string out = "report.csv";
    std::map<std::string, std::string> ov;
};

// Numbered frame files only, so sidecars (poses.txt, bald.png, sheet.png)
// in an inference output dir do not join the aligned set.
std::vector<std::string> frame_files(const std::string& dir) {
    if (!fs::is_directory(dir)) throw io_error("eval: not a directory: " + dir);
    static const std::regex pat("[0-9]+\\.png");
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && std::regex_match(e.path().filename().string(), pat))
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

std::vector<std::string> aligned_names(const std::string& dir_a, const std::string& dir_b) {
    auto na = frame_files(dir_a);
    auto nb = frame_files(dir_b);
    if (na == nb) return na;
    std::set<std::string> sa(na.begin(), na.end()), sb(nb.begin(), nb.end());
    std::string msg = "eval: misaligned sets";
    for (const auto& n : sa)
        if (!sb.count(n)) msg += "\n  missing in " + dir_b + ": " + n;
    for (const auto& n : sb)
        if (!sa.count(n)) msg += "\n  missing in " + dir_a + ": " + n;
    throw data_error(msg);
}

Tensor mask_for(const EvalArgs& a, const std::string& name, int H, int W) {
    if (a.masks.empty()) return Tensor::full({1, H, W}, 1.0);
    Tensor m = read_png((fs::path(rooted(a.root, a.masks)) / name).string());
    if (m.dim(0) != 1) throw data_error("eval: mask " + name + " is not grayscale");
    return m;
}

std::string csv_label(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c == ',') c = ';';
    return out;
}

void run_eval(const EvalArgs& a) {
    Config cfg = load_config(a.root, a.config, a.ov);
    std::cout << "# " << run_header(cfg) << "\n";

    if (!a.manifest.empty()) {
        fs::path mp(rooted(a.root, a.manifest));
        std::string ds_root = fs::is_directory(mp) ? mp.string() : mp.parent_path().string();
        auto problems = verify_dataset(ds_root);
        if (!problems.empty()) {
            std::string msg = "eval: dataset failed verification";
            for (const auto& p : problems) msg += "\n  " + p;
            throw data_error(msg);
        }
        std::cout << "dataset verified: " << ds_root << "\n";
    }

    std::vector<std::pair<std::string, std::pair<double, std::string>>> rows;  // metric,(value,set)
    Embedder embed = toy_embedder();
    const std::string gen_dir = rooted(a.root, a.generated);

    if (!a.ablation_b.empty()) {
        // Ablation: each dir is one frame sequence; report smoothness per dir.
        const std::string b_dir = rooted(a.root, a.ablation_b);
        for (const auto& [label, dir] : {std::pair{csv_label(a.generated), gen_dir},
                                         std::pair{csv_label(a.ablation_b), b_dir}}) {
            auto names = frame_files(dir);
            if (names.size() < 2) throw data_error("eval: ablation needs >= 2 frames in " + dir);
            std::vector<Tensor> frames, masks;
            for (const auto& n : names) {
                frames.push_back(read_png((fs::path(dir) / n).string()));
                masks.push_back(mask_for(a, n, frames.back().dim(1), frames.back().dim(2)));
            }
            rows.push_back({"temporal_smoothness", {temporal_smoothness_score(frames, masks), label}});
        }
    } else {
        if (a.target.empty()) throw param_error("eval: provide --target or --ablation-b");
        const std::string tgt_dir = rooted(a.root, a.target);
        auto names = aligned_names(gen_dir, tgt_dir);
        if (names.empty()) throw data_error("eval: no frame files in " + gen_dir);
        std::vector<Tensor> gen, tgt;
        double psnr = 0, ssim = 0, sim = 0;
        for (const auto& n : names) {
            gen.push_back(read_png((fs::path(gen_dir) / n).string()));
            tgt.push_back(read_png((fs::path(tgt_dir) / n).string()));
            Tensor mask = mask_for(a, n, gen.back().dim(1), gen.back().dim(2));
            psnr += masked_psnr(gen.back(), tgt.back(), mask) / static_cast<double>(names.size());
            ssim += masked_ssim(gen.back(), tgt.back(), mask) / static_cast<double>(names.size());
            sim += embed_similarity(gen.back(), tgt.back(), embed) / static_cast<double>(names.size());
        }
        const std::string label = csv_label(a.generated) + "_vs_" + csv_label(a.target);
        rows.push_back({"psnr", {psnr, label}});
        rows.push_back({"ssim", {ssim, label}});
        rows.push_back({"embed_similarity", {sim, label}});
        if (gen.size() >= 2) rows.push_back({"frechet", {frechet_distance(gen, tgt, embed), label}});
    }

    std::string out = rooted(a.root, a.out);
    ensure_parent_dir(out);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw io_error("eval: cannot write " + out);
    os << "# " << run_header(cfg) << "\n";
    os << "metric,value,set,config_hash\n";
    for (const auto& [metric, vs] : rows) {
        os << metric << "," << fmt17(vs.first) << "," << vs.second << "," << hex64(cfg.hash())
           << "\n";
        std::cout << metric << " " << vs.second << " = " << fmt6(vs.first) << "\n";
    }
    if (!os) throw io_error("eval: write failed: " + out);
    std::cout << "report: " << out << "\n";
}

// ----------------------------------------------------------------- main --

void bind_override(CLI::App* cmd, std::map<std::string, std::string>& ov, const std::string& flag,
                   const std::string& key, const std::string& desc) {
    cmd->add_option_function<std::string>(
        flag, [&ov, key](const std::string& v) { ov[key] = v; }, desc);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kVersion) + " - multi-view hair transfer toolkit"};
    app.require_subcommand(1);

    ForgeArgs fa;
    TrainArgs ta;
    InferArgs ia;
    EvalArgs ea;
    int rc = 0;

    auto* forge = app.add_subcommand("forge", "Render a synthetic avatar dataset");
    forge->add_option("--root", fa.root, "base directory for relative paths");
    forge->add_option("--config", fa.config, "config file (key = value)");
    forge->add_option("--out", fa.out, "dataset output dir")->capture_default_str();
    bind_override(forge, fa.ov, "--identities", "identities", "identity count");
    bind_override(forge, fa.ov, "--views", "views", "views per identity");
    bind_override(forge, fa.ov, "--refs", "refs", "references per identity");
    bind_override(forge, fa.ov, "--image-size", "image_size", "square image size");
    bind_override(forge, fa.ov, "--backgrounds", "backgrounds", "background pool size");
    bind_override(forge, fa.ov, "--seed", "seed", "dataset seed");
    forge->callback([&] { run_forge(fa); });

    auto* train = app.add_subcommand("train", "Train one stage (bald, s1, s2, s3)");
    train->add_option("stage", ta.stage, "bald | s1 | s2 | s3")->required();
    train->add_option("--root", ta.root, "base directory for relative paths");
    train->add_option("--config", ta.config, "config file (key = value)");
    train->add_option("--data", ta.data, "dataset dir")->capture_default_str();
    train->add_option("--resume", ta.resume, "previous-stage checkpoint (s2, s3)");
    train->add_option("--out", ta.out, "output checkpoint (default ckpt/<stage>.bin)");
    train->add_option("--loss-csv", ta.loss_csv, "loss log (default ckpt/<stage>_loss.csv)");
    train->add_option("--steps", ta.steps, "step count for this stage");
    train->add_option("--k", ta.k, "window length for s3");
    bind_override(train, ta.ov, "--batch", "batch", "batch size");
    bind_override(train, ta.ov, "--lr", "lr", "learning rate");
    bind_override(train, ta.ov, "--dropout", "dropout", "condition dropout rate");
    bind_override(train, ta.ov, "--pose-noise-sigma", "pose_noise_sigma", "pose augmentation sigma");
    bind_override(train, ta.ov, "--seed", "seed", "training seed");
    train->add_flag_callback(
        "--s3-bald-matched", [&ta] { ta.ov["s3_bald_shared"] = "false"; },
        "pose-match the s3 bald condition per target frame instead of sharing "
        "one frame per window");
    train->callback([&] { run_train(ta); });

    auto* infer = app.add_subcommand("infer", "Transfer reference hair onto a source");
    infer->add_option("--root", ia.root, "base directory for relative paths");
    infer->add_option("--config", ia.config, "config file (key = value)");
    infer->add_option("--source", ia.source, "source image (png)")->required();
    infer->add_option("--reference", ia.reference, "reference hair image (png)")->required();
    infer->add_option("--ckpt", ia.ckpt, "transfer checkpoint (stage s2 or s3)")->required();
    infer->add_option("--bald-ckpt", ia.bald_ckpt, "bald-converter checkpoint");
    infer->add_option("--gt-bald", ia.gt_bald, "bald proxy image, bypassing conversion");
    infer->add_option("--poses", ia.poses, "pose sidecar file ('index polar azimuth' lines)");
    bind_override(infer, ia.ov, "--views", "views", "frame count on the standard arc");
    infer->add_option("--source-polar", ia.source_polar, "source capture polar angle")
        ->capture_default_str();
    infer->add_option("--source-azimuth", ia.source_azimuth, "source capture azimuth")
        ->capture_default_str();
    bind_override(infer, ia.ov, "--steps", "ddim_steps", "sampler steps");
    bind_override(infer, ia.ov, "--cfg", "cfg_scale", "guidance scale");
    bind_override(infer, ia.ov, "--seed", "seed", "sampling seed");
    infer->add_flag("--no-temporal", ia.no_temporal, "independent per-frame sampling");
    infer->add_flag("--sheet", ia.sheet, "also write a horizontal contact sheet");
    infer->add_option("--out", ia.out, "output dir")->capture_default_str();
    infer->callback([&] { run_infer(ia); });

    auto* eval = app.add_subcommand("eval", "Score generated frames, or ablate two runs");
    eval->add_option("--root", ea.root, "base directory for relative paths");
    eval->add_option("--config", ea.config, "config file (key = value)");
    eval->add_option("--generated", ea.generated, "generated frame dir")->required();
    eval->add_option("--target", ea.target, "target frame dir to compare against");
    eval->add_option("--ablation-b", ea.ablation_b, "second generated dir (smoothness ablation)");
    eval->add_option("--masks", ea.masks, "mask dir (filenames matching the frames)");
    eval->add_option("--manifest", ea.manifest, "dataset manifest to verify first");
    eval->add_option("--out", ea.out, "report csv path")->capture_default_str();
    bind_override(eval, ea.ov, "--seed", "seed", "header seed");
    eval->callback([&] { run_eval(ea); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    } catch (const param_error& e) {
        std::cerr << "error (parameter): " << e.what() << "\n";
        return 2;
    } catch (const prereq_error& e) {
        std::cerr << "error (prerequisite): " << e.what() << "\n";
        return 3;
    } catch (const io_error& e) {
        std::cerr << "error (io): " << e.what() << "\n";
        return 4;
    } catch (const data_error& e) {
        std::cerr << "error (data): " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
