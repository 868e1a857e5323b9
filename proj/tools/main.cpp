// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synthetic data generation, the
// decode/fuse/suppress/evaluate pipeline, NMS benchmarking, and standalone
// evaluation. Exit codes: 0 success, 2 usage, 3 data format, 4 internal.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <yolokit/yolokit.hpp>

namespace fs = std::filesystem;
using namespace yolokit;

namespace {

// Errors in flag semantics discovered after CLI11 parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                               t0)
        .count();
}

std::pair<int, int> parse_size(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw UsageError("--size must look like WxH, got \"" + s + "\"");
    int w = 0, h = 0;
    try {
        std::size_t pw = 0, ph = 0;
        w = std::stoi(s.substr(0, x), &pw);
        h = std::stoi(s.substr(x + 1), &ph);
        if (pw != x || ph != s.size() - x - 1) throw std::invalid_argument(s);
    } catch (const std::exception&) {
        throw UsageError("--size must look like WxH, got \"" + s + "\"");
    }
    return {w, h};
}

std::vector<int> parse_int_list(const std::string& s, const char* flag) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = std::min(s.find(',', pos), s.size());
        const std::string tok = s.substr(pos, comma - pos);
        try {
            std::size_t used = 0;
            const int v = std::stoi(tok, &used);
            if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw UsageError(std::string(flag) + ": bad entry \"" + tok + "\"");
        }
        pos = comma + 1;
    }
    return out;
}

NmsMethod parse_method(const std::string& s) {
    if (s == "greedy") return NmsMethod::kGreedy;
    if (s == "soft") return NmsMethod::kSoft;
    if (s == "matrix") return NmsMethod::kMatrix;
    throw UsageError("unknown NMS method \"" + s + "\"");
}

std::string tensor_filename(const std::string& image_id, int level) {
    return image_id + "_l" + std::to_string(level) + ".ppyt";
}

nlohmann::json eval_to_json(const EvalResult& r) {
    nlohmann::json j;
    j["map"] = r.map;
    j["ap50"] = r.ap50;
    j["ap75"] = r.ap75;
    j["num_classes"] = r.num_classes;
    j["counts"] = nlohmann::json::array();
    for (const auto& c : r.counts) {
        j["counts"].push_back(
            {{"threshold", c.threshold}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}});
    }
    return j;
}

std::uint64_t detections_digest(const std::vector<Detection>& dets) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& d : dets) {
        mix(static_cast<std::uint64_t>(d.class_id));
        mix(std::bit_cast<std::uint64_t>(d.box.x_min));
        mix(std::bit_cast<std::uint64_t>(d.box.y_min));
        mix(std::bit_cast<std::uint64_t>(d.box.x_max));
        mix(std::bit_cast<std::uint64_t>(d.box.y_max));
        mix(std::bit_cast<std::uint64_t>(d.score));
    }
    return h;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out_dir;
    std::uint64_t seed = 0;
    int images = 8;
    std::string size = "608x608";
    int classes = 20;
    double noise = 0.0;
    int min_objects = 1;
    int max_objects = 8;
    double min_size = 16.0;
    double max_size = 160.0;
    double alpha = 1.05;
    std::string plant = "random";
    std::string iou_aware = "on";
};

int run_synth(const SynthArgs& a) {
    auto [w, h] = parse_size(a.size);
    SynthConfig base;
    base.image_width = w;
    base.image_height = h;
    base.num_classes = a.classes;
    base.min_objects = a.min_objects;
    base.max_objects = a.max_objects;
    base.min_size = a.min_size;
    base.max_size = a.max_size;
    try {
        base.validate();
        DecodeConfig dc;
        dc.alpha = a.alpha;
        dc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (a.images < 0) throw UsageError("--images must be nonnegative");
    if (a.noise < 0) throw UsageError("--noise must be nonnegative");
    const bool boundary = a.plant == "boundary";

    const std::vector<PyramidLevel> levels = default_levels();
    HeadLayout layout;
    layout.num_classes = a.classes;
    layout.anchors_per_cell = static_cast<int>(levels[0].anchors.size());
    layout.iou_aware = a.iou_aware == "on";

    NoiseSpec noise;
    noise.box = a.noise;

    fs::create_directories(a.out_dir);
    PipelineManifest manifest;
    manifest.image_width = w;
    manifest.image_height = h;
    manifest.num_classes = a.classes;
    manifest.iou_aware = layout.iou_aware;
    manifest.alpha = a.alpha;
    manifest.levels = levels;
    manifest.annotations = "annotations.jsonl";

    std::vector<AnnotationRecord> records;
    std::size_t total_objects = 0;
    for (int i = 0; i < a.images; ++i) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "img_%05d", i);
        const std::string image_id = idbuf;

        SynthConfig c = base;
        c.seed = mix_seed(a.seed, static_cast<std::uint64_t>(2 * i));
        const GroundTruthScene scene = boundary ? generate_boundary_scene(c, levels)
                                                : generate_scene(c, &levels);
        const auto heads = render_raw(scene, layout, levels, a.alpha, noise,
                                      mix_seed(a.seed, static_cast<std::uint64_t>(2 * i + 1)));

        ManifestImage mi;
        mi.image_id = image_id;
        for (std::size_t li = 0; li < levels.size(); ++li) {
            const std::string fname = tensor_filename(image_id, levels[li].level);
            write_ppyt(fs::path(a.out_dir) / fname, heads[li]);
            mi.tensors[levels[li].level] = fname;
        }
        manifest.images.push_back(std::move(mi));

        for (const auto& ann : scene.annotations) {
            records.push_back({image_id, ann.box.x_min, ann.box.y_min, ann.box.width(),
                               ann.box.height(), ann.class_id});
        }
        total_objects += scene.annotations.size();
    }

    atomic_write_file(fs::path(a.out_dir) / "annotations.jsonl",
                      serialize_annotation_jsonl(records));
    write_manifest(fs::path(a.out_dir) / "manifest.json", manifest);
    std::cout << "synth: wrote " << a.images << " images, " << total_objects << " objects to "
              << a.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct PipelineArgs {
    std::string in_dir;
    std::string nms = "matrix";
    double alpha = -1.0;  // < 0 means use the manifest value
    std::string iou_aware = "manifest";
    std::string report;
    std::string dets_out;
    double score_threshold = 0.005;
};

int run_pipeline(const PipelineArgs& a) {
    const auto t_total = std::chrono::steady_clock::now();
    auto t0 = std::chrono::steady_clock::now();

    const fs::path in(a.in_dir);
    const PipelineManifest manifest = read_manifest(in / "manifest.json");
    HeadLayout layout = manifest.layout();
    try {
        layout.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    bool use_iou = manifest.iou_aware;
    if (a.iou_aware == "on") {
        if (!manifest.iou_aware) {
            throw UsageError("--iou-aware on: the input tensors carry no such channel");
        }
        use_iou = true;
    } else if (a.iou_aware == "off") {
        use_iou = false;
    }
    DecodeConfig dc;
    dc.alpha = a.alpha >= 0 ? a.alpha : manifest.alpha;
    dc.score_threshold = a.score_threshold;
    try {
        dc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    NmsConfig nms_cfg;
    nms_cfg.method = parse_method(a.nms);

    std::map<std::string, int> id_index;
    for (int i = 0; i < static_cast<int>(manifest.images.size()); ++i) {
        id_index[manifest.images[i].image_id] = i;
    }
    std::vector<GroundTruthScene> scenes(manifest.images.size());
    for (auto& s : scenes) {
        s.width = manifest.image_width;
        s.height = manifest.image_height;
    }
    if (!manifest.annotations.empty()) {
        for (const auto& r : read_annotation_jsonl(in / manifest.annotations)) {
            const auto it = id_index.find(r.image_id);
            if (it == id_index.end()) {
                throw FormatError(manifest.annotations + ": unknown image_id \"" + r.image_id +
                                  "\"");
            }
            if (r.category_id < 0 || r.category_id >= manifest.num_classes) {
                throw FormatError(manifest.annotations + ": category_id out of range");
            }
            scenes[it->second].annotations.push_back(
                {record_box(r.x_min, r.y_min, r.width, r.height), r.category_id});
        }
    }
    std::int64_t ns_load = elapsed_ns(t0);

    std::int64_t ns_decode = 0, ns_nms = 0;
    std::vector<std::vector<Detection>> all_dets(manifest.images.size());
    for (std::size_t im = 0; im < manifest.images.size(); ++im) {
        t0 = std::chrono::steady_clock::now();
        std::vector<FeatureMap> heads;
        std::vector<PyramidLevel> levels;
        for (const auto& lvl : manifest.levels) {
            const auto it = manifest.images[im].tensors.find(lvl.level);
            if (it == manifest.images[im].tensors.end()) {
                throw FormatError("manifest: image " + manifest.images[im].image_id +
                                  " lacks a tensor for level " + std::to_string(lvl.level));
            }
            heads.push_back(read_ppyt_chw(in / it->second));
            levels.push_back(lvl);
        }
        ns_load += elapsed_ns(t0);

        t0 = std::chrono::steady_clock::now();
        std::vector<Detection> dets;
        for (std::size_t li = 0; li < heads.size(); ++li) {
            try {
                auto level_dets = decode_level(heads[li], layout, levels[li], manifest.image_width,
                                               manifest.image_height, dc);
                dets.insert(dets.end(), level_dets.begin(), level_dets.end());
            } catch (const std::invalid_argument& e) {
                throw FormatError(manifest.images[im].tensors.at(levels[li].level) + ": " +
                                  e.what());
            }
        }
        if (!use_iou && layout.iou_aware) {
            for (auto& d : dets) {
                d.iou_pred = 1.0;
                d.score = fuse_scores(d.cls_prob, d.objectness, 1.0);
            }
        }
        ns_decode += elapsed_ns(t0);

        t0 = std::chrono::steady_clock::now();
        all_dets[im] = run_nms(dets, nms_cfg);
        ns_nms += elapsed_ns(t0);
    }

    t0 = std::chrono::steady_clock::now();
    const EvalResult result = evaluate(all_dets, scenes, manifest.num_classes);
    const std::int64_t ns_eval = elapsed_ns(t0);
    const std::int64_t ns_total = elapsed_ns(t_total);

    if (!a.dets_out.empty()) {
        std::vector<DetectionRecord> out;
        for (std::size_t im = 0; im < all_dets.size(); ++im) {
            for (const auto& d : all_dets[im]) {
                out.push_back({manifest.images[im].image_id, d.box.x_min, d.box.y_min,
                               d.box.width(), d.box.height(), d.class_id, d.score});
            }
        }
        atomic_write_file(a.dets_out, serialize_detection_jsonl(out));
    }

    nlohmann::json report = eval_to_json(result);
    report["command"] = "pipeline";
    report["nms_method"] = a.nms;
    report["alpha"] = dc.alpha;
    report["iou_aware"] = use_iou;
    report["num_images"] = manifest.images.size();
    report["timings_ns"] = {{"load", ns_load},
                           {"decode", ns_decode},
                           {"nms", ns_nms},
                           {"eval", ns_eval},
                           {"total", ns_total}};
    atomic_write_file(a.report, report.dump(2) + "\n");

    std::cout << "pipeline: images=" << manifest.images.size() << " nms=" << a.nms
              << " alpha=" << dc.alpha << " mAP=" << result.map << " AP50=" << result.ap50
              << " AP75=" << result.ap75 << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    std::string boxes = "128,512,2048";
    int trials = 5;
    std::string methods = "greedy,soft,matrix";
    std::string csv;
    std::uint64_t seed = 0;
    int classes = 20;
};

int run_bench(const BenchArgs& a) {
    if (a.trials < 1) throw UsageError("--trials must be >= 1");
    if (a.classes < 1) throw UsageError("--classes must be >= 1");
    const std::vector<int> sizes = parse_int_list(a.boxes, "--boxes");
    std::vector<std::string> method_names;
    {
        std::size_t pos = 0;
        while (pos <= a.methods.size()) {
            const auto comma = std::min(a.methods.find(',', pos), a.methods.size());
            method_names.push_back(a.methods.substr(pos, comma - pos));
            parse_method(method_names.back());
            pos = comma + 1;
        }
    }

    std::string csv = "method,n,trial,nanos\n";
    for (int n : sizes) {
        std::mt19937_64 rng(mix_seed(a.seed, static_cast<std::uint64_t>(n)));
        std::vector<Detection> dets;
        dets.reserve(n);
        for (int i = 0; i < n; ++i) {
            const double bw = uniform_in(rng, 8.0, 128.0);
            const double bh = uniform_in(rng, 8.0, 128.0);
            const double x = uniform_in(rng, 0.0, 512.0);
            const double y = uniform_in(rng, 0.0, 512.0);
            const int cls = uniform_int_in(rng, 0, a.classes - 1);
            const double cp = uniform_in(rng, 0.05, 1.0);
            const double ob = uniform_in(rng, 0.05, 1.0);
            dets.push_back(
                {Box{x, y, x + bw, y + bh}, cls, cp, ob, 1.0, fuse_scores(cp, ob, 1.0)});
        }
        for (const auto& name : method_names) {
            NmsConfig cfg;
            cfg.method = parse_method(name);
            std::vector<Detection> kept;
            std::vector<std::int64_t> times;
            for (int trial = 0; trial < a.trials; ++trial) {
                const auto t0 = std::chrono::steady_clock::now();
                kept = run_nms(dets, cfg);
                const std::int64_t ns = elapsed_ns(t0);
                times.push_back(ns);
                csv += name + "," + std::to_string(n) + "," + std::to_string(trial) + "," +
                       std::to_string(ns) + "\n";
            }
            std::sort(times.begin(), times.end());
            std::printf("bench method=%s n=%d kept=%zu digest=%016" PRIx64 " median_ns=%" PRId64
                        "\n",
                        name.c_str(), n, kept.size(), detections_digest(kept),
                        times[times.size() / 2]);
        }
    }
    atomic_write_file(a.csv, csv);
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string dets;
    std::string gts;
    std::string report;
    int classes = 0;  // 0 derives from the files
};

int run_eval(const EvalArgs& a) {
    const auto t_total = std::chrono::steady_clock::now();
    const auto gt_records = read_annotation_jsonl(a.gts);
    const auto det_records = read_detection_jsonl(a.dets);

    std::map<std::string, int> id_index;
    std::vector<std::string> image_ids;
    for (const auto& r : gt_records) {
        if (id_index.emplace(r.image_id, static_cast<int>(image_ids.size())).second) {
            image_ids.push_back(r.image_id);
        }
    }

    int num_classes = a.classes;
    if (num_classes == 0) {
        for (const auto& r : gt_records) num_classes = std::max(num_classes, r.category_id + 1);
        for (const auto& r : det_records) num_classes = std::max(num_classes, r.category_id + 1);
        if (num_classes == 0) num_classes = 1;
    }

    double hull = 1.0;
    std::vector<GroundTruthScene> scenes(image_ids.size());
    std::vector<std::vector<Detection>> dets(image_ids.size());
    for (const auto& r : gt_records) {
        if (r.category_id < 0 || r.category_id >= num_classes) {
            throw FormatError(a.gts + ": category_id out of range");
        }
        scenes[id_index[r.image_id]].annotations.push_back(
            {record_box(r.x_min, r.y_min, r.width, r.height), r.category_id});
        hull = std::max({hull, r.x_min + r.width, r.y_min + r.height});
    }
    for (const auto& r : det_records) {
        const auto it = id_index.find(r.image_id);
        if (it == id_index.end()) {
            throw FormatError(a.dets + ": unknown image_id \"" + r.image_id + "\"");
        }
        if (r.category_id < 0 || r.category_id >= num_classes) {
            throw FormatError(a.dets + ": category_id out of range");
        }
        const Box b = record_box(r.x_min, r.y_min, r.width, r.height);
        dets[it->second].push_back({b, r.category_id, r.score, 1.0, 1.0, r.score});
        hull = std::max({hull, b.x_max, b.y_max});
    }
    const int extent = static_cast<int>(std::ceil(hull));
    for (auto& s : scenes) {
        s.width = extent;
        s.height = extent;
    }

    const EvalResult result = evaluate(dets, scenes, num_classes);
    nlohmann::json report = eval_to_json(result);
    report["command"] = "eval";
    report["num_images"] = image_ids.size();
    report["timings_ns"] = {{"total", elapsed_ns(t_total)}};
    atomic_write_file(a.report, report.dump(2) + "\n");
    std::cout << "eval: images=" << image_ids.size() << " mAP=" << result.map
              << " AP50=" << result.ap50 << " AP75=" << result.ap75 << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"detection head decode / suppress / evaluate toolkit"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "generate a synthetic tensor + annotation set");
    synth->add_option("--out", sa.out_dir, "output directory")->required();
    synth->add_option("--seed", sa.seed, "master seed");
    synth->add_option("--images", sa.images, "number of images");
    synth->add_option("--size", sa.size, "image size WxH (multiples of 32)");
    synth->add_option("--classes", sa.classes, "number of classes");
    synth->add_option("--noise", sa.noise, "box-channel logit noise std");
    synth->add_option("--min-objects", sa.min_objects, "min objects per image");
    synth->add_option("--max-objects", sa.max_objects, "max objects per image");
    synth->add_option("--min-size", sa.min_size, "min box side in pixels");
    synth->add_option("--max-size", sa.max_size, "max box side in pixels");
    synth->add_option("--alpha", sa.alpha, "grid-sensitive scale used for encoding");
    synth->add_option("--plant", sa.plant, "center placement: random or boundary")
        ->check(CLI::IsMember({"random", "boundary"}));
    synth->add_option("--iou-aware", sa.iou_aware, "emit the extra confidence channel")
        ->check(CLI::IsMember({"on", "off"}));

    PipelineArgs pa;
    auto* pipeline = app.add_subcommand("pipeline", "decode, suppress and score a tensor set");
    pipeline->add_option("--in", pa.in_dir, "input directory with manifest.json")->required();
    pipeline->add_option("--nms", pa.nms, "suppression method")
        ->check(CLI::IsMember({"greedy", "soft", "matrix"}));
    pipeline->add_option("--alpha", pa.alpha, "override the decode-side grid-sensitive scale");
    pipeline->add_option("--iou-aware", pa.iou_aware, "use the confidence channel in fusion")
        ->check(CLI::IsMember({"manifest", "on", "off"}));
    pipeline->add_option("--report", pa.report, "JSON report path")->required();
    pipeline->add_option("--dets-out", pa.dets_out, "also write final detections as JSON lines");
    pipeline->add_option("--score-threshold", pa.score_threshold, "pre-NMS fused score cutoff");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "time the suppression methods");
    bench->add_option("--boxes", ba.boxes, "comma-separated instance counts");
    bench->add_option("--trials", ba.trials, "trials per method and count");
    bench->add_option("--methods", ba.methods, "comma-separated method list");
    bench->add_option("--csv", ba.csv, "CSV output path")->required();
    bench->add_option("--seed", ba.seed, "workload seed");
    bench->add_option("--classes", ba.classes, "class count in the workload");

    EvalArgs ea;
    auto* evalc = app.add_subcommand("eval", "score a detection file against ground truth");
    evalc->add_option("--dets", ea.dets, "detection JSON-lines file")->required();
    evalc->add_option("--gts", ea.gts, "annotation JSON-lines file")->required();
    evalc->add_option("--report", ea.report, "JSON report path")->required();
    evalc->add_option("--classes", ea.classes, "class count (0 derives from the files)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return run_synth(sa);
        if (pipeline->parsed()) return run_pipeline(pa);
        if (bench->parsed()) return run_bench(ba);
        if (evalc->parsed()) return run_eval(ea);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
