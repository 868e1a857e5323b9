// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "yolokit/detection.hpp"
#include "yolokit/geometry.hpp"
#include "yolokit/headcodec.hpp"
#include "yolokit/tensor.hpp"

namespace yolokit {

// Malformed input files raise this; callers map it to the data-format exit
// code. Everything else surfacing from here is an I/O failure.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Writes via a sibling temp file and a rename so readers never observe a
// partial file.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) throw std::runtime_error("read failed: " + path.string());
    return std::move(buf).str();
}

// ---------------------------------------------------------------------------
// Tensor container: magic "PPYT", version byte 1, ndim byte, two zero pad
// bytes, ndim u32 little-endian dimension sizes, then row-major f32
// little-endian values.

struct PpytTensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32_le(const std::string& in, std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(in[off])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + 3])) << 24;
}

}  // namespace detail

inline std::string serialize_ppyt(const PpytTensor& t) {
    if (t.dims.empty() || t.dims.size() > 4) {
        throw std::invalid_argument("ppyt: ndim must lie in [1, 4]");
    }
    std::uint64_t count = 1;
    for (std::uint32_t d : t.dims) {
        if (d == 0) throw std::invalid_argument("ppyt: zero dimension");
        count *= d;
    }
    if (count != t.values.size()) {
        throw std::invalid_argument("ppyt: value count disagrees with dims");
    }
    std::string out;
    out.reserve(8 + 4 * t.dims.size() + 4 * t.values.size());
    out += "PPYT";
    out.push_back(1);
    out.push_back(static_cast<char>(t.dims.size()));
    out.push_back(0);
    out.push_back(0);
    for (std::uint32_t d : t.dims) detail::put_u32_le(out, d);
    for (float v : t.values) detail::put_u32_le(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

inline PpytTensor parse_ppyt(const std::string& bytes, const std::string& origin = "ppyt") {
    auto fail = [&](const std::string& msg, std::size_t off) {
        throw FormatError(origin + ": " + msg + " (byte offset " + std::to_string(off) + ")");
    };
    if (bytes.size() < 8) fail("truncated header", bytes.size());
    if (bytes.compare(0, 4, "PPYT") != 0) fail("bad magic", 0);
    if (static_cast<unsigned char>(bytes[4]) != 1) fail("unsupported version", 4);
    const int ndim = static_cast<unsigned char>(bytes[5]);
    if (ndim < 1 || ndim > 4) fail("ndim out of range [1, 4]", 5);
    if (bytes[6] != 0 || bytes[7] != 0) fail("nonzero pad bytes", 6);
    const std::size_t dims_end = 8 + 4 * static_cast<std::size_t>(ndim);
    if (bytes.size() < dims_end) fail("truncated dimension list", bytes.size());

    PpytTensor t;
    std::uint64_t count = 1;
    for (int i = 0; i < ndim; ++i) {
        const std::uint32_t d = detail::get_u32_le(bytes, 8 + 4 * static_cast<std::size_t>(i));
        if (d == 0) fail("zero dimension", 8 + 4 * static_cast<std::size_t>(i));
        t.dims.push_back(d);
        count *= d;
        if (count > (1u << 30)) fail("element count unreasonably large", dims_end);
    }
    if (bytes.size() != dims_end + 4 * count) fail("payload length disagrees with dims", dims_end);
    t.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        t.values[i] = std::bit_cast<float>(detail::get_u32_le(bytes, dims_end + 4 * i));
    }
    return t;
}

inline void write_ppyt(const std::filesystem::path& path, const PpytTensor& t) {
    atomic_write_file(path, serialize_ppyt(t));
}

inline void write_ppyt(const std::filesystem::path& path, const FeatureMap& fm) {
    fm.validate();
    PpytTensor t;
    t.dims = {static_cast<std::uint32_t>(fm.channels), static_cast<std::uint32_t>(fm.height),
              static_cast<std::uint32_t>(fm.width)};
    t.values = fm.data;
    write_ppyt(path, t);
}

inline PpytTensor read_ppyt(const std::filesystem::path& path) {
    return parse_ppyt(read_file(path), path.string());
}

// Reads a file that must hold a rank-3 (C, H, W) tensor.
inline FeatureMap read_ppyt_chw(const std::filesystem::path& path) {
    PpytTensor t = read_ppyt(path);
    if (t.dims.size() != 3) {
        throw FormatError(path.string() + ": expected a rank-3 tensor, got rank " +
                          std::to_string(t.dims.size()));
    }
    FeatureMap fm(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                  static_cast<int>(t.dims[2]));
    fm.data = std::move(t.values);
    return fm;
}

// ---------------------------------------------------------------------------
// JSON-lines annotation and detection records. bbox is [x_min, y_min,
// width, height] in pixels.

struct AnnotationRecord {
    std::string image_id;
    double x_min = 0.0, y_min = 0.0, width = 0.0, height = 0.0;
    int category_id = 0;
};

struct DetectionRecord {
    std::string image_id;
    double x_min = 0.0, y_min = 0.0, width = 0.0, height = 0.0;
    int category_id = 0;
    double score = 0.0;
};

inline Box record_box(double x_min, double y_min, double width, double height) {
    return Box{x_min, y_min, x_min + width, y_min + height};
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* key,
                                           const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(where + ": missing field \"" + std::string(key) + "\"");
    return *it;
}

struct RecordCommon {
    std::string image_id;
    double x_min, y_min, width, height;
    int category_id;
};

inline RecordCommon parse_record_common(const nlohmann::json& j, const std::string& where) {
    RecordCommon r;
    const auto& id = require_field(j, "image_id", where);
    if (!id.is_string()) throw FormatError(where + ": image_id must be a string");
    r.image_id = id.get<std::string>();

    const auto& bbox = require_field(j, "bbox", where);
    if (!bbox.is_array() || bbox.size() != 4) {
        throw FormatError(where + ": bbox must be an array of 4 numbers");
    }
    for (const auto& v : bbox) {
        if (!v.is_number()) throw FormatError(where + ": bbox must be an array of 4 numbers");
    }
    r.x_min = bbox[0].get<double>();
    r.y_min = bbox[1].get<double>();
    r.width = bbox[2].get<double>();
    r.height = bbox[3].get<double>();
    if (r.width < 0.0 || r.height < 0.0) {
        throw FormatError(where + ": bbox width/height must be nonnegative");
    }

    const auto& cat = require_field(j, "category_id", where);
    if (!cat.is_number_integer()) throw FormatError(where + ": category_id must be an integer");
    r.category_id = cat.get<int>();
    return r;
}

template <typename Fn>
void for_each_jsonl(const std::string& text, const std::string& origin, Fn&& fn) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(where + ": " + e.what());
        }
        if (!j.is_object()) throw FormatError(where + ": expected a JSON object");
        fn(j, where);
    }
}

}  // namespace detail

inline std::vector<AnnotationRecord> parse_annotation_jsonl(const std::string& text,
                                                            const std::string& origin) {
    std::vector<AnnotationRecord> out;
    detail::for_each_jsonl(text, origin, [&](const nlohmann::json& j, const std::string& where) {
        const detail::RecordCommon c = detail::parse_record_common(j, where);
        out.push_back({c.image_id, c.x_min, c.y_min, c.width, c.height, c.category_id});
    });
    return out;
}

inline std::vector<DetectionRecord> parse_detection_jsonl(const std::string& text,
                                                          const std::string& origin) {
    std::vector<DetectionRecord> out;
    detail::for_each_jsonl(text, origin, [&](const nlohmann::json& j, const std::string& where) {
        const detail::RecordCommon c = detail::parse_record_common(j, where);
        const auto& score = detail::require_field(j, "score", where);
        if (!score.is_number()) throw FormatError(where + ": score must be a number");
        const double s = score.get<double>();
        if (s < 0.0 || s > 1.0) throw FormatError(where + ": score must lie in [0, 1]");
        out.push_back({c.image_id, c.x_min, c.y_min, c.width, c.height, c.category_id, s});
    });
    return out;
}

inline std::vector<AnnotationRecord> read_annotation_jsonl(const std::filesystem::path& path) {
    return parse_annotation_jsonl(read_file(path), path.string());
}

inline std::vector<DetectionRecord> read_detection_jsonl(const std::filesystem::path& path) {
    return parse_detection_jsonl(read_file(path), path.string());
}

inline std::string serialize_annotation_jsonl(const std::vector<AnnotationRecord>& recs) {
    std::string out;
    for (const auto& r : recs) {
        nlohmann::json j;
        j["image_id"] = r.image_id;
        j["bbox"] = {r.x_min, r.y_min, r.width, r.height};
        j["category_id"] = r.category_id;
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::string serialize_detection_jsonl(const std::vector<DetectionRecord>& recs) {
    std::string out;
    for (const auto& r : recs) {
        nlohmann::json j;
        j["image_id"] = r.image_id;
        j["bbox"] = {r.x_min, r.y_min, r.width, r.height};
        j["category_id"] = r.category_id;
        j["score"] = r.score;
        out += j.dump();
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest binding a directory of tensor files to the head layout that
// produced them, so the decoder never guesses shapes.

struct ManifestImage {
    std::string image_id;
    std::map<int, std::string> tensors;  // pyramid level -> file, relative to the manifest
};

struct PipelineManifest {
    int image_width = 0;
    int image_height = 0;
    int num_classes = 0;
    bool iou_aware = false;
    double alpha = 1.05;
    std::vector<PyramidLevel> levels;
    std::string annotations;  // relative path, empty when absent
    std::vector<ManifestImage> images;

    HeadLayout layout() const {
        HeadLayout l;
        l.num_classes = num_classes;
        l.anchors_per_cell = levels.empty() ? 0 : static_cast<int>(levels[0].anchors.size());
        l.iou_aware = iou_aware;
        return l;
    }
};

inline constexpr const char* kManifestFormat = "yolokit-pipeline-v1";

inline std::string serialize_manifest(const PipelineManifest& m) {
    nlohmann::json j;
    j["format"] = kManifestFormat;
    j["image_width"] = m.image_width;
    j["image_height"] = m.image_height;
    j["num_classes"] = m.num_classes;
    j["iou_aware"] = m.iou_aware;
    j["alpha"] = m.alpha;
    j["levels"] = nlohmann::json::array();
    for (const auto& lv : m.levels) {
        nlohmann::json anchors = nlohmann::json::array();
        for (const auto& a : lv.anchors) anchors.push_back({a.w, a.h});
        j["levels"].push_back({{"level", lv.level}, {"anchors", anchors}});
    }
    j["annotations"] = m.annotations;
    j["images"] = nlohmann::json::array();
    for (const auto& im : m.images) {
        nlohmann::json tensors = nlohmann::json::object();
        for (const auto& [level, file] : im.tensors) tensors[std::to_string(level)] = file;
        j["images"].push_back({{"image_id", im.image_id}, {"tensors", tensors}});
    }
    return j.dump(2) + "\n";
}

inline PipelineManifest parse_manifest(const std::string& text, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(origin + ": " + e.what());
    }
    if (!j.is_object()) throw FormatError(origin + ": expected a JSON object");
    const auto& fmt = detail::require_field(j, "format", origin);
    if (!fmt.is_string() || fmt.get<std::string>() != kManifestFormat) {
        throw FormatError(origin + ": unrecognized format tag");
    }
    PipelineManifest m;
    auto get_int = [&](const char* key) {
        const auto& v = detail::require_field(j, key, origin);
        if (!v.is_number_integer()) {
            throw FormatError(origin + ": " + std::string(key) + " must be an integer");
        }
        return v.get<int>();
    };
    m.image_width = get_int("image_width");
    m.image_height = get_int("image_height");
    m.num_classes = get_int("num_classes");
    const auto& ia = detail::require_field(j, "iou_aware", origin);
    if (!ia.is_boolean()) throw FormatError(origin + ": iou_aware must be a boolean");
    m.iou_aware = ia.get<bool>();
    const auto& alpha = detail::require_field(j, "alpha", origin);
    if (!alpha.is_number()) throw FormatError(origin + ": alpha must be a number");
    m.alpha = alpha.get<double>();

    const auto& levels = detail::require_field(j, "levels", origin);
    if (!levels.is_array() || levels.empty()) {
        throw FormatError(origin + ": levels must be a nonempty array");
    }
    for (const auto& lv : levels) {
        if (!lv.is_object()) throw FormatError(origin + ": level entries must be objects");
        PyramidLevel pl;
        const auto& ln = detail::require_field(lv, "level", origin);
        if (!ln.is_number_integer()) throw FormatError(origin + ": level must be an integer");
        pl.level = ln.get<int>();
        const auto& anchors = detail::require_field(lv, "anchors", origin);
        if (!anchors.is_array() || anchors.empty()) {
            throw FormatError(origin + ": anchors must be a nonempty array");
        }
        for (const auto& a : anchors) {
            if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
                throw FormatError(origin + ": anchors must be [w, h] pairs");
            }
            pl.anchors.push_back({a[0].get<double>(), a[1].get<double>()});
        }
        m.levels.push_back(std::move(pl));
    }

    const auto& ann = detail::require_field(j, "annotations", origin);
    if (!ann.is_string()) throw FormatError(origin + ": annotations must be a string");
    m.annotations = ann.get<std::string>();

    const auto& images = detail::require_field(j, "images", origin);
    if (!images.is_array()) throw FormatError(origin + ": images must be an array");
    for (const auto& im : images) {
        if (!im.is_object()) throw FormatError(origin + ": image entries must be objects");
        ManifestImage mi;
        const auto& id = detail::require_field(im, "image_id", origin);
        if (!id.is_string()) throw FormatError(origin + ": image_id must be a string");
        mi.image_id = id.get<std::string>();
        const auto& tensors = detail::require_field(im, "tensors", origin);
        if (!tensors.is_object()) throw FormatError(origin + ": tensors must be an object");
        for (const auto& [key, val] : tensors.items()) {
            int level = 0;
            try {
                std::size_t pos = 0;
                level = std::stoi(key, &pos);
                if (pos != key.size()) throw std::invalid_argument(key);
            } catch (const std::exception&) {
                throw FormatError(origin + ": tensor keys must be integer levels, got \"" + key +
                                  "\"");
            }
            if (!val.is_string()) throw FormatError(origin + ": tensor paths must be strings");
            mi.tensors[level] = val.get<std::string>();
        }
        m.images.push_back(std::move(mi));
    }
    return m;
}

inline void write_manifest(const std::filesystem::path& path, const PipelineManifest& m) {
    atomic_write_file(path, serialize_manifest(m));
}

inline PipelineManifest read_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_file(path), path.string());
}

}  // namespace yolokit
