// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "yolokit/detection.hpp"
#include "yolokit/geometry.hpp"
#include "yolokit/math.hpp"
#include "yolokit/tensor.hpp"

namespace yolokit {

// Per-anchor channel order of the raw head tensor:
//   [cls(K), box(4: p_x, p_y, p_w, p_h), obj(1), iou(1 when enabled)]
// so a head with A anchors carries A*(K+5) channels, A*(K+6) with the
// localization-confidence branch on.
struct HeadLayout {
    int num_classes = 80;
    int anchors_per_cell = 3;
    bool iou_aware = false;

    int channels_per_anchor() const { return num_classes + 5 + (iou_aware ? 1 : 0); }
    int total_channels() const { return anchors_per_cell * channels_per_anchor(); }

    // Channel offsets within one anchor block.
    int cls_offset(int k) const { return k; }
    int box_offset() const { return num_classes; }
    int obj_offset() const { return num_classes + 4; }
    int iou_offset() const { return num_classes + 5; }

    void validate() const {
        if (num_classes < 1) throw std::invalid_argument("HeadLayout: num_classes must be >= 1");
        if (anchors_per_cell < 1) throw std::invalid_argument("HeadLayout: anchors_per_cell must be >= 1");
    }
};

// Prior box size in pixels.
struct Anchor {
    double w = 0.0;
    double h = 0.0;
};

// Pyramid level l with stride 2^l; a W x H input yields a
// (W / 2^l) x (H / 2^l) grid.
struct PyramidLevel {
    int level = 3;
    std::vector<Anchor> anchors;

    int stride() const { return 1 << level; }

    int grid_w(int image_w) const { return image_w / stride(); }
    int grid_h(int image_h) const { return image_h / stride(); }

    void validate(int image_w, int image_h) const {
        if (level < 0 || level > 30) throw std::invalid_argument("PyramidLevel: bad level");
        const int s = stride();
        if (image_w % s != 0 || image_h % s != 0 || image_w <= 0 || image_h <= 0) {
            throw std::invalid_argument("PyramidLevel: image size " + std::to_string(image_w) + "x" +
                                        std::to_string(image_h) + " not divisible by stride " +
                                        std::to_string(s));
        }
    }
};

// The usual nine COCO prior sizes split three per level.
inline std::vector<PyramidLevel> default_levels() {
    return {
        PyramidLevel{3, {{10, 13}, {16, 30}, {33, 23}}},
        PyramidLevel{4, {{30, 61}, {62, 45}, {59, 119}}},
        PyramidLevel{5, {{116, 90}, {156, 198}, {373, 326}}},
    };
}

struct DecodeConfig {
    double alpha = 1.05;           // grid-sensitive scale, >= 1
    double score_threshold = 0.005;
    double size_logit_clamp = 10.0;  // |p_w|, |p_h| bound before exp
    bool clamp_to_image = true;

    void validate() const {
        if (alpha < 1.0) throw std::invalid_argument("DecodeConfig: alpha must be >= 1");
        if (size_logit_clamp <= 0.0) throw std::invalid_argument("DecodeConfig: size_logit_clamp must be > 0");
    }
};

// Encoded box channels, raw logit space.
struct RawBox {
    double px = 0.0;
    double py = 0.0;
    double pw = 0.0;
    double ph = 0.0;
};

// One slot's raw prediction, with its grid position.
struct RawPrediction {
    RawBox box;
    double obj_logit = 0.0;
    std::vector<double> class_logits;
    double iou_logit = 0.0;  // meaningful only when the layout enables it
    int gx = 0;
    int gy = 0;
    int anchor_slot = 0;
};

// Grid-sensitive center decode:
//   x = s * (g_x + alpha * sigmoid(p_x) - (alpha - 1) / 2)
// With alpha = 1 this is the plain sigmoid-offset decode; alpha > 1
// stretches the reachable offset past the cell edges so centers exactly on
// grid boundaries correspond to finite logits.
inline std::pair<double, double> decode_center(double px, double py, int gx, int gy, int stride,
                                               double alpha) {
    const double half = (alpha - 1.0) * 0.5;
    const double x = stride * (gx + alpha * sigmoid(px) - half);
    const double y = stride * (gy + alpha * sigmoid(py) - half);
    return {x, y};
}

// Exponential size decode against the anchor prior, with the raw logit
// clamped so random or adversarial inputs cannot overflow.
inline std::pair<double, double> decode_size(double pw, double ph, const Anchor& anchor,
                                             double clamp_bound = 10.0) {
    const double cw = std::clamp(pw, -clamp_bound, clamp_bound);
    const double ch = std::clamp(ph, -clamp_bound, clamp_bound);
    return {anchor.w * std::exp(cw), anchor.h * std::exp(ch)};
}

// Full box decode for one slot. Never clamps to the image; callers that
// need in-image boxes clip afterwards.
inline Box decode_box(const RawBox& raw, int gx, int gy, const Anchor& anchor, int stride,
                      double alpha, double size_clamp = 10.0) {
    const auto [cx, cy] = decode_center(raw.px, raw.py, gx, gy, stride, alpha);
    const auto [w, h] = decode_size(raw.pw, raw.ph, anchor, size_clamp);
    return Box::from_center(cx, cy, w, h);
}

// Inverse of decode_box. The center must land inside the sigmoid's open
// range for this cell; u_clamp_eps > 0 instead clamps the offset into
// [eps, 1 - eps], which target assignment uses so no ground truth is ever
// dropped. With u_clamp_eps == 0 an unrepresentable center throws.
inline RawBox encode_box(const Box& box, int gx, int gy, const Anchor& anchor, int stride,
                         double alpha, double u_clamp_eps = 0.0) {
    if (box.width() <= 0.0 || box.height() <= 0.0) {
        throw std::domain_error("encode_box: box must have positive extent");
    }
    if (anchor.w <= 0.0 || anchor.h <= 0.0) {
        throw std::domain_error("encode_box: anchor must have positive extent");
    }
    const double half = (alpha - 1.0) * 0.5;
    double ux = (box.center_x() / stride - gx + half) / alpha;
    double uy = (box.center_y() / stride - gy + half) / alpha;
    if (u_clamp_eps > 0.0) {
        ux = std::clamp(ux, u_clamp_eps, 1.0 - u_clamp_eps);
        uy = std::clamp(uy, u_clamp_eps, 1.0 - u_clamp_eps);
    } else if (ux <= 0.0 || ux >= 1.0 || uy <= 0.0 || uy >= 1.0) {
        throw std::domain_error("encode_box: center not representable in cell (" +
                                std::to_string(gx) + "," + std::to_string(gy) + ") at alpha " +
                                std::to_string(alpha));
    }
    RawBox raw;
    raw.px = logit(ux);
    raw.py = logit(uy);
    raw.pw = std::log(box.width() / anchor.w);
    raw.ph = std::log(box.height() / anchor.h);
    return raw;
}

namespace detail {

inline void check_head_shape(const HeadLayout& layout, const PyramidLevel& level, int image_w,
                             int image_h, int c, int h, int w) {
    layout.validate();
    level.validate(image_w, image_h);
    if (static_cast<int>(level.anchors.size()) != layout.anchors_per_cell) {
        throw std::invalid_argument("decode_level: level has " + std::to_string(level.anchors.size()) +
                                    " anchors, layout expects " + std::to_string(layout.anchors_per_cell));
    }
    if (c != layout.total_channels()) {
        throw std::invalid_argument("decode_level: tensor has " + std::to_string(c) +
                                    " channels, layout expects " + std::to_string(layout.total_channels()));
    }
    if (h != level.grid_h(image_h) || w != level.grid_w(image_w)) {
        throw std::invalid_argument("decode_level: tensor grid " + std::to_string(w) + "x" +
                                    std::to_string(h) + " disagrees with level grid " +
                                    std::to_string(level.grid_w(image_w)) + "x" +
                                    std::to_string(level.grid_h(image_h)));
    }
}

}  // namespace detail

// Decodes one level's raw tensor into detection candidates: at most one per
// (cell, anchor), taking the strongest class, kept when the fused score
// reaches cfg.score_threshold. Output order is row-major cell order, then
// anchor slot, so results do not depend on evaluation schedule.
template <typename T>
std::vector<Detection> decode_level(const Tensor3<T>& head, const HeadLayout& layout,
                                    const PyramidLevel& level, int image_w, int image_h,
                                    const DecodeConfig& cfg) {
    cfg.validate();
    detail::check_head_shape(layout, level, image_w, image_h, head.channels, head.height, head.width);

    const int K = layout.num_classes;
    const int per_anchor = layout.channels_per_anchor();
    const int stride = level.stride();

    std::vector<Detection> out;
    for (int gy = 0; gy < head.height; ++gy) {
        for (int gx = 0; gx < head.width; ++gx) {
            for (int a = 0; a < layout.anchors_per_cell; ++a) {
                const int base = a * per_anchor;
                int best_k = 0;
                double best_logit = static_cast<double>(head.at(base, gy, gx));
                for (int k = 1; k < K; ++k) {
                    const double lk = static_cast<double>(head.at(base + k, gy, gx));
                    if (lk > best_logit) {
                        best_logit = lk;
                        best_k = k;
                    }
                }
                const double cls_p = sigmoid(best_logit);
                const double obj = sigmoid(static_cast<double>(head.at(base + layout.obj_offset(), gy, gx)));
                const double iou_p =
                    layout.iou_aware
                        ? sigmoid(static_cast<double>(head.at(base + layout.iou_offset(), gy, gx)))
                        : 1.0;
                const double score = fuse_scores(cls_p, obj, iou_p);
                if (score < cfg.score_threshold) continue;

                RawBox raw{static_cast<double>(head.at(base + layout.box_offset() + 0, gy, gx)),
                           static_cast<double>(head.at(base + layout.box_offset() + 1, gy, gx)),
                           static_cast<double>(head.at(base + layout.box_offset() + 2, gy, gx)),
                           static_cast<double>(head.at(base + layout.box_offset() + 3, gy, gx))};
                Box box = decode_box(raw, gx, gy, level.anchors[a], stride, cfg.alpha,
                                     cfg.size_logit_clamp);
                if (cfg.clamp_to_image) {
                    box = box.clipped(static_cast<double>(image_w), static_cast<double>(image_h));
                }
                out.push_back(Detection{box, best_k, cls_p, obj, iou_p, score});
            }
        }
    }
    return out;
}

}  // namespace yolokit
