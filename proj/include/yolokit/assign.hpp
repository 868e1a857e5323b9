// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "yolokit/geometry.hpp"
#include "yolokit/headcodec.hpp"

namespace yolokit {

struct Annotation {
    Box box;
    int class_id = 0;
};

struct GroundTruthScene {
    int width = 0;
    int height = 0;
    std::vector<Annotation> annotations;

    void validate(int num_classes) const {
        if (width <= 0 || height <= 0) throw std::invalid_argument("GroundTruthScene: bad image size");
        for (const auto& a : annotations) {
            if (!a.box.valid() || a.box.x_min < 0 || a.box.y_min < 0 || a.box.x_max > width ||
                a.box.y_max > height) {
                throw std::invalid_argument("GroundTruthScene: annotation box outside image");
            }
            if (a.class_id < 0 || a.class_id >= num_classes) {
                throw std::invalid_argument("GroundTruthScene: class id " + std::to_string(a.class_id) +
                                            " out of range");
            }
        }
    }
};

// One (level, cell, anchor) slot of the training target. A slot is positive
// or ignored, never both; everything else is a plain negative with
// objectness target 0.
struct SlotTarget {
    bool positive = false;
    bool ignore = false;
    RawBox box;        // valid only when positive
    int class_id = -1;  // valid only when positive

    double objectness_target() const { return positive ? 1.0 : 0.0; }
};

struct LevelTargets {
    int level = 0;
    int grid_w = 0;
    int grid_h = 0;
    int anchors = 0;
    std::vector<SlotTarget> slots;  // row-major cells, anchor fastest

    std::size_t index(int gy, int gx, int a) const {
        return (static_cast<std::size_t>(gy) * grid_w + gx) * anchors + a;
    }
    SlotTarget& at(int gy, int gx, int a) { return slots[index(gy, gx, a)]; }
    const SlotTarget& at(int gy, int gx, int a) const { return slots[index(gy, gx, a)]; }
};

struct TargetMap {
    std::vector<LevelTargets> levels;

    int num_positives() const {
        int n = 0;
        for (const auto& lt : levels)
            for (const auto& s : lt.slots) n += s.positive ? 1 : 0;
        return n;
    }
};

// Identifies the slot a ground truth of size (w, h) centered at (cx, cy)
// would occupy: the anchor with the best shape IoU across all levels, and
// the cell containing the center at that anchor's level.
struct SlotRef {
    int level_index = 0;
    int gx = 0;
    int gy = 0;
    int anchor = 0;
};

inline SlotRef best_slot_for(const std::vector<PyramidLevel>& levels, double cx, double cy, double w,
                             double h, int image_w, int image_h) {
    SlotRef best;
    double best_iou = -1.0;
    for (int li = 0; li < static_cast<int>(levels.size()); ++li) {
        for (int a = 0; a < static_cast<int>(levels[li].anchors.size()); ++a) {
            const auto& an = levels[li].anchors[a];
            const double s = shape_iou(w, h, an.w, an.h);
            if (s > best_iou) {
                best_iou = s;
                best.level_index = li;
                best.anchor = a;
            }
        }
    }
    const auto& lvl = levels[best.level_index];
    const int stride = lvl.stride();
    auto cell = [stride](double c, int n) {
        int g = static_cast<int>(c / stride);
        if (g < 0) g = 0;
        if (g > n - 1) g = n - 1;
        return g;
    };
    best.gx = cell(cx, lvl.grid_w(image_w));
    best.gy = cell(cy, lvl.grid_h(image_h));
    return best;
}

// YOLOv3-style assignment: each ground truth claims exactly one slot (best
// shape-IoU anchor over all levels, cell under its center). When two ground
// truths claim the same slot the later one in annotation order wins. Any
// remaining slot whose anchor box, placed at its cell center, overlaps some
// ground truth above ignore_iou is marked ignore so the objectness loss
// skips it. Centers that encode outside the sigmoid range are clamped
// (eps 1e-6) rather than dropped.
inline TargetMap assign_targets(const GroundTruthScene& scene, const std::vector<PyramidLevel>& levels,
                                const HeadLayout& layout, double ignore_iou, double alpha) {
    layout.validate();
    scene.validate(layout.num_classes);
    if (!(ignore_iou > 0.0 && ignore_iou < 1.0)) {
        throw std::invalid_argument("assign_targets: ignore_iou must lie in (0,1)");
    }
    constexpr double kEncodeEps = 1e-6;

    TargetMap tm;
    tm.levels.reserve(levels.size());
    for (const auto& lvl : levels) {
        lvl.validate(scene.width, scene.height);
        if (static_cast<int>(lvl.anchors.size()) != layout.anchors_per_cell) {
            throw std::invalid_argument("assign_targets: anchors per level must match layout");
        }
        LevelTargets lt;
        lt.level = lvl.level;
        lt.grid_w = lvl.grid_w(scene.width);
        lt.grid_h = lvl.grid_h(scene.height);
        lt.anchors = layout.anchors_per_cell;
        lt.slots.assign(static_cast<std::size_t>(lt.grid_w) * lt.grid_h * lt.anchors, SlotTarget{});
        tm.levels.push_back(std::move(lt));
    }

    for (const auto& ann : scene.annotations) {
        const SlotRef ref = best_slot_for(levels, ann.box.center_x(), ann.box.center_y(),
                                          ann.box.width(), ann.box.height(), scene.width, scene.height);
        const auto& lvl = levels[ref.level_index];
        SlotTarget& slot = tm.levels[ref.level_index].at(ref.gy, ref.gx, ref.anchor);
        slot.positive = true;
        slot.ignore = false;
        slot.class_id = ann.class_id;
        slot.box = encode_box(ann.box, ref.gx, ref.gy, lvl.anchors[ref.anchor], lvl.stride(), alpha,
                              kEncodeEps);
    }

    if (!scene.annotations.empty()) {
        for (std::size_t li = 0; li < levels.size(); ++li) {
            const auto& lvl = levels[li];
            auto& lt = tm.levels[li];
            const int stride = lvl.stride();
            for (int gy = 0; gy < lt.grid_h; ++gy) {
                for (int gx = 0; gx < lt.grid_w; ++gx) {
                    for (int a = 0; a < lt.anchors; ++a) {
                        SlotTarget& slot = lt.at(gy, gx, a);
                        if (slot.positive) continue;
                        const Box anchor_box = Box::from_center((gx + 0.5) * stride, (gy + 0.5) * stride,
                                                                lvl.anchors[a].w, lvl.anchors[a].h);
                        for (const auto& ann : scene.annotations) {
                            if (iou(anchor_box, ann.box) > ignore_iou) {
                                slot.ignore = true;
                                break;
                            }
                        }
                    }
                }
            }
        }
    }
    return tm;
}

}  // namespace yolokit
