// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <array>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "yolokit/assign.hpp"
#include "yolokit/geometry.hpp"
#include "yolokit/headcodec.hpp"
#include "yolokit/math.hpp"
#include "yolokit/tensor.hpp"

namespace yolokit {

struct SynthConfig {
    int image_width = 608;
    int image_height = 608;
    int min_objects = 1;
    int max_objects = 8;
    int num_classes = 20;
    double min_size = 16.0;
    double max_size = 160.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (image_width < 32 || image_height < 32 || image_width % 32 != 0 ||
            image_height % 32 != 0) {
            throw std::invalid_argument("SynthConfig: image dims must be positive multiples of 32");
        }
        if (min_objects < 0 || max_objects < min_objects) {
            throw std::invalid_argument("SynthConfig: bad object count range");
        }
        if (num_classes < 1) throw std::invalid_argument("SynthConfig: num_classes must be >= 1");
        if (!(min_size > 0.0 && min_size <= max_size)) {
            throw std::invalid_argument("SynthConfig: bad size range");
        }
        if (max_size > std::min(image_width, image_height)) {
            throw std::invalid_argument("SynthConfig: max_size exceeds image");
        }
    }
};

// Per-channel-group logit noise amplitudes (standard deviations).
struct NoiseSpec {
    double box = 0.0;
    double cls = 0.0;
    double obj = 0.0;
    double iou = 0.0;

    void validate() const {
        if (box < 0.0 || cls < 0.0 || obj < 0.0 || iou < 0.0) {
            throw std::invalid_argument("NoiseSpec: amplitudes must be nonnegative");
        }
    }
};

namespace detail {

// Best-shape anchor for a box, ignoring position (mirrors the slot chooser).
inline std::pair<int, int> best_shape_anchor(const std::vector<PyramidLevel>& levels, double w,
                                             double h) {
    int best_level = 0, best_anchor = 0;
    double best = -1.0;
    for (int li = 0; li < static_cast<int>(levels.size()); ++li) {
        for (int a = 0; a < static_cast<int>(levels[li].anchors.size()); ++a) {
            const double s = shape_iou(w, h, levels[li].anchors[a].w, levels[li].anchors[a].h);
            if (s > best) {
                best = s;
                best_level = li;
                best_anchor = a;
            }
        }
    }
    return {best_level, best_anchor};
}

constexpr double kMaxPairIou = 0.3;
constexpr int kPlaceAttempts = 100;

struct SceneBuilder {
    const SynthConfig& cfg;
    const std::vector<PyramidLevel>* levels;  // non-null enables slot-uniqueness rejection
    GroundTruthScene scene;
    std::set<std::array<int, 4>> used_slots;

    explicit SceneBuilder(const SynthConfig& c, const std::vector<PyramidLevel>* lv)
        : cfg(c), levels(lv) {
        scene.width = cfg.image_width;
        scene.height = cfg.image_height;
    }

    bool try_add(const Box& b, int class_id) {
        for (const auto& existing : scene.annotations) {
            if (iou(existing.box, b) > kMaxPairIou) return false;
        }
        std::array<int, 4> slot{};
        if (levels) {
            const SlotRef ref = best_slot_for(*levels, b.center_x(), b.center_y(), b.width(),
                                              b.height(), cfg.image_width, cfg.image_height);
            slot = {ref.level_index, ref.gy, ref.gx, ref.anchor};
            if (used_slots.count(slot)) return false;
        }
        scene.annotations.push_back({b, class_id});
        if (levels) used_slots.insert(slot);
        return true;
    }
};

}  // namespace detail

// Random non-crowded scene: box sizes and centers uniform within the image,
// rejection-sampled so no pair overlaps beyond IoU 0.3. When levels are
// given, boxes landing on an already-claimed (level, cell, anchor) slot are
// also rejected, which keeps every object individually representable in the
// rendered tensors. Runs out of retries gracefully by placing fewer
// objects.
inline GroundTruthScene generate_scene(const SynthConfig& cfg,
                                       const std::vector<PyramidLevel>* levels) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    detail::SceneBuilder builder(cfg, levels);
    const int count = uniform_int_in(rng, cfg.min_objects, cfg.max_objects);
    for (int i = 0; i < count; ++i) {
        for (int attempt = 0; attempt < detail::kPlaceAttempts; ++attempt) {
            const double w = uniform_in(rng, cfg.min_size, cfg.max_size);
            const double h = uniform_in(rng, cfg.min_size, cfg.max_size);
            const double cx = uniform_in(rng, w / 2, cfg.image_width - w / 2);
            const double cy = uniform_in(rng, h / 2, cfg.image_height - h / 2);
            const int cls = uniform_int_in(rng, 0, cfg.num_classes - 1);
            if (builder.try_add(Box::from_center(cx, cy, w, h), cls)) break;
        }
    }
    return builder.scene;
}

inline GroundTruthScene generate_scene(const SynthConfig& cfg) {
    return generate_scene(cfg, nullptr);
}

// Adversarial variant: every center sits exactly on a cell corner of the
// pyramid level its shape maps to, the spot a plain sigmoid decode cannot
// express. Slot uniqueness is enforced the same way.
inline GroundTruthScene generate_boundary_scene(const SynthConfig& cfg,
                                                const std::vector<PyramidLevel>& levels) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    detail::SceneBuilder builder(cfg, &levels);
    const int count = uniform_int_in(rng, cfg.min_objects, cfg.max_objects);
    for (int i = 0; i < count; ++i) {
        for (int attempt = 0; attempt < detail::kPlaceAttempts; ++attempt) {
            const double w = uniform_in(rng, cfg.min_size, cfg.max_size);
            const double h = uniform_in(rng, cfg.min_size, cfg.max_size);
            const auto [li, anchor] = detail::best_shape_anchor(levels, w, h);
            const int stride = levels[li].stride();
            const int gw = levels[li].grid_w(cfg.image_width);
            const int gh = levels[li].grid_h(cfg.image_height);
            const int i_min = std::max(1, static_cast<int>(std::ceil(w / 2 / stride)));
            const int j_min = std::max(1, static_cast<int>(std::ceil(h / 2 / stride)));
            const int i_max = std::min(gw - 1, static_cast<int>((cfg.image_width - w / 2) / stride));
            const int j_max = std::min(gh - 1, static_cast<int>((cfg.image_height - h / 2) / stride));
            if (i_min > i_max || j_min > j_max) continue;
            const double cx = static_cast<double>(stride) * uniform_int_in(rng, i_min, i_max);
            const double cy = static_cast<double>(stride) * uniform_int_in(rng, j_min, j_max);
            const int cls = uniform_int_in(rng, 0, cfg.num_classes - 1);
            if (builder.try_add(Box::from_center(cx, cy, w, h), cls)) break;
        }
    }
    return builder.scene;
}

// Confident-logit magnitude for planted channels. sigmoid(12) ~ 0.999994,
// far above every default score threshold yet finite.
inline constexpr double kCertainLogit = 12.0;

// Inverse pipeline: raw head tensors whose decode reproduces the scene.
// Positive slots carry the encoded box, +12 logits on the target class and
// objectness, -12 elsewhere; negative slots are -12 throughout. Gaussian
// noise is drawn for every element with one generator pass and scaled per
// channel group, so runs differing only in amplitude see proportional
// perturbations.
inline std::vector<FeatureMap> render_raw(const GroundTruthScene& scene, const HeadLayout& layout,
                                          const std::vector<PyramidLevel>& levels, double alpha,
                                          const NoiseSpec& noise, std::uint64_t seed) {
    noise.validate();
    const TargetMap targets = assign_targets(scene, levels, layout, 0.7, alpha);
    const double iou_logit = logit(1.0 - 1e-6);
    const int per_anchor = layout.channels_per_anchor();
    const int K = layout.num_classes;

    std::vector<FeatureMap> heads;
    heads.reserve(levels.size());
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const LevelTargets& lt = targets.levels[li];
        FeatureMap head(layout.total_channels(), lt.grid_h, lt.grid_w,
                        static_cast<float>(-kCertainLogit));
        for (int gy = 0; gy < lt.grid_h; ++gy) {
            for (int gx = 0; gx < lt.grid_w; ++gx) {
                for (int a = 0; a < lt.anchors; ++a) {
                    const SlotTarget& slot = lt.at(gy, gx, a);
                    if (!slot.positive) continue;
                    const int base = a * per_anchor;
                    head.at(base + slot.class_id, gy, gx) = static_cast<float>(kCertainLogit);
                    head.at(base + layout.box_offset() + 0, gy, gx) = static_cast<float>(slot.box.px);
                    head.at(base + layout.box_offset() + 1, gy, gx) = static_cast<float>(slot.box.py);
                    head.at(base + layout.box_offset() + 2, gy, gx) = static_cast<float>(slot.box.pw);
                    head.at(base + layout.box_offset() + 3, gy, gx) = static_cast<float>(slot.box.ph);
                    head.at(base + layout.obj_offset(), gy, gx) = static_cast<float>(kCertainLogit);
                    if (layout.iou_aware) {
                        head.at(base + layout.iou_offset(), gy, gx) = static_cast<float>(iou_logit);
                    }
                }
            }
        }
        heads.push_back(std::move(head));
    }

    std::mt19937_64 rng(seed);
    for (auto& head : heads) {
        const std::size_t plane = static_cast<std::size_t>(head.height) * head.width;
        for (std::size_t idx = 0; idx < head.data.size(); ++idx) {
            const int c = static_cast<int>(idx / plane) % per_anchor;
            double std_dev;
            if (c < K) {
                std_dev = noise.cls;
            } else if (c < K + 4) {
                std_dev = noise.box;
            } else if (c == layout.obj_offset()) {
                std_dev = noise.obj;
            } else {
                std_dev = noise.iou;
            }
            head.data[idx] += static_cast<float>(std_dev * gaussian(rng));
        }
    }
    return heads;
}

}  // namespace yolokit
