// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "yolokit/assign.hpp"
#include "yolokit/detection.hpp"
#include "yolokit/geometry.hpp"

namespace yolokit {

inline std::vector<double> default_iou_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(0.50 + 0.05 * i);
    return t;
}

struct EvalConfig {
    std::vector<double> thresholds = default_iou_thresholds();
    int max_dets_per_image = 100;

    void validate() const {
        if (thresholds.empty()) throw std::invalid_argument("EvalConfig: no thresholds");
        for (double t : thresholds) {
            if (!(t > 0.0 && t < 1.0)) {
                throw std::invalid_argument("EvalConfig: thresholds must lie in (0, 1)");
            }
        }
        if (max_dets_per_image < 1) {
            throw std::invalid_argument("EvalConfig: max_dets_per_image must be >= 1");
        }
    }
};

struct MatchResult {
    // order[i] is the input index of the i-th detection by rank (score
    // descending, input index ascending); tp[i] says whether it matched.
    std::vector<int> order;
    std::vector<std::uint8_t> tp;
};

// Greedy detection-to-GT matching at one IoU threshold. Each detection, in
// rank order, claims the unmatched same-class GT it overlaps most, provided
// the overlap reaches the threshold. Equal overlaps go to the earlier GT.
inline MatchResult match_detections(const std::vector<Detection>& dets,
                                    const GroundTruthScene& gts, double iou_thresh) {
    if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) {
        throw std::invalid_argument("match_detections: threshold must lie in (0, 1)");
    }
    MatchResult res;
    res.order.resize(dets.size());
    for (int i = 0; i < static_cast<int>(dets.size()); ++i) res.order[i] = i;
    std::sort(res.order.begin(), res.order.end(), [&](int a, int b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        return a < b;
    });
    res.tp.assign(dets.size(), 0);
    std::vector<bool> gt_used(gts.annotations.size(), false);
    for (std::size_t r = 0; r < res.order.size(); ++r) {
        const Detection& d = dets[res.order[r]];
        int best_gt = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gts.annotations.size(); ++g) {
            if (gt_used[g] || gts.annotations[g].class_id != d.class_id) continue;
            const double v = iou(d.box, gts.annotations[g].box);
            if (v >= iou_thresh && v > best_iou) {
                best_iou = v;
                best_gt = static_cast<int>(g);
            }
        }
        if (best_gt >= 0) {
            gt_used[best_gt] = true;
            res.tp[r] = 1;
        }
    }
    return res;
}

// 101-point interpolated average precision over a TP/FP sequence already in
// rank order. Interpolated precision at recall r is the maximum precision
// attained at any recall >= r.
inline double average_precision(const std::vector<std::uint8_t>& tp_in_rank_order, long num_gt) {
    if (num_gt < 0) throw std::invalid_argument("average_precision: negative GT count");
    if (num_gt == 0) return 0.0;
    const std::size_t n = tp_in_rank_order.size();
    if (n == 0) return 0.0;
    std::vector<double> recall(n), suffix_max_prec(n);
    long tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        tp += tp_in_rank_order[i];
        recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
        suffix_max_prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        suffix_max_prec[i] = std::max(suffix_max_prec[i], suffix_max_prec[i + 1]);
    }
    double sum = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double r = k / 100.0;
        const auto it = std::lower_bound(recall.begin(), recall.end(), r);
        if (it != recall.end()) sum += suffix_max_prec[it - recall.begin()];
    }
    return sum / 101.0;
}

struct ThresholdCounts {
    double threshold = 0.0;
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

struct EvalResult {
    int num_classes = 0;
    std::vector<double> thresholds;
    std::vector<double> ap;             // class-major: ap[c * T + t]
    std::vector<std::uint8_t> class_has_gt;
    std::vector<ThresholdCounts> counts;
    double ap50 = 0.0;
    double ap75 = 0.0;
    double map = 0.0;

    double ap_at(int c, int t) const { return ap[static_cast<std::size_t>(c) * thresholds.size() + t]; }
};

// COCO-style evaluation: detections capped per image, matched per image at
// each threshold, pooled across images per (class, threshold) cell, and
// averaged. mAP means over thresholds and over the classes that have ground
// truth; AP50/AP75 are single-threshold slices of the same table.
inline EvalResult evaluate(const std::vector<std::vector<Detection>>& dets,
                           const std::vector<GroundTruthScene>& gts, int num_classes,
                           const EvalConfig& cfg = {}) {
    cfg.validate();
    if (num_classes < 1) throw std::invalid_argument("evaluate: num_classes must be >= 1");
    if (dets.size() != gts.size()) {
        throw std::invalid_argument("evaluate: detection and GT image counts disagree");
    }
    const int num_images = static_cast<int>(gts.size());
    const int T = static_cast<int>(cfg.thresholds.size());

    for (const auto& scene : gts) {
        for (const auto& ann : scene.annotations) {
            if (ann.class_id < 0 || ann.class_id >= num_classes) {
                throw std::invalid_argument("evaluate: GT class out of range");
            }
        }
    }

    // Per-image top-k cap by rank, applied across classes.
    std::vector<std::vector<Detection>> capped(num_images);
    for (int im = 0; im < num_images; ++im) {
        std::vector<int> order(dets[im].size());
        for (int i = 0; i < static_cast<int>(order.size()); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (dets[im][a].score != dets[im][b].score) return dets[im][a].score > dets[im][b].score;
            return a < b;
        });
        if (static_cast<int>(order.size()) > cfg.max_dets_per_image) {
            order.resize(cfg.max_dets_per_image);
        }
        std::sort(order.begin(), order.end());  // keep original relative order
        for (int i : order) {
            if (dets[im][i].class_id < 0 || dets[im][i].class_id >= num_classes) {
                throw std::invalid_argument("evaluate: detection class out of range");
            }
            capped[im].push_back(dets[im][i]);
        }
    }

    EvalResult res;
    res.num_classes = num_classes;
    res.thresholds = cfg.thresholds;
    res.ap.assign(static_cast<std::size_t>(num_classes) * T, 0.0);
    res.class_has_gt.assign(num_classes, 0);
    res.counts.resize(T);

    std::vector<long> gt_per_class(num_classes, 0);
    long total_gt = 0;
    for (const auto& scene : gts) {
        for (const auto& ann : scene.annotations) {
            ++gt_per_class[ann.class_id];
            ++total_gt;
        }
    }
    for (int c = 0; c < num_classes; ++c) res.class_has_gt[c] = gt_per_class[c] > 0 ? 1 : 0;

    struct Pooled {
        double score;
        int image;
        int det_index;
        std::uint8_t tp;
        std::uint8_t cls_tp;  // scratch per class during pooling
    };

    for (int t = 0; t < T; ++t) {
        res.counts[t].threshold = cfg.thresholds[t];

        // Match once per image at this threshold; the same-class constraint
        // makes the joint matching identical to per-class matching.
        std::vector<std::vector<std::uint8_t>> tp_by_input(num_images);
        for (int im = 0; im < num_images; ++im) {
            const MatchResult m = match_detections(capped[im], gts[im], cfg.thresholds[t]);
            tp_by_input[im].assign(capped[im].size(), 0);
            for (std::size_t r = 0; r < m.order.size(); ++r) {
                tp_by_input[im][m.order[r]] = m.tp[r];
            }
        }

        long tp_total = 0, fp_total = 0;
        for (int c = 0; c < num_classes; ++c) {
            std::vector<Pooled> pool;
            for (int im = 0; im < num_images; ++im) {
                for (int i = 0; i < static_cast<int>(capped[im].size()); ++i) {
                    if (capped[im][i].class_id != c) continue;
                    pool.push_back({capped[im][i].score, im, i, tp_by_input[im][i], 0});
                }
            }
            std::sort(pool.begin(), pool.end(), [](const Pooled& a, const Pooled& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.image != b.image) return a.image < b.image;
                return a.det_index < b.det_index;
            });
            std::vector<std::uint8_t> labels(pool.size());
            for (std::size_t i = 0; i < pool.size(); ++i) {
                labels[i] = pool[i].tp;
                tp_total += pool[i].tp;
                fp_total += pool[i].tp ? 0 : 1;
            }
            res.ap[static_cast<std::size_t>(c) * T + t] = average_precision(labels, gt_per_class[c]);
        }
        res.counts[t].tp = tp_total;
        res.counts[t].fp = fp_total;
        res.counts[t].fn = total_gt - tp_total;
    }

    int classes_with_gt = 0;
    for (int c = 0; c < num_classes; ++c) classes_with_gt += res.class_has_gt[c];

    auto mean_at = [&](int t) {
        if (classes_with_gt == 0) return 0.0;
        double s = 0.0;
        for (int c = 0; c < num_classes; ++c) {
            if (res.class_has_gt[c]) s += res.ap_at(c, t);
        }
        return s / classes_with_gt;
    };

    double map_sum = 0.0;
    for (int t = 0; t < T; ++t) map_sum += mean_at(t);
    res.map = classes_with_gt == 0 ? 0.0 : map_sum / T;

    res.ap50 = std::numeric_limits<double>::quiet_NaN();
    res.ap75 = std::numeric_limits<double>::quiet_NaN();
    for (int t = 0; t < T; ++t) {
        if (std::abs(cfg.thresholds[t] - 0.50) < 1e-9) res.ap50 = mean_at(t);
        if (std::abs(cfg.thresholds[t] - 0.75) < 1e-9) res.ap75 = mean_at(t);
    }
    return res;
}

}  // namespace yolokit
