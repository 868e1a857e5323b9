// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "yolokit/detection.hpp"
#include "yolokit/geometry.hpp"

namespace yolokit {

enum class NmsMethod { kGreedy, kSoft, kMatrix };
enum class DecayKernel { kLinear, kGaussian };

struct NmsConfig {
    NmsMethod method = NmsMethod::kMatrix;
    double iou_threshold = 0.45;  // greedy suppression cutoff
    DecayKernel kernel = DecayKernel::kGaussian;
    double sigma = 0.5;
    double post_threshold = 0.01;  // rescored detections below this are dropped
    int max_detections = 100;
    bool per_class = true;

    void validate() const {
        if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
            throw std::invalid_argument("NmsConfig: iou_threshold must lie in (0, 1)");
        }
        if (!(post_threshold > 0.0 && post_threshold < 1.0)) {
            throw std::invalid_argument("NmsConfig: post_threshold must lie in (0, 1)");
        }
        if (!(sigma > 0.0)) throw std::invalid_argument("NmsConfig: sigma must be positive");
        if (max_detections < 1) throw std::invalid_argument("NmsConfig: max_detections must be >= 1");
    }
};

// Monotone decreasing rescoring kernel on an overlap value.
inline double decay_fn(double u, DecayKernel kernel, double sigma) {
    return kernel == DecayKernel::kLinear ? 1.0 - u : std::exp(-u * u / sigma);
}

namespace detail {

// Indices of dets grouped for suppression: one group per class, or a single
// group covering everything when per-class is off. Map keys keep the
// grouping order deterministic.
inline std::map<int, std::vector<int>> suppression_groups(const std::vector<Detection>& dets,
                                                          bool per_class) {
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < static_cast<int>(dets.size()); ++i) {
        groups[per_class ? dets[i].class_id : 0].push_back(i);
    }
    return groups;
}

// Sorts group members by score descending, input index ascending.
inline void sort_by_score(std::vector<int>& idx, const std::vector<Detection>& dets) {
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        return a < b;
    });
}

struct Scored {
    int index;  // position in the input list
    double score;
};

// Shared tail: drop below the post threshold (when filtering), order by
// final score with input-index ties, cap the list.
inline std::vector<Detection> finalize(std::vector<Scored> cand, const std::vector<Detection>& dets,
                                       const NmsConfig& cfg, bool apply_post_threshold) {
    if (apply_post_threshold) {
        std::erase_if(cand, [&](const Scored& s) { return s.score < cfg.post_threshold; });
    }
    std::sort(cand.begin(), cand.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.index < b.index;
    });
    if (static_cast<int>(cand.size()) > cfg.max_detections) cand.resize(cfg.max_detections);
    std::vector<Detection> out;
    out.reserve(cand.size());
    for (const Scored& s : cand) {
        Detection d = dets[s.index];
        d.score = s.score;
        out.push_back(d);
    }
    return out;
}

}  // namespace detail

// Classical suppression: keep the best remaining detection, discard
// everything overlapping it beyond the threshold. Scores are not touched.
inline std::vector<Detection> greedy_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
    cfg.validate();
    std::vector<detail::Scored> kept;
    for (auto& [cls, idx] : detail::suppression_groups(dets, cfg.per_class)) {
        detail::sort_by_score(idx, dets);
        std::vector<bool> suppressed(idx.size(), false);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (suppressed[i]) continue;
            kept.push_back({idx[i], dets[idx[i]].score});
            for (std::size_t j = i + 1; j < idx.size(); ++j) {
                if (suppressed[j]) continue;
                if (iou(dets[idx[i]].box, dets[idx[j]].box) > cfg.iou_threshold) {
                    suppressed[j] = true;
                }
            }
        }
    }
    return detail::finalize(std::move(kept), dets, cfg, false);
}

// Sequential soft suppression: repeatedly select the best remaining
// detection and decay every other remaining score by its overlap with the
// selection. Nothing is pruned mid-flight; the post threshold runs once at
// the end.
inline std::vector<Detection> soft_nms_sequential(const std::vector<Detection>& dets,
                                                  const NmsConfig& cfg) {
    cfg.validate();
    std::vector<detail::Scored> rescored;
    for (auto& [cls, idx] : detail::suppression_groups(dets, cfg.per_class)) {
        std::vector<double> score(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) score[i] = dets[idx[i]].score;
        std::vector<bool> selected(idx.size(), false);
        for (std::size_t round = 0; round < idx.size(); ++round) {
            int best = -1;
            for (std::size_t i = 0; i < idx.size(); ++i) {
                if (selected[i]) continue;
                if (best < 0 || score[i] > score[best] ||
                    (score[i] == score[best] && idx[i] < idx[best])) {
                    best = static_cast<int>(i);
                }
            }
            selected[best] = true;
            for (std::size_t i = 0; i < idx.size(); ++i) {
                if (selected[i]) continue;
                score[i] *= decay_fn(iou(dets[idx[best]].box, dets[idx[i]].box), cfg.kernel,
                                     cfg.sigma);
            }
        }
        for (std::size_t i = 0; i < idx.size(); ++i) rescored.push_back({idx[i], score[i]});
    }
    return detail::finalize(std::move(rescored), dets, cfg, true);
}

// Closed-form parallel rescoring. With detections sorted by score, each one
// is decayed by the most suppressive higher-scored neighbor, where a
// neighbor's own suppression likelihood (via its highest predecessor
// overlap) discounts its vote:
//   decay_j = min_{i<j} f(iou(i,j)) / f(max_{k<i} iou(k,i)).
inline std::vector<Detection> matrix_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
    cfg.validate();
    std::vector<detail::Scored> rescored;
    for (auto& [cls, idx] : detail::suppression_groups(dets, cfg.per_class)) {
        detail::sort_by_score(idx, dets);
        const std::size_t m = idx.size();
        std::vector<double> pair_iou(m * m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                pair_iou[i * m + j] = iou(dets[idx[i]].box, dets[idx[j]].box);
            }
        }
        std::vector<double> iou_max(m, 0.0);
        for (std::size_t i = 1; i < m; ++i) {
            double v = 0.0;
            for (std::size_t k = 0; k < i; ++k) v = std::max(v, pair_iou[k * m + i]);
            iou_max[i] = v;
        }
        for (std::size_t j = 0; j < m; ++j) {
            double decay = 1.0;
            for (std::size_t i = 0; i < j; ++i) {
                const double f_ij = decay_fn(pair_iou[i * m + j], cfg.kernel, cfg.sigma);
                const double f_max = decay_fn(iou_max[i], cfg.kernel, cfg.sigma);
                // f_max can reach zero under the linear kernel when a
                // predecessor is fully covered; such a det is certainly
                // suppressed and casts no vote.
                const double ratio =
                    f_max > 0.0 ? f_ij / f_max : std::numeric_limits<double>::infinity();
                decay = std::min(decay, ratio);
            }
            rescored.push_back({idx[j], dets[idx[j]].score * decay});
        }
    }
    return detail::finalize(std::move(rescored), dets, cfg, true);
}

// Dispatch on the configured method.
inline std::vector<Detection> run_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
    switch (cfg.method) {
        case NmsMethod::kGreedy: return greedy_nms(dets, cfg);
        case NmsMethod::kSoft: return soft_nms_sequential(dets, cfg);
        case NmsMethod::kMatrix: return matrix_nms(dets, cfg);
    }
    throw std::invalid_argument("run_nms: unknown method");
}

}  // namespace yolokit
