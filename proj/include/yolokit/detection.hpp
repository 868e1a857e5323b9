// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "yolokit/geometry.hpp"

namespace yolokit {

// One decoded candidate: the unit flowing through NMS and evaluation.
// iou_pred is 1.0 when the localization-confidence branch is disabled, so
// the fused score degrades to the classic cls * objectness product.
struct Detection {
    Box box;
    int class_id = 0;
    double cls_prob = 0.0;
    double objectness = 0.0;
    double iou_pred = 1.0;
    double score = 0.0;
};

// Detection confidence entering NMS: predicted localization quality
// multiplied into the classification probability and objectness score.
inline double fuse_scores(double cls_prob, double objectness, double iou_pred) {
    return cls_prob * objectness * iou_pred;
}

}  // namespace yolokit
