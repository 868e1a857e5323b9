// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cmath>

namespace yolokit {

// Axis-aligned box, corner form, absolute pixels. Valid when
// x_min <= x_max and y_min <= y_max; zero width or height is allowed and
// simply has zero area.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x_min + x_max); }
    double center_y() const { return 0.5 * (y_min + y_max); }

    bool valid() const { return x_min <= x_max && y_min <= y_max; }

    static Box from_center(double cx, double cy, double w, double h) {
        return Box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
    }

    Box clipped(double img_w, double img_h) const {
        auto cl = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
        return Box{cl(x_min, img_w), cl(y_min, img_h), cl(x_max, img_w), cl(y_max, img_h)};
    }
};

inline double intersection_area(const Box& a, const Box& b) {
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    return iw * ih;
}

// |a n b| / |a u b|. A zero-area union is defined as IoU 0 so that
// degenerate boxes coming out of image clamping flow through NMS and
// evaluation without special cases.
inline double iou(const Box& a, const Box& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

inline Box enclosing_box(const Box& a, const Box& b) {
    return Box{std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min),
               std::max(a.x_max, b.x_max), std::max(a.y_max, b.y_max)};
}

// IoU minus the normalized empty slack of the smallest enclosing box;
// range [-1, 1].
inline double giou(const Box& a, const Box& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    const double base = uni <= 0.0 ? 0.0 : inter / uni;
    const double enc = enclosing_box(a, b).area();
    if (enc <= 0.0) return base;
    return base - (enc - uni) / enc;
}

// IoU of two sizes as if the boxes shared a center. Used for anchor shape
// matching, where position must not influence the choice.
inline double shape_iou(double w_a, double h_a, double w_b, double h_b) {
    const double inter = std::min(w_a, w_b) * std::min(h_a, h_b);
    const double uni = w_a * h_a + w_b * h_b - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

}  // namespace yolokit
