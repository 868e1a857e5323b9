// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "yolokit/assign.hpp"
#include "yolokit/geometry.hpp"
#include "yolokit/headcodec.hpp"
#include "yolokit/math.hpp"
#include "yolokit/tensor.hpp"

namespace yolokit {

struct LossWeights {
    double cls = 1.0;
    double obj = 1.0;
    double l1 = 1.0;
    double iou = 1.0;
    double iou_aware = 1.0;

    void validate() const {
        if (cls < 0 || obj < 0 || l1 < 0 || iou < 0 || iou_aware < 0) {
            throw std::invalid_argument("LossWeights: weights must be nonnegative");
        }
    }
};

enum class ClsForm { kSigmoidBce, kSoftmaxCe };
enum class IouForm { kNegLog, kOneMinus };

struct LossConfig {
    ClsForm cls_form = ClsForm::kSigmoidBce;
    IouForm iou_form = IouForm::kNegLog;
    double iou_eps = 1e-9;  // floor under the overlap before the log
};

struct ScalarLoss {
    double value = 0.0;
    double grad = 0.0;
};

struct ClsLoss {
    double value = 0.0;
    std::vector<double> grad;
};

struct BoxLoss {
    double value = 0.0;
    RawBox grad;
};

// Binary cross entropy against a (possibly soft) target, on the logit.
// value = softplus(z) - t*z, grad = sigmoid(z) - t.
inline ScalarLoss bce_with_logit(double z, double t) {
    return {softplus(z) - t * z, sigmoid(z) - t};
}

// Classification loss over K class channels. The default treats each class
// as an independent sigmoid (multi-label); softmax cross entropy is the
// alternative form.
inline ClsLoss cls_loss(std::span<const double> class_logits, int target_class,
                        ClsForm form = ClsForm::kSigmoidBce) {
    const int K = static_cast<int>(class_logits.size());
    if (target_class < 0 || target_class >= K) {
        throw std::invalid_argument("cls_loss: target class out of range");
    }
    ClsLoss out;
    out.grad.resize(K);
    if (form == ClsForm::kSigmoidBce) {
        for (int k = 0; k < K; ++k) {
            const double t = (k == target_class) ? 1.0 : 0.0;
            const ScalarLoss b = bce_with_logit(class_logits[k], t);
            out.value += b.value;
            out.grad[k] = b.grad;
        }
    } else {
        double m = class_logits[0];
        for (int k = 1; k < K; ++k) m = std::max(m, class_logits[k]);
        double sum = 0.0;
        for (int k = 0; k < K; ++k) sum += std::exp(class_logits[k] - m);
        const double lse = m + std::log(sum);
        out.value = lse - class_logits[target_class];
        for (int k = 0; k < K; ++k) {
            out.grad[k] = std::exp(class_logits[k] - lse) - (k == target_class ? 1.0 : 0.0);
        }
    }
    return out;
}

// Objectness supervision; an ignored slot contributes nothing.
inline ScalarLoss obj_loss(double obj_logit, int target, bool ignore = false) {
    if (ignore) return {0.0, 0.0};
    return bce_with_logit(obj_logit, target != 0 ? 1.0 : 0.0);
}

// L1 in raw (encoded) space. Subgradient: sign, zero at ties.
inline BoxLoss l1_box_loss(const RawBox& raw, const RawBox& target) {
    auto one = [](double r, double t, double& g) {
        const double d = r - t;
        g = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        return std::abs(d);
    };
    BoxLoss out;
    out.value = one(raw.px, target.px, out.grad.px) + one(raw.py, target.py, out.grad.py) +
                one(raw.pw, target.pw, out.grad.pw) + one(raw.ph, target.ph, out.grad.ph);
    return out;
}

namespace detail {

// d IoU / d(corner) for the moving box against a fixed one. Corner ties use
// the midpoint subgradient (tie_step) so the gradient is exactly zero when
// the boxes coincide.
struct IouPartials {
    double value = 0.0;
    double dx1 = 0.0, dy1 = 0.0, dx2 = 0.0, dy2 = 0.0;
};

inline IouPartials iou_partials(const Box& b, const Box& gt) {
    IouPartials out;
    const double iw = std::min(b.x_max, gt.x_max) - std::max(b.x_min, gt.x_min);
    const double ih = std::min(b.y_max, gt.y_max) - std::max(b.y_min, gt.y_min);
    const double area_b = b.area();
    const double area_g = gt.area();
    const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    const double uni = area_b + area_g - inter;
    if (uni <= 0.0) return out;
    out.value = inter / uni;

    double di_dx1 = 0.0, di_dx2 = 0.0, di_dy1 = 0.0, di_dy2 = 0.0;
    if (iw > 0.0 && ih > 0.0) {
        di_dx1 = -tie_step(gt.x_min, b.x_min) * ih;
        di_dx2 = tie_step(b.x_max, gt.x_max) * ih;
        di_dy1 = -tie_step(gt.y_min, b.y_min) * iw;
        di_dy2 = tie_step(b.y_max, gt.y_max) * iw;
    }
    const double w = b.width();
    const double h = b.height();
    const double da_dx1 = -h, da_dx2 = h, da_dy1 = -w, da_dy2 = w;

    const double inv_u2 = 1.0 / (uni * uni);
    auto dv = [&](double di, double da) { return (di * uni - inter * (da - di)) * inv_u2; };
    out.dx1 = dv(di_dx1, da_dx1);
    out.dx2 = dv(di_dx2, da_dx2);
    out.dy1 = dv(di_dy1, da_dy1);
    out.dy2 = dv(di_dy2, da_dy2);
    return out;
}

}  // namespace detail

// Overlap-driven regression branch: -log(max(IoU, eps)) of the decoded box
// against the ground truth, differentiated through the grid-sensitive
// center decode and the exponential size decode. Runs alongside the L1
// term, never instead of it.
inline BoxLoss iou_loss(const RawBox& raw, const Box& gt, int gx, int gy, const Anchor& anchor,
                        int stride, double alpha, IouForm form = IouForm::kNegLog,
                        double size_clamp = 10.0, double eps = 1e-9) {
    if (gt.area() <= 0.0) throw std::invalid_argument("iou_loss: ground truth box is degenerate");
    const Box b = decode_box(raw, gx, gy, anchor, stride, alpha, size_clamp);
    const detail::IouPartials p = detail::iou_partials(b, gt);

    BoxLoss out;
    double dloss_dv;
    if (form == IouForm::kNegLog) {
        const double v = std::max(p.value, eps);
        out.value = -std::log(v);
        dloss_dv = p.value > eps ? -1.0 / p.value : 0.0;
    } else {
        out.value = 1.0 - p.value;
        dloss_dv = -1.0;
    }

    const double dl_dx1 = dloss_dv * p.dx1;
    const double dl_dx2 = dloss_dv * p.dx2;
    const double dl_dy1 = dloss_dv * p.dy1;
    const double dl_dy2 = dloss_dv * p.dy2;

    // Corners in terms of center and size: x1 = cx - w/2, x2 = cx + w/2.
    const double dl_dcx = dl_dx1 + dl_dx2;
    const double dl_dcy = dl_dy1 + dl_dy2;
    const double dl_dw = 0.5 * (dl_dx2 - dl_dx1);
    const double dl_dh = 0.5 * (dl_dy2 - dl_dy1);

    const double dcx_dpx = stride * alpha * sigmoid_grad(raw.px);
    const double dcy_dpy = stride * alpha * sigmoid_grad(raw.py);
    auto clamp_gate = [size_clamp](double p_) {
        const double a = std::abs(p_);
        return a < size_clamp ? 1.0 : (a == size_clamp ? 0.5 : 0.0);
    };
    const double dw_dpw = b.width() * clamp_gate(raw.pw);
    const double dh_dph = b.height() * clamp_gate(raw.ph);

    out.grad.px = dl_dcx * dcx_dpx;
    out.grad.py = dl_dcy * dcy_dpy;
    out.grad.pw = dl_dw * dw_dpw;
    out.grad.ph = dl_dh * dh_dph;
    return out;
}

// Localization-confidence supervision: BCE between the predicted-IoU logit
// and the measured overlap, treated as a constant target.
inline ScalarLoss iou_aware_loss(double iou_logit, double measured_iou) {
    if (measured_iou < 0.0 || measured_iou > 1.0) {
        throw std::invalid_argument("iou_aware_loss: measured IoU must lie in [0,1]");
    }
    return bce_with_logit(iou_logit, measured_iou);
}

struct LossReport {
    double cls = 0.0;
    double obj = 0.0;
    double l1 = 0.0;
    double iou = 0.0;
    double iou_aware = 0.0;
    double total = 0.0;
    int num_positives = 0;
    // Gradient of the weighted total with respect to every raw channel,
    // shaped like the input head tensors (one per level).
    std::vector<Tensor3<double>> grad;
};

// Weighted sum of the five terms over a target map. cls/l1/iou/iou-aware
// run over positive slots, objectness over positives and non-ignored
// negatives; every per-term sum is normalized by max(1, #positives).
// Accumulation is slot row-major so results are bitwise reproducible.
inline LossReport total_loss(const std::vector<Tensor3<double>>& heads, const TargetMap& targets,
                             const HeadLayout& layout, const std::vector<PyramidLevel>& levels,
                             const LossWeights& weights, const DecodeConfig& decode_cfg,
                             const LossConfig& loss_cfg = {}) {
    layout.validate();
    weights.validate();
    decode_cfg.validate();
    if (heads.size() != targets.levels.size() || heads.size() != levels.size()) {
        throw std::invalid_argument("total_loss: heads, targets and levels must align");
    }

    LossReport report;
    report.num_positives = targets.num_positives();
    const double norm = 1.0 / std::max(1, report.num_positives);
    const int K = layout.num_classes;
    const int per_anchor = layout.channels_per_anchor();

    report.grad.reserve(heads.size());
    for (const auto& head : heads) report.grad.emplace_back(head.channels, head.height, head.width);

    std::vector<double> logits(K);
    for (std::size_t li = 0; li < heads.size(); ++li) {
        const auto& head = heads[li];
        const auto& lt = targets.levels[li];
        auto& grad = report.grad[li];
        if (head.channels != layout.total_channels() || head.height != lt.grid_h ||
            head.width != lt.grid_w) {
            throw std::invalid_argument("total_loss: head tensor shape disagrees with target map");
        }
        if (lt.anchors != layout.anchors_per_cell ||
            static_cast<int>(levels[li].anchors.size()) != lt.anchors) {
            throw std::invalid_argument("total_loss: anchor counts disagree");
        }
        const int stride = levels[li].stride();

        for (int gy = 0; gy < lt.grid_h; ++gy) {
            for (int gx = 0; gx < lt.grid_w; ++gx) {
                for (int a = 0; a < lt.anchors; ++a) {
                    const SlotTarget& slot = lt.at(gy, gx, a);
                    const int base = a * per_anchor;
                    const int obj_ch = base + layout.obj_offset();

                    if (!slot.positive) {
                        if (slot.ignore) continue;
                        const ScalarLoss o = obj_loss(head.at(obj_ch, gy, gx), 0);
                        report.obj += o.value;
                        grad.at(obj_ch, gy, gx) += weights.obj * norm * o.grad;
                        continue;
                    }

                    const Anchor& anchor = levels[li].anchors[a];
                    for (int k = 0; k < K; ++k) logits[k] = head.at(base + k, gy, gx);
                    const RawBox raw{head.at(base + layout.box_offset() + 0, gy, gx),
                                     head.at(base + layout.box_offset() + 1, gy, gx),
                                     head.at(base + layout.box_offset() + 2, gy, gx),
                                     head.at(base + layout.box_offset() + 3, gy, gx)};

                    const ClsLoss c = cls_loss(logits, slot.class_id, loss_cfg.cls_form);
                    report.cls += c.value;
                    for (int k = 0; k < K; ++k) grad.at(base + k, gy, gx) += weights.cls * norm * c.grad[k];

                    const ScalarLoss o = obj_loss(head.at(obj_ch, gy, gx), 1);
                    report.obj += o.value;
                    grad.at(obj_ch, gy, gx) += weights.obj * norm * o.grad;

                    const BoxLoss l1 = l1_box_loss(raw, slot.box);
                    report.l1 += l1.value;

                    const Box gt = decode_box(slot.box, gx, gy, anchor, stride, decode_cfg.alpha,
                                              decode_cfg.size_logit_clamp);
                    const BoxLoss il = iou_loss(raw, gt, gx, gy, anchor, stride, decode_cfg.alpha,
                                                loss_cfg.iou_form, decode_cfg.size_logit_clamp,
                                                loss_cfg.iou_eps);
                    report.iou += il.value;

                    const double bg = weights.l1 * norm;
                    const double ig = weights.iou * norm;
                    grad.at(base + layout.box_offset() + 0, gy, gx) += bg * l1.grad.px + ig * il.grad.px;
                    grad.at(base + layout.box_offset() + 1, gy, gx) += bg * l1.grad.py + ig * il.grad.py;
                    grad.at(base + layout.box_offset() + 2, gy, gx) += bg * l1.grad.pw + ig * il.grad.pw;
                    grad.at(base + layout.box_offset() + 3, gy, gx) += bg * l1.grad.ph + ig * il.grad.ph;

                    if (layout.iou_aware) {
                        const Box decoded = decode_box(raw, gx, gy, anchor, stride, decode_cfg.alpha,
                                                       decode_cfg.size_logit_clamp);
                        const double measured = iou(decoded, gt);
                        const int iou_ch = base + layout.iou_offset();
                        const ScalarLoss ia = iou_aware_loss(head.at(iou_ch, gy, gx), measured);
                        report.iou_aware += ia.value;
                        grad.at(iou_ch, gy, gx) += weights.iou_aware * norm * ia.grad;
                    }
                }
            }
        }
    }

    report.cls *= norm;
    report.obj *= norm;
    report.l1 *= norm;
    report.iou *= norm;
    report.iou_aware *= norm;
    report.total = weights.cls * report.cls + weights.obj * report.obj + weights.l1 * report.l1 +
                   weights.iou * report.iou + weights.iou_aware * report.iou_aware;
    return report;
}

}  // namespace yolokit
