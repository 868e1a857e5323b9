// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "yolokit/math.hpp"
#include "yolokit/tensor.hpp"

namespace yolokit {

struct DropBlockConfig {
    int block_size = 3;
    double keep_prob = 0.9;
    std::uint64_t seed = 0;

    void validate() const {
        if (block_size < 1 || block_size % 2 == 0) {
            throw std::invalid_argument("DropBlockConfig: block_size must be odd and positive");
        }
        if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
            throw std::invalid_argument("DropBlockConfig: keep_prob must lie in (0, 1]");
        }
    }
};

struct DropBlockMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> keep;  // row-major, 1 = kept
    double scale = 1.0;              // cell count / kept count

    // Multiplies every channel by the mask and renormalizes the survivors.
    void apply(FeatureMap& fm) const {
        if (fm.height != height || fm.width != width) {
            throw std::invalid_argument("DropBlockMask: feature map dims disagree with mask");
        }
        for (int c = 0; c < fm.channels; ++c) {
            for (int i = 0; i < height * width; ++i) {
                float& v = fm.data[static_cast<std::size_t>(c) * height * width + i];
                v = keep[i] ? static_cast<float>(v * scale) : 0.0f;
            }
        }
    }
};

// Structured dropout: seed cells fire with rate gamma and each seed zeroes
// a block_size x block_size square centered on it, clipped at the borders.
// gamma carries the usual correction so the expected kept fraction tracks
// keep_prob:
//   gamma = (1 - keep_prob) / block^2 * H*W / ((H - block + 1) * (W - block + 1)).
inline DropBlockMask dropblock_mask(int height, int width, const DropBlockConfig& cfg) {
    cfg.validate();
    if (height < cfg.block_size || width < cfg.block_size) {
        throw std::invalid_argument("dropblock_mask: map smaller than block_size");
    }
    DropBlockMask out;
    out.height = height;
    out.width = width;
    out.keep.assign(static_cast<std::size_t>(height) * width, 1);

    const double area = static_cast<double>(height) * width;
    const double valid = static_cast<double>(height - cfg.block_size + 1) *
                         static_cast<double>(width - cfg.block_size + 1);
    const double gamma =
        (1.0 - cfg.keep_prob) / (static_cast<double>(cfg.block_size) * cfg.block_size) * area / valid;

    std::mt19937_64 rng(cfg.seed);
    const int r = cfg.block_size / 2;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (uniform_unit(rng) >= gamma) continue;
            const int y0 = std::max(0, y - r);
            const int y1 = std::min(height - 1, y + r);
            const int x0 = std::max(0, x - r);
            const int x1 = std::min(width - 1, x + r);
            for (int yy = y0; yy <= y1; ++yy) {
                for (int xx = x0; xx <= x1; ++xx) {
                    out.keep[static_cast<std::size_t>(yy) * width + xx] = 0;
                }
            }
        }
    }

    std::size_t kept = 0;
    for (std::uint8_t k : out.keep) kept += k;
    out.scale = kept > 0 ? area / static_cast<double>(kept) : 1.0;
    return out;
}

// Appends normalized coordinate channels: first x then y, each linear in
// position over [-1, 1]. A single-pixel extent takes the range start.
inline FeatureMap coordconv_augment(const FeatureMap& fm) {
    fm.validate();
    FeatureMap out(fm.channels + 2, fm.height, fm.width);
    std::copy(fm.data.begin(), fm.data.end(), out.data.begin());
    const int xc = fm.channels;
    const int yc = fm.channels + 1;
    for (int y = 0; y < fm.height; ++y) {
        const float yv =
            fm.height > 1 ? -1.0f + 2.0f * static_cast<float>(y) / (fm.height - 1) : -1.0f;
        for (int x = 0; x < fm.width; ++x) {
            const float xv =
                fm.width > 1 ? -1.0f + 2.0f * static_cast<float>(x) / (fm.width - 1) : -1.0f;
            out.at(xc, y, x) = xv;
            out.at(yc, y, x) = yv;
        }
    }
    return out;
}

struct SppConfig {
    std::vector<int> kernels = {1, 5, 9, 13};

    void validate() const {
        if (kernels.empty()) throw std::invalid_argument("SppConfig: no kernels");
        for (int k : kernels) {
            if (k < 1 || k % 2 == 0) {
                throw std::invalid_argument("SppConfig: kernels must be odd and positive");
            }
        }
    }
};

// Stride-1 same-size max pool. Border windows shrink to the valid elements
// rather than reading a padding value, so negative-valued maps pool
// correctly.
inline FeatureMap max_pool_same(const FeatureMap& fm, int kernel) {
    fm.validate();
    if (kernel < 1 || kernel % 2 == 0) {
        throw std::invalid_argument("max_pool_same: kernel must be odd and positive");
    }
    if (kernel == 1) return fm;
    const int r = kernel / 2;
    FeatureMap out(fm.channels, fm.height, fm.width);
    std::vector<float> row_max(static_cast<std::size_t>(fm.height) * fm.width);
    for (int c = 0; c < fm.channels; ++c) {
        // Horizontal pass, then vertical over the row maxima.
        for (int y = 0; y < fm.height; ++y) {
            for (int x = 0; x < fm.width; ++x) {
                const int x0 = std::max(0, x - r);
                const int x1 = std::min(fm.width - 1, x + r);
                float m = fm.at(c, y, x0);
                for (int xx = x0 + 1; xx <= x1; ++xx) m = std::max(m, fm.at(c, y, xx));
                row_max[static_cast<std::size_t>(y) * fm.width + x] = m;
            }
        }
        for (int y = 0; y < fm.height; ++y) {
            const int y0 = std::max(0, y - r);
            const int y1 = std::min(fm.height - 1, y + r);
            for (int x = 0; x < fm.width; ++x) {
                float m = row_max[static_cast<std::size_t>(y0) * fm.width + x];
                for (int yy = y0 + 1; yy <= y1; ++yy) {
                    m = std::max(m, row_max[static_cast<std::size_t>(yy) * fm.width + x]);
                }
                out.at(c, y, x) = m;
            }
        }
    }
    return out;
}

// Concatenates the max-pool outputs channel-wise in kernel order.
inline FeatureMap spp_concat(const FeatureMap& fm, const SppConfig& cfg = {}) {
    fm.validate();
    cfg.validate();
    FeatureMap out(fm.channels * static_cast<int>(cfg.kernels.size()), fm.height, fm.width);
    const std::size_t block = static_cast<std::size_t>(fm.channels) * fm.height * fm.width;
    for (std::size_t i = 0; i < cfg.kernels.size(); ++i) {
        const FeatureMap pooled = max_pool_same(fm, cfg.kernels[i]);
        std::copy(pooled.data.begin(), pooled.data.end(), out.data.begin() + i * block);
    }
    return out;
}

}  // namespace yolokit
