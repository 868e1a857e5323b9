// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace yolokit {

// Dense rank-3 array in channel-major (C, H, W) row-major order.
template <typename T>
struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Tensor3() = default;
    Tensor3(int c, int h, int w, T fill = T{})
        : channels(c), height(h), width(w) {
        if (c < 1 || h < 1 || w < 1) {
            throw std::invalid_argument("Tensor3: dims must be >= 1");
        }
        data.assign(static_cast<std::size_t>(c) * h * w, fill);
    }

    std::size_t size() const { return data.size(); }

    // For instances assembled field-by-field (e.g. after deserialization).
    void validate() const {
        if (channels < 1 || height < 1 || width < 1) {
            throw std::invalid_argument("Tensor3: dims must be >= 1");
        }
        if (data.size() != static_cast<std::size_t>(channels) * height * width) {
            throw std::invalid_argument("Tensor3: value count disagrees with dims");
        }
    }

    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * height + y) * width + x;
    }

    T& at(int c, int y, int x) { return data[index(c, y, x)]; }
    const T& at(int c, int y, int x) const { return data[index(c, y, x)]; }

    bool same_shape(const Tensor3& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

// Feature maps and raw head tensors are stored as 32-bit floats on disk;
// loss/gradient work uses the double instantiation.
using FeatureMap = Tensor3<float>;

}  // namespace yolokit
