// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace yolokit {

// Exponential moving average over a flat parameter vector:
//   shadow' = decay * shadow + (1 - decay) * params.
// decay = 0 tracks the parameters exactly; decay close to 1 averages over
// roughly 1/(1-decay) recent steps.
class EmaTracker {
  public:
    EmaTracker(std::size_t size, double decay) : decay_(decay), shadow_(size, 0.0) {
        if (!(decay >= 0.0 && decay < 1.0)) {
            throw std::invalid_argument("EmaTracker: decay must lie in [0, 1)");
        }
        if (size == 0) throw std::invalid_argument("EmaTracker: empty parameter vector");
    }

    EmaTracker(const std::vector<double>& init, double decay)
        : EmaTracker(init.size(), decay) {
        shadow_ = init;
    }

    void update(const std::vector<double>& params) {
        if (params.size() != shadow_.size()) {
            throw std::invalid_argument("EmaTracker: parameter size changed");
        }
        const double keep = decay_;
        const double take = 1.0 - decay_;
        for (std::size_t i = 0; i < shadow_.size(); ++i) {
            shadow_[i] = keep * shadow_[i] + take * params[i];
        }
        ++steps_;
    }

    const std::vector<double>& shadow() const { return shadow_; }
    double decay() const { return decay_; }
    std::size_t steps() const { return steps_; }

  private:
    double decay_;
    std::vector<double> shadow_;
    std::size_t steps_ = 0;
};

}  // namespace yolokit
