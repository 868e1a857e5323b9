// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "yolokit/assign.hpp"
#include "yolokit/detection.hpp"
#include "yolokit/ema.hpp"
#include "yolokit/eval.hpp"
#include "yolokit/featops.hpp"
#include "yolokit/geometry.hpp"
#include "yolokit/headcodec.hpp"
#include "yolokit/io.hpp"
#include "yolokit/losses.hpp"
#include "yolokit/math.hpp"
#include "yolokit/nms.hpp"
#include "yolokit/synth.hpp"
#include "yolokit/tensor.hpp"
