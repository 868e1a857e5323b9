#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <yolokit/headcodec.hpp>
#include <yolokit/math.hpp>

using namespace yolokit;

TEST_CASE("channel bookkeeping", "[headcodec]") {
    HeadLayout l;
    l.num_classes = 80;
    l.anchors_per_cell = 3;
    l.iou_aware = false;
    CHECK(l.channels_per_anchor() == 85);
    CHECK(l.total_channels() == 255);
    l.iou_aware = true;
    CHECK(l.total_channels() == 258);
    CHECK(l.box_offset() == 80);
    CHECK(l.obj_offset() == 84);
    CHECK(l.iou_offset() == 85);
}

TEST_CASE("default pyramid levels", "[headcodec]") {
    const auto levels = default_levels();
    REQUIRE(levels.size() == 3);
    CHECK(levels[0].stride() == 8);
    CHECK(levels[1].stride() == 16);
    CHECK(levels[2].stride() == 32);
    CHECK(levels[0].anchors[0].w == 10.0);
    CHECK(levels[2].anchors[2].h == 326.0);
    CHECK(levels[0].grid_w(608) == 76);
    CHECK(levels[2].grid_h(608) == 19);
}

TEST_CASE("grid-sensitive decode reduces to the plain form at alpha 1", "[headcodec]") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const double px = uniform_in(rng, -6.0, 6.0);
        const double py = uniform_in(rng, -6.0, 6.0);
        const int gx = uniform_int_in(rng, 0, 18);
        const int gy = uniform_int_in(rng, 0, 18);
        const auto [cx, cy] = decode_center(px, py, gx, gy, 32, 1.0);
        CHECK(cx == 32.0 * (gx + sigmoid(px)));
        CHECK(cy == 32.0 * (gy + sigmoid(py)));
    }
}

TEST_CASE("decode center hand case at alpha 1.05", "[headcodec]") {
    // p = 0 puts the center exactly mid-cell for any alpha:
    // alpha*0.5 - (alpha-1)/2 = 0.5.
    const auto [cx, cy] = decode_center(0.0, 0.0, 3, 7, 8, 1.05);
    CHECK(cx == Catch::Approx(8.0 * 3.5).epsilon(1e-14));
    CHECK(cy == Catch::Approx(8.0 * 7.5).epsilon(1e-14));
}

TEST_CASE("decode size clamps the exponent", "[headcodec]") {
    const Anchor a{10.0, 13.0};
    const auto [w1, h1] = decode_size(0.0, 0.0, a);
    CHECK(w1 == 10.0);
    CHECK(h1 == 13.0);
    const auto [w2, h2] = decode_size(50.0, -50.0, a, 10.0);
    CHECK(w2 == Catch::Approx(10.0 * std::exp(10.0)).epsilon(1e-12));
    CHECK(h2 == Catch::Approx(13.0 * std::exp(-10.0)).epsilon(1e-12));
}

TEST_CASE("encode then decode is the identity on valid raws", "[headcodec]") {
    std::mt19937_64 rng(17);
    for (double alpha : {1.0, 1.05}) {
        for (int i = 0; i < 2000; ++i) {
            const RawBox raw{uniform_in(rng, -3.5, 3.5), uniform_in(rng, -3.5, 3.5),
                             uniform_in(rng, -8.0, 8.0), uniform_in(rng, -8.0, 8.0)};
            const int gx = uniform_int_in(rng, 0, 30);
            const int gy = uniform_int_in(rng, 0, 30);
            const Anchor anchor{uniform_in(rng, 8.0, 200.0), uniform_in(rng, 8.0, 200.0)};
            const int stride = 1 << uniform_int_in(rng, 3, 5);
            const Box box = decode_box(raw, gx, gy, anchor, stride, alpha);
            const RawBox back = encode_box(box, gx, gy, anchor, stride, alpha);
            CHECK(std::abs(back.px - raw.px) < 1e-6);
            CHECK(std::abs(back.py - raw.py) < 1e-6);
            CHECK(std::abs(back.pw - raw.pw) < 1e-6);
            CHECK(std::abs(back.ph - raw.ph) < 1e-6);
        }
    }
}

TEST_CASE("cell-boundary centers are representable only when alpha exceeds 1", "[headcodec]") {
    const Anchor anchor{16.0, 30.0};
    // Left edge of cell 4 at stride 8, and the right edge equally.
    for (double edge_cx : {32.0, 40.0}) {
        const Box b = Box::from_center(edge_cx, 36.0, 12.0, 24.0);
        CHECK_THROWS_AS(encode_box(b, 4, 4, anchor, 8, 1.0), std::domain_error);
        const RawBox raw = encode_box(b, 4, 4, anchor, 8, 1.05);
        const Box back = decode_box(raw, 4, 4, anchor, 8, 1.05);
        CHECK(std::abs(back.center_x() - edge_cx) < 1e-9);
        CHECK(std::abs(back.center_y() - 36.0) < 1e-9);
    }
    // The sigmoid levels the boundary maps to under alpha = 1.05.
    const RawBox left = encode_box(Box::from_center(32.0, 36.0, 12.0, 24.0), 4, 4, anchor, 8, 1.05);
    CHECK(sigmoid(left.px) == Catch::Approx((1.05 - 1.0) / 2.0 / 1.05).epsilon(1e-9));
    const RawBox right = encode_box(Box::from_center(40.0, 36.0, 12.0, 24.0), 4, 4, anchor, 8, 1.05);
    CHECK(sigmoid(right.px) == Catch::Approx((1.05 + 1.0) / (2.0 * 1.05)).epsilon(1e-9));
}

TEST_CASE("encode clamp eps recovers out-of-range centers approximately", "[headcodec]") {
    const Anchor anchor{16.0, 30.0};
    const Box b = Box::from_center(32.0, 36.0, 12.0, 24.0);
    const RawBox raw = encode_box(b, 4, 4, anchor, 8, 1.0, 1e-6);
    const Box back = decode_box(raw, 4, 4, anchor, 8, 1.0);
    CHECK(std::abs(back.center_x() - 32.0) < 1e-4);
}

TEST_CASE("degenerate boxes refuse to encode", "[headcodec]") {
    const Anchor anchor{16.0, 30.0};
    CHECK_THROWS_AS(encode_box(Box{10.0, 10.0, 10.0, 20.0}, 1, 1, anchor, 8, 1.05),
                    std::domain_error);
}

TEST_CASE("decode_level emits row-major cell then anchor order and filters by score",
          "[headcodec]") {
    HeadLayout layout;
    layout.num_classes = 2;
    layout.anchors_per_cell = 2;
    layout.iou_aware = false;
    PyramidLevel level;
    level.level = 3;
    level.anchors = {{10.0, 13.0}, {30.0, 30.0}};
    const int W = 16, H = 16;

    Tensor3<float> head(layout.total_channels(), 2, 2, -12.0f);
    // Strong prediction in cell (0,0) anchor 0 class 1, and cell (1,1)
    // anchor 1 class 0.
    head.at(0 * 7 + 1, 0, 0) = 12.0f;
    head.at(0 * 7 + layout.obj_offset(), 0, 0) = 12.0f;
    head.at(1 * 7 + 0, 1, 1) = 12.0f;
    head.at(1 * 7 + layout.obj_offset(), 1, 1) = 12.0f;

    DecodeConfig cfg;
    const auto dets = decode_level(head, layout, level, W, H, cfg);
    REQUIRE(dets.size() == 2);
    CHECK(dets[0].class_id == 1);
    CHECK(dets[1].class_id == 0);
    CHECK(dets[0].score > 0.99);
    CHECK(dets[0].score == fuse_scores(dets[0].cls_prob, dets[0].objectness, dets[0].iou_pred));
}

TEST_CASE("decode_level validates tensor shape", "[headcodec]") {
    HeadLayout layout;
    layout.num_classes = 2;
    layout.anchors_per_cell = 2;
    PyramidLevel level;
    level.level = 3;
    level.anchors = {{10.0, 13.0}, {30.0, 30.0}};
    Tensor3<float> wrong(5, 2, 2);
    CHECK_THROWS_AS(decode_level(wrong, layout, level, 16, 16, DecodeConfig{}),
                    std::invalid_argument);
    Tensor3<float> wrong_grid(layout.total_channels(), 3, 2);
    CHECK_THROWS_AS(decode_level(wrong_grid, layout, level, 16, 16, DecodeConfig{}),
                    std::invalid_argument);
}

TEST_CASE("decode clips to the image only when asked", "[headcodec]") {
    HeadLayout layout;
    layout.num_classes = 1;
    layout.anchors_per_cell = 1;
    PyramidLevel level;
    level.level = 3;
    level.anchors = {{300.0, 300.0}};
    Tensor3<float> head(layout.total_channels(), 2, 2, -12.0f);
    head.at(0, 0, 0) = 12.0f;
    head.at(layout.obj_offset(), 0, 0) = 12.0f;

    DecodeConfig cfg;
    cfg.clamp_to_image = true;
    auto clipped = decode_level(head, layout, level, 16, 16, cfg);
    REQUIRE(clipped.size() >= 1);
    CHECK(clipped[0].box.x_min >= 0.0);
    CHECK(clipped[0].box.x_max <= 16.0);

    cfg.clamp_to_image = false;
    auto raw = decode_level(head, layout, level, 16, 16, cfg);
    CHECK(raw[0].box.x_min < 0.0);
}

TEST_CASE("alpha below 1 is rejected", "[headcodec]") {
    DecodeConfig cfg;
    cfg.alpha = 0.99;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
