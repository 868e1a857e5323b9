#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include <yolokit/nms.hpp>

#include "test_support.hpp"

using namespace yolokit;

namespace {

Detection det(double x, double y, double w, double h, int cls, double score) {
    Detection d;
    d.box = Box{x, y, x + w, y + h};
    d.class_id = cls;
    d.cls_prob = score;
    d.objectness = 1.0;
    d.iou_pred = 1.0;
    d.score = score;
    return d;
}

}  // namespace

TEST_CASE("score fusion is a plain product", "[nms]") {
    CHECK(fuse_scores(1.0, 1.0, 1.0) == 1.0);
    CHECK_THAT(fuse_scores(0.8, 0.9, 0.5), Catch::Matchers::WithinAbs(0.36, 1e-15));
    // Disabled confidence branch degrades to cls * objectness.
    CHECK(fuse_scores(0.7, 0.6, 1.0) == 0.7 * 0.6);
}

TEST_CASE("single detections pass through every method", "[nms]") {
    const std::vector<Detection> one{det(10, 10, 20, 20, 0, 0.9)};
    for (NmsMethod m : {NmsMethod::kGreedy, NmsMethod::kSoft, NmsMethod::kMatrix}) {
        NmsConfig cfg;
        cfg.method = m;
        const auto out = run_nms(one, cfg);
        REQUIRE(out.size() == 1);
        CHECK(out[0].score == 0.9);
        CHECK(out[0].class_id == 0);
    }
}

TEST_CASE("greedy suppression drops heavy overlaps", "[nms]") {
    // 30x20 boxes offset by 7.5: inter = 450, union = 750, IoU = 0.6.
    std::vector<Detection> dets{det(0, 0, 30, 20, 0, 0.9), det(7.5, 0, 30, 20, 0, 0.8)};
    REQUIRE_THAT(iou(dets[0].box, dets[1].box), Catch::Matchers::WithinAbs(0.6, 1e-12));

    NmsConfig cfg;
    cfg.method = NmsMethod::kGreedy;
    const auto out = greedy_nms(dets, cfg);
    REQUIRE(out.size() == 1);
    CHECK(out[0].score == 0.9);

    // Different classes are untouched by per-class suppression.
    dets[1].class_id = 1;
    CHECK(greedy_nms(dets, cfg).size() == 2);

    cfg.per_class = false;
    CHECK(greedy_nms(dets, cfg).size() == 1);
}

TEST_CASE("greedy matches the repeated-scan reference", "[nms]") {
    std::mt19937_64 rng(21);
    NmsConfig cfg;
    cfg.method = NmsMethod::kGreedy;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(uniform_int_in(rng, 0, 63));
        const auto dets = testsupport::random_dets(rng, n, 4);
        const auto fast = greedy_nms(dets, cfg);
        const auto slow = testsupport::reference_greedy(dets, cfg);
        CHECK(testsupport::same_detections(fast, slow, 0.0));
    }
}

TEST_CASE("kept greedy boxes never exceed the overlap threshold", "[nms]") {
    std::mt19937_64 rng(22);
    NmsConfig cfg;
    cfg.method = NmsMethod::kGreedy;
    const auto dets = testsupport::random_dets(rng, 80, 3);
    const auto out = greedy_nms(dets, cfg);
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t j = i + 1; j < out.size(); ++j) {
            if (out[i].class_id != out[j].class_id) continue;
            CHECK(iou(out[i].box, out[j].box) <= cfg.iou_threshold);
        }
    }
    // Scores of kept detections are original input scores.
    for (const auto& d : out) {
        const bool found = std::any_of(dets.begin(), dets.end(),
                                       [&](const Detection& s) { return s.score == d.score; });
        CHECK(found);
    }
}

TEST_CASE("coincident boxes decay by the closed form", "[nms]") {
    const std::vector<Detection> dets{det(50, 50, 40, 40, 0, 0.9), det(50, 50, 40, 40, 0, 0.8)};
    NmsConfig cfg;
    cfg.method = NmsMethod::kMatrix;

    const auto out = matrix_nms(dets, cfg);
    REQUIRE(out.size() == 2);
    CHECK(out[0].score == 0.9);
    const double e2 = std::exp(-1.0 / 0.5);
    CHECK_THAT(e2, Catch::Matchers::WithinAbs(0.1353352832366127, 1e-15));
    CHECK_THAT(out[1].score, Catch::Matchers::WithinAbs(0.8 * e2, 1e-15));
    CHECK_THAT(out[1].score, Catch::Matchers::WithinAbs(0.10826822658929016, 1e-15));

    // The sequential variant agrees exactly on two boxes.
    cfg.method = NmsMethod::kSoft;
    const auto soft = soft_nms_sequential(dets, cfg);
    REQUIRE(soft.size() == 2);
    CHECK(soft[1].score == out[1].score);

    // Linear kernel: decay = 1 - iou = 0, which the post threshold removes.
    cfg.kernel = DecayKernel::kLinear;
    cfg.method = NmsMethod::kMatrix;
    const auto lin = matrix_nms(dets, cfg);
    REQUIRE(lin.size() == 1);
    CHECK(lin[0].score == 0.9);
}

TEST_CASE("disjoint detections keep their scores", "[nms]") {
    const std::vector<Detection> dets{det(0, 0, 10, 10, 0, 0.9), det(50, 0, 10, 10, 0, 0.7),
                                      det(0, 50, 10, 10, 0, 0.5)};
    for (NmsMethod m : {NmsMethod::kSoft, NmsMethod::kMatrix}) {
        NmsConfig cfg;
        cfg.method = m;
        const auto out = run_nms(dets, cfg);
        REQUIRE(out.size() == 3);
        CHECK(out[0].score == 0.9);
        CHECK(out[1].score == 0.7);
        CHECK(out[2].score == 0.5);
    }
}

TEST_CASE("matrix rescoring matches the naive triple loop", "[nms]") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(uniform_int_in(rng, 0, 127));
        const auto dets = testsupport::random_dets(rng, n, 4);
        NmsConfig cfg;
        cfg.method = NmsMethod::kMatrix;
        cfg.kernel = trial % 2 == 0 ? DecayKernel::kGaussian : DecayKernel::kLinear;
        const auto fast = matrix_nms(dets, cfg);
        const auto slow = testsupport::naive_matrix(dets, cfg);
        CHECK(testsupport::same_detections(fast, slow, 1e-6));
    }
}

TEST_CASE("two-box instances rescore identically in soft and matrix", "[nms]") {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto dets = testsupport::random_dets(rng, 2, 1);
        for (DecayKernel k : {DecayKernel::kGaussian, DecayKernel::kLinear}) {
            NmsConfig cfg;
            cfg.kernel = k;
            cfg.method = NmsMethod::kSoft;
            const auto soft = soft_nms_sequential(dets, cfg);
            cfg.method = NmsMethod::kMatrix;
            const auto matrix = matrix_nms(dets, cfg);
            CHECK(testsupport::same_detections(soft, matrix, 0.0));
        }
    }
}

TEST_CASE("rescored values never exceed the originals", "[nms]") {
    std::mt19937_64 rng(25);
    const auto dets = testsupport::random_dets(rng, 96, 3);
    for (NmsMethod m : {NmsMethod::kSoft, NmsMethod::kMatrix}) {
        NmsConfig cfg;
        cfg.method = m;
        for (const auto& d : run_nms(dets, cfg)) {
            // The untouched probability fields recover each input's score.
            CHECK(d.score <= fuse_scores(d.cls_prob, d.objectness, d.iou_pred) + 1e-15);
            CHECK(d.score >= cfg.post_threshold);
        }
    }
}

TEST_CASE("input order changes nothing when scores are distinct", "[nms]") {
    std::mt19937_64 rng(26);
    for (int trial = 0; trial < 20; ++trial) {
        auto dets = testsupport::random_dets(rng, 40, 3);
        // Force distinct scores so tie-breaking never enters.
        std::vector<double> scores(dets.size());
        for (std::size_t i = 0; i < dets.size(); ++i) scores[i] = 0.1 + 0.8 * i / dets.size();
        std::shuffle(scores.begin(), scores.end(), rng);
        for (std::size_t i = 0; i < dets.size(); ++i) dets[i].score = scores[i];

        auto shuffled = dets;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (NmsMethod m : {NmsMethod::kGreedy, NmsMethod::kSoft, NmsMethod::kMatrix}) {
            NmsConfig cfg;
            cfg.method = m;
            const auto a = run_nms(dets, cfg);
            const auto b = run_nms(shuffled, cfg);
            CHECK(testsupport::same_detections(a, b, 1e-12));
        }
    }
}

TEST_CASE("ties break toward the earlier input index", "[nms]") {
    // Two coincident same-score boxes: greedy keeps the first.
    const std::vector<Detection> dets{det(10, 10, 20, 20, 0, 0.8), det(10, 10, 20, 20, 0, 0.8),
                                      det(70, 70, 20, 20, 0, 0.8)};
    NmsConfig cfg;
    cfg.method = NmsMethod::kGreedy;
    const auto out = greedy_nms(dets, cfg);
    REQUIRE(out.size() == 2);
    CHECK(out[0].box.x_min == 10.0);
    CHECK(out[1].box.x_min == 70.0);
}

TEST_CASE("the detection cap truncates after sorting", "[nms]") {
    std::vector<Detection> dets;
    for (int i = 0; i < 30; ++i) {
        dets.push_back(det(i * 40.0, 0, 20, 20, 0, 0.1 + 0.02 * i));
    }
    NmsConfig cfg;
    cfg.method = NmsMethod::kMatrix;
    cfg.max_detections = 5;
    const auto out = matrix_nms(dets, cfg);
    REQUIRE(out.size() == 5);
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].score >= out[i].score);
    CHECK(out[0].score == 0.1 + 0.02 * 29);
}

TEST_CASE("empty input yields empty output", "[nms]") {
    NmsConfig cfg;
    for (NmsMethod m : {NmsMethod::kGreedy, NmsMethod::kSoft, NmsMethod::kMatrix}) {
        cfg.method = m;
        CHECK(run_nms({}, cfg).empty());
    }
}

TEST_CASE("configuration bounds are enforced", "[nms]") {
    NmsConfig cfg;
    cfg.iou_threshold = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = NmsConfig{};
    cfg.sigma = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = NmsConfig{};
    cfg.post_threshold = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = NmsConfig{};
    cfg.max_detections = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
