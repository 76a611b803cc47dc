#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "painter/metrics.hpp"
#include "painter/rng.hpp"

using namespace painter;

TEST_CASE("depth metrics: perfect prediction") {
    DepthMap gt(4, 4, 3.5);
    DepthMetrics m = depth_metrics(gt, gt);
    CHECK(m.rmse == 0.0);
    CHECK(m.a_rel == 0.0);
    CHECK(m.delta1 == 1.0);
}

TEST_CASE("depth metrics: constant offset") {
    DepthMap gt(4, 4, 2.0), pred(4, 4, 3.0);
    DepthMetrics m = depth_metrics(pred, gt);
    CHECK(m.rmse == Catch::Approx(1.0));
    CHECK(m.a_rel == Catch::Approx(0.5));
    CHECK(m.delta1 == 0.0);  // ratio 1.5 >= 1.25
}

TEST_CASE("depth metrics: ratio rule for delta1") {
    DepthMap gt(2, 2, 5.0), pred(2, 2, 6.0);  // 1.2 < 1.25
    CHECK(depth_metrics(pred, gt).delta1 == 1.0);
}

TEST_CASE("depth metrics respect the validity mask") {
    DepthMap gt(1, 2, 2.0);
    gt.valid[1] = 0;
    DepthMap pred(1, 2, 2.0);
    pred.depth[1] = 9.0;  // invalid pixel, must not count
    CHECK(depth_metrics(pred, gt).rmse == 0.0);
    DepthMap none(1, 1, 1.0);
    none.valid[0] = 0;
    CHECK_THROWS_AS(depth_metrics(none, none), error);
}

TEST_CASE("miou basics") {
    LabelMap gt(4, 4, 3, 1);
    CHECK(miou(gt, gt).miou == 1.0);

    LabelMap pred(4, 4, 3, 2);  // fully disjoint single-class maps
    CHECK(miou(pred, gt).miou == 0.0);
}

TEST_CASE("miou: half-overlapping squares give one third") {
    // class-1 squares of equal size overlapping half, class-0 background
    LabelMap gt(8, 16, 2, 0), pred(8, 16, 2, 0);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) gt.at(y, x) = 1;
        for (int x = 4; x < 12; ++x) pred.at(y, x) = 1;
    }
    MiouResult r = miou(pred, gt);
    CHECK(r.per_class[1] == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("miou excludes ignore pixels") {
    LabelMap gt(2, 2, 3, kIgnoreLabel);
    gt.at(0, 0) = 1;
    LabelMap pred(2, 2, 3, 2);  // wrong everywhere that gt ignores
    pred.at(0, 0) = 1;
    CHECK(miou(pred, gt).miou == 1.0);
}

namespace {

PanopticMap one_segment_map(int h, int w, int x0, int x1, int cls, int id) {
    PanopticMap m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = x0; x < x1; ++x) m.at(y, x) = id;
    m.table.push_back({id, cls, true});
    return m;
}

}  // namespace

TEST_CASE("panoptic quality: identity is 1") {
    PanopticMap gt = one_segment_map(4, 10, 0, 10, 3, 7);
    PQResult r = panoptic_quality(gt, gt);
    CHECK(r.pq == Catch::Approx(1.0));
    CHECK(r.sq == Catch::Approx(1.0));
    CHECK(r.rq == Catch::Approx(1.0));
}

TEST_CASE("panoptic quality: a missed segment halves nothing") {
    PanopticMap gt = one_segment_map(4, 10, 0, 10, 3, 7);
    PanopticMap pred(4, 10);  // all void: one false negative
    PQResult r = panoptic_quality(pred, gt);
    CHECK(r.pq == 0.0);
}

TEST_CASE("panoptic quality: one matched pair with iou 0.8") {
    PanopticMap gt = one_segment_map(1, 10, 0, 10, 2, 1);
    PanopticMap pred = one_segment_map(1, 10, 0, 8, 2, 5);  // inter 8, union 10
    PQResult r = panoptic_quality(pred, gt);
    CHECK(r.pq == Catch::Approx(0.8));
    CHECK(r.sq == Catch::Approx(0.8));
    CHECK(r.rq == Catch::Approx(1.0));
}

TEST_CASE("panoptic quality matches only within a class") {
    PanopticMap gt = one_segment_map(1, 10, 0, 10, 2, 1);
    PanopticMap pred = one_segment_map(1, 10, 0, 10, 3, 5);  // same pixels, other class
    PQResult r = panoptic_quality(pred, gt);
    CHECK(r.pq == 0.0);  // one FP (class 3) and one FN (class 2)
}

TEST_CASE("panoptic quality is invariant to segment id relabeling") {
    PanopticMap gt = one_segment_map(2, 10, 0, 6, 2, 1);
    PanopticMap relabeled = one_segment_map(2, 10, 0, 6, 2, 99);
    CHECK(panoptic_quality(relabeled, gt).pq == Catch::Approx(1.0));
}

TEST_CASE("oks: exact keypoints score 1 and ap 1") {
    KeypointSet gt = {{0, 10, 10, 1.0}, {5, 20, 14, 1.0}};
    CHECK(oks(gt, gt, 100.0) == Catch::Approx(1.0));
    CHECK(oks_ap({{gt, gt}}, {100.0}) == Catch::Approx(1.0));
}

TEST_CASE("oks decreases monotonically with displacement") {
    KeypointSet gt = {{0, 20, 20, 1.0}};
    double prev = 1.0;
    for (double d : {1.0, 2.0, 4.0, 8.0}) {
        KeypointSet pred = {{0, 20 + d, 20, 1.0}};
        double s = oks(pred, gt, 200.0);
        CHECK(s < prev);
        prev = s;
    }
}

TEST_CASE("oks closed form: d^2 = 2 s^2 k^2 gives 1/e") {
    const double area = 150.0;
    const double kappa = coco_keypoint_sigmas()[0];
    double d = std::sqrt(2.0 * area * kappa * kappa);
    KeypointSet gt = {{0, 30, 30, 1.0}};
    KeypointSet pred = {{0, 30 + d, 30, 1.0}};
    CHECK(oks(pred, gt, area) == Catch::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("oks is invariant under joint rescaling of coordinates and area") {
    Rng rng(3);
    KeypointSet gt, pred;
    for (int k = 0; k < 5; ++k) {
        gt.push_back({k, rng.uniform(10, 50), rng.uniform(10, 50), 1.0});
        pred.push_back({k, gt[k].x + rng.uniform(-2, 2), gt[k].y + rng.uniform(-2, 2), 1.0});
    }
    double base = oks(pred, gt, 300.0);
    const double c = 2.5;
    KeypointSet gt2 = gt, pred2 = pred;
    for (auto& kp : gt2) kp.x *= c, kp.y *= c;
    for (auto& kp : pred2) kp.x *= c, kp.y *= c;
    CHECK(oks(pred2, gt2, 300.0 * c * c) == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("oks: a missing class contributes zero") {
    KeypointSet gt = {{0, 10, 10, 1.0}, {1, 20, 20, 1.0}};
    KeypointSet pred = {{0, 10, 10, 1.0}};
    CHECK(oks(pred, gt, 100.0) == Catch::Approx(0.5));
}

TEST_CASE("psnr landmarks") {
    Image a(8, 8, 100);
    CHECK(std::isinf(psnr(a, a)));
    Image b(8, 8, 101);  // uniform one-level offset: MSE = 1
    CHECK(psnr(a, b) == Catch::Approx(10.0 * std::log10(255.0 * 255.0)).margin(0.01));  // 48.13 dB
}

TEST_CASE("psnr and rmse are pixel-permutation invariant") {
    Rng rng(5);
    Image a(6, 6), b(6, 6);
    for (auto& v : a.data) v = static_cast<std::uint8_t>(rng.uniform_int(256));
    for (auto& v : b.data) v = static_cast<std::uint8_t>(rng.uniform_int(256));
    double base = psnr(a, b);
    // apply the same pixel permutation (reverse) to both
    Image ar = a, br = b;
    for (int i = 0; i < 36; ++i)
        for (int c = 0; c < 3; ++c) {
            ar.data[i * 3 + c] = a.data[(35 - i) * 3 + c];
            br.data[i * 3 + c] = b.data[(35 - i) * 3 + c];
        }
    CHECK(psnr(ar, br) == Catch::Approx(base));
}

TEST_CASE("ssim: identity is exactly 1") {
    Rng rng(6);
    Image a(32, 32);
    for (auto& v : a.data) v = static_cast<std::uint8_t>(rng.uniform_int(256));
    CHECK(ssim(a, a) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim of independent noise is near zero") {
    Rng rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        Image a(64, 64), b(64, 64);
        for (auto& v : a.data) v = static_cast<std::uint8_t>(rng.uniform_int(256));
        for (auto& v : b.data) v = static_cast<std::uint8_t>(rng.uniform_int(256));
        worst = std::max(worst, std::abs(ssim(a, b)));
    }
    CHECK(worst < 0.1);
}

TEST_CASE("ssim stays in range and penalizes distortion") {
    Rng rng(8);
    Image a(32, 32);
    for (auto& v : a.data) v = static_cast<std::uint8_t>(rng.uniform_int(256));
    Image b = a;
    for (auto& v : b.data) v = static_cast<std::uint8_t>(std::min(255, v + 40));
    double s = ssim(a, b);
    CHECK(s <= 1.0);
    CHECK(s >= -1.0);
    CHECK(s < 1.0);
    CHECK_THROWS_AS(ssim(Image(8, 8), Image(8, 8)), error);  // smaller than the window
}
