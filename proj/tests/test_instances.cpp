#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "painter/codec_instance.hpp"
#include "painter/panoptic.hpp"
#include "painter/rng.hpp"

using namespace painter;

namespace {

Instance rect_instance(int h, int w, int y0, int x0, int bh, int bw) {
    Instance inst;
    inst.height = h;
    inst.width = w;
    inst.mask.assign(static_cast<std::size_t>(h) * w, 0);
    for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) inst.mask[static_cast<std::size_t>(y) * w + x] = 1;
    recompute_center(inst);
    return inst;
}

}  // namespace

TEST_CASE("location palette: 6400 colors, pairwise distinct") {
    ColorTable loc = location_color_table();
    REQUIRE(loc.size() == 6400);
    std::set<std::array<int, 3>> unique(loc.colors.begin(), loc.colors.end());
    CHECK(unique.size() == 6400);
    // brute-force minimum pairwise distance: adjacent cells in the last digit
    CHECK(loc.min_pairwise_l1() == 12);
}

TEST_CASE("location color of the center cell") {
    // normalized (0.5, 0.5) -> cell (40, 40) -> k = 3240 -> digits (8, 2, 0)
    int k = location_cell(0.5, 0.5);
    CHECK(k == 3240);
    ColorTable loc = location_color_table();
    CHECK(loc.colors[k] == std::array<int, 3>{135, 231, 255});
    CHECK(location_cell(0.0, 0.0) == 0);
    CHECK(loc.colors[0] == std::array<int, 3>{255, 255, 255});
}

TEST_CASE("instance encode: distinct cells give distinct colors") {
    Instance a = rect_instance(80, 80, 0, 0, 10, 10);
    Instance b = rect_instance(80, 80, 60, 60, 16, 16);
    Image img = encode_instances({a, b}, 80, 80);
    std::set<std::array<int, 3>> colors;
    for (int y = 0; y < 80; ++y)
        for (int x = 0; x < 80; ++x) {
            std::array<int, 3> px = {img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
            if (px != std::array<int, 3>{0, 0, 0}) colors.insert(px);
        }
    CHECK(colors.size() == 2);

    Instance empty;
    empty.height = 80;
    empty.width = 80;
    empty.mask.assign(80 * 80, 0);
    CHECK_THROWS_AS(encode_instances({empty}, 80, 80), error);
}

TEST_CASE("instance encode: smaller instance paints on top") {
    Instance big = rect_instance(64, 64, 8, 8, 32, 32);
    Instance small = rect_instance(64, 64, 16, 16, 8, 8);
    Image img = encode_instances({big, small}, 64, 64);
    ColorTable loc = location_color_table();
    int small_cell = location_cell(small.center_row / 64, small.center_col / 64);
    std::array<int, 3> px = {img.at(20, 20, 0), img.at(20, 20, 1), img.at(20, 20, 2)};
    CHECK(px == loc.colors[small_cell]);
}

TEST_CASE("clean instance roundtrip has IoU 1") {
    Instance a = rect_instance(64, 64, 4, 4, 12, 16);
    Instance b = rect_instance(64, 64, 40, 36, 16, 20);
    Image img = encode_instances({a, b}, 64, 64);
    InstanceSet out = decode_instances(img);
    REQUIRE(out.size() == 2);
    double best_a = 0, best_b = 0;
    for (const auto& inst : out) {
        best_a = std::max(best_a, mask_iou(inst, a));
        best_b = std::max(best_b, mask_iou(inst, b));
    }
    CHECK(best_a == 1.0);
    CHECK(best_b == 1.0);
}

TEST_CASE("decode of a black image is empty") {
    CHECK(decode_instances(Image(48, 48)).empty());
}

TEST_CASE("decode survives +-3 channel perturbation") {
    Instance a = rect_instance(64, 64, 4, 4, 12, 16);
    Instance b = rect_instance(64, 64, 40, 36, 16, 20);
    Image img = encode_instances({a, b}, 64, 64);
    Rng rng(23);
    Image noisy = img;
    for (std::size_t i = 0; i < noisy.data.size(); ++i) {
        if (img.data[i] == 0) continue;  // keep background exact black
        int v = noisy.data[i] + rng.uniform_int(-3, 3);
        noisy.data[i] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
    InstanceSet out = decode_instances(noisy);
    REQUIRE(out.size() == 2);
    double best_a = 0, best_b = 0;
    for (const auto& inst : out) {
        best_a = std::max(best_a, mask_iou(inst, a));
        best_b = std::max(best_b, mask_iou(inst, b));
    }
    CHECK(best_a == 1.0);
    CHECK(best_b == 1.0);
}

TEST_CASE("matrix nms removes an identical duplicate") {
    Instance a = rect_instance(32, 32, 4, 4, 10, 10);
    Instance b = a;
    a.score = 0.9;
    b.score = 0.8;
    InstanceSet kept = matrix_nms({a, b}, 2.0, 0.3);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == Catch::Approx(0.9));

    // decay value itself: exp(-sigma * iou^2) with iou = 1
    InstanceSet all = matrix_nms({a, b}, 2.0, 0.0);
    REQUIRE(all.size() == 2);
    CHECK(all[1].score == Catch::Approx(0.8 * std::exp(-2.0)));
}

TEST_CASE("matrix nms leaves disjoint masks unchanged") {
    Instance a = rect_instance(32, 32, 0, 0, 8, 8);
    Instance b = rect_instance(32, 32, 20, 20, 8, 8);
    a.score = 0.7;
    b.score = 0.6;
    InstanceSet kept = matrix_nms({a, b}, 2.0, 0.3);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].score == Catch::Approx(0.7));
    CHECK(kept[1].score == Catch::Approx(0.6));

    InstanceSet single = matrix_nms({a}, 2.0, 0.3);
    REQUIRE(single.size() == 1);
    CHECK(single[0].score == Catch::Approx(0.7));
}

TEST_CASE("matrix nms never raises scores or edits masks") {
    Rng rng(31);
    InstanceSet insts;
    for (int i = 0; i < 6; ++i) {
        Instance inst = rect_instance(40, 40, rng.uniform_int(0, 20), rng.uniform_int(0, 20),
                                      rng.uniform_int(5, 15), rng.uniform_int(5, 15));
        inst.score = rng.uniform(0.3, 1.0);
        insts.push_back(std::move(inst));
    }
    InstanceSet kept = matrix_nms(insts, 2.0, 0.0);
    REQUIRE(kept.size() == insts.size());
    for (const auto& k : kept) {
        bool matched = false;
        for (const auto& o : insts)
            if (o.mask == k.mask) {
                matched = true;
                CHECK(k.score <= o.score + 1e-12);
            }
        CHECK(matched);
    }
}

TEST_CASE("majority vote labels instances from the distance field") {
    ColorTable ct = generate_color_table(6, 10);
    LabelMap lm(16, 16, 10, 5);
    auto field = decode_semseg(encode_semseg(lm, ct), ct).field;
    Instance inside = rect_instance(16, 16, 4, 4, 6, 6);
    auto classes = vote_instance_classes(field, {inside});
    REQUIRE(classes.size() == 1);
    CHECK(classes[0] == 5);
}

TEST_CASE("majority vote: 60/40 straddle goes to the majority") {
    ColorTable ct = generate_color_table(6, 10);
    LabelMap lm(10, 10, 10, 2);
    for (int y = 0; y < 10; ++y)
        for (int x = 6; x < 10; ++x) lm.at(y, x) = 7;  // 60% class 2, 40% class 7
    auto field = decode_semseg(encode_semseg(lm, ct), ct).field;
    Instance whole = rect_instance(10, 10, 0, 0, 10, 10);
    CHECK(vote_instance_classes(field, {whole})[0] == 2);
}

TEST_CASE("majority vote: ties break to the lowest class id") {
    DistanceField field;
    field.height = 4;
    field.width = 4;
    field.num_classes = 3;
    field.dist.assign(4 * 4 * 3, 6);  // equal everywhere...
    field.dist[0] = 9;                // ...with one bump so max > min
    Instance m = rect_instance(4, 4, 2, 2, 2, 2);
    CHECK(vote_instance_classes(field, {m})[0] == 0);
}

TEST_CASE("majority vote rejects a constant-zero field") {
    DistanceField field;
    field.height = 2;
    field.width = 2;
    field.num_classes = 2;
    field.dist.assign(8, 0);
    Instance m = rect_instance(2, 2, 0, 0, 1, 1);
    CHECK_THROWS_AS(vote_instance_classes(field, {m}), error);
}

TEST_CASE("panoptic merge: no instances leaves stuff segments") {
    LabelMap sem(16, 16, 4, 1);
    PanopticMap pan = merge_panoptic(sem, {}, {0});
    REQUIRE(pan.table.size() == 1);
    CHECK(pan.table[0].cls == 1);
    CHECK_FALSE(pan.table[0].is_thing);
    for (int v : pan.segment) CHECK(v == pan.table[0].id);
}

TEST_CASE("panoptic merge: one thing over stuff gives two segments") {
    LabelMap sem(16, 16, 4, 1);
    Instance inst = rect_instance(16, 16, 2, 2, 6, 6);
    inst.cls = 0;
    inst.score = 0.9;
    PanopticMap pan = merge_panoptic(sem, {inst}, {0});
    REQUIRE(pan.table.size() == 2);
    CHECK(pan.table[0].is_thing);
    CHECK(pan.table[0].cls == 0);
    CHECK_FALSE(pan.table[1].is_thing);
    CHECK(pan.at(3, 3) == pan.table[0].id);
    CHECK(pan.at(15, 15) == pan.table[1].id);
}

TEST_CASE("panoptic merge: total overlap drops the lower-scored instance") {
    LabelMap sem(16, 16, 4, 1);
    Instance hi = rect_instance(16, 16, 2, 2, 6, 6);
    Instance lo = hi;
    hi.cls = 0;
    hi.score = 0.9;
    lo.cls = 0;
    lo.score = 0.5;
    PanopticMap pan = merge_panoptic(sem, {hi, lo}, {0});
    int things = 0;
    for (const auto& seg : pan.table) things += seg.is_thing;
    CHECK(things == 1);
}

TEST_CASE("panoptic merge: small stuff becomes void") {
    LabelMap sem(8, 8, 4, kIgnoreLabel);
    sem.at(0, 0) = 1;  // a lone stuff pixel, below min_stuff_area
    PanopticMap pan = merge_panoptic(sem, {}, {0});
    CHECK(pan.table.empty());
    CHECK(pan.at(0, 0) == kVoidSegment);
}

TEST_CASE("panoptic merge rejects an unpartitioned class") {
    LabelMap sem(8, 8, 4, 1);
    Instance inst = rect_instance(8, 8, 0, 0, 4, 4);
    inst.cls = 3;
    inst.score = 1.0;
    CHECK_THROWS_AS(merge_panoptic(sem, {inst}, {0, 1}), error);
}
