#include <catch2/catch_amalgamated.hpp>

#include "painter/augment.hpp"
#include "painter/canvas.hpp"
#include "painter/rng.hpp"

using namespace painter;

namespace {

Image numbered(int h, int w, std::uint8_t tag) {
    Image img(h, w, tag);
    return img;
}

}  // namespace

TEST_CASE("stitching stacks pair A on top") {
    Image a_in = numbered(448, 448, 1), a_out = numbered(448, 448, 2);
    Image b_in = numbered(448, 448, 3), b_out = numbered(448, 448, 4);
    Canvas canvas = stitch_training_sample({a_in, a_out}, {b_in, b_out});
    CHECK(canvas.input.height == 896);
    CHECK(canvas.input.width == 448);
    CHECK(canvas.output.height == 896);
    CHECK(canvas.input.at(0, 0, 0) == 1);
    CHECK(canvas.input.at(448, 0, 0) == 3);
    CHECK(canvas.output.at(0, 0, 0) == 2);
    CHECK(canvas.output.at(448, 0, 0) == 4);
}

TEST_CASE("stitching identical pairs duplicates the halves") {
    Image in = numbered(16, 16, 9), out = numbered(16, 16, 7);
    Canvas canvas = stitch_training_sample({in, out}, {in, out});
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(canvas.input.at(y, x, c) == canvas.input.at(16 + y, x, c));
}

TEST_CASE("splitting the stitch recovers the originals") {
    Rng rng(5);
    Image a_in(8, 8), a_out(8, 8), b_in(8, 8), b_out(8, 8);
    for (auto* img : {&a_in, &a_out, &b_in, &b_out})
        for (auto& v : img->data) v = static_cast<std::uint8_t>(rng.uniform_int(256));
    Canvas canvas = stitch_training_sample({a_in, a_out}, {b_in, b_out});
    Image top = crop_image(canvas.input, 0, 0, 8, 8);
    Image bottom = crop_image(canvas.input, 8, 0, 8, 8);
    CHECK(top == a_in);
    CHECK(bottom == b_in);
    CHECK(crop_image(canvas.output, 0, 0, 8, 8) == a_out);
    CHECK(crop_image(canvas.output, 8, 0, 8, 8) == b_out);
}

TEST_CASE("stitch rejects mismatched dimensions") {
    CHECK_THROWS_AS(stitch_training_sample({Image(8, 8), Image(8, 8)}, {Image(8, 9), Image(8, 9)}),
                    error);
}

TEST_CASE("block mask hits the requested ratio on the desk grid") {
    // 16x8 grid (two 64x64 images, patch 8): 96 of 128 patches, +-6
    Rng rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
        MaskPlan plan = sample_block_mask(16, 8, 0.75, rng);
        int n = static_cast<int>(plan.masked.size());
        REQUIRE(n >= 90);
        REQUIRE(n <= 102);
        std::set<int> unique(plan.masked.begin(), plan.masked.end());
        REQUIRE(unique.size() == plan.masked.size());
        for (int i : plan.masked) REQUIRE((i >= 0 && i < 128));
    }
}

TEST_CASE("mask fraction stays within 0.05 of the ratio") {
    Rng rng(321);
    for (double ratio : {0.4, 0.6, 0.75, 0.9}) {
        for (int trial = 0; trial < 250; ++trial) {
            MaskPlan plan = sample_block_mask(16, 8, ratio, rng);
            double frac = static_cast<double>(plan.masked.size()) / plan.total();
            REQUIRE(std::abs(frac - ratio) <= 0.05);
        }
    }
}

TEST_CASE("ratio 1 masks the full grid") {
    Rng rng(9);
    MaskPlan plan = sample_block_mask(16, 8, 1.0, rng);
    CHECK(plan.masked.size() == 128);
}

TEST_CASE("same seed gives the same mask plan") {
    Rng r1(777), r2(777);
    MaskPlan a = sample_block_mask(16, 8, 0.75, r1);
    MaskPlan b = sample_block_mask(16, 8, 0.75, r2);
    CHECK(a.masked == b.masked);
}

TEST_CASE("mask sampler rejects an impossible grid") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_block_mask(1, 2, 0.75, rng), error);
}

TEST_CASE("inference canvas masks exactly the query half") {
    Image prompt_in = numbered(64, 64, 10), prompt_out = numbered(64, 64, 20);
    Image query = numbered(64, 64, 30);
    auto [canvas, plan] = build_inference_canvas({prompt_in, prompt_out}, query, 8);
    CHECK(canvas.input.height == 128);
    CHECK(plan.rows == 16);
    CHECK(plan.cols == 8);
    REQUIRE(plan.masked.size() == 64);  // half the grid
    for (std::size_t i = 0; i < plan.masked.size(); ++i)
        CHECK(plan.masked[i] == static_cast<int>(64 + i));  // rows 8..15, all columns
    // prompt half of the output canvas is visible and intact
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) CHECK(canvas.output.at(y, x, 0) == 20);
    // query half of the output canvas starts as zeros
    for (int y = 64; y < 128; ++y)
        for (int x = 0; x < 64; ++x) CHECK(canvas.output.at(y, x, 0) == 0);
}

TEST_CASE("inference mask never touches the prompt half") {
    Image im = numbered(32, 32, 1);
    auto [canvas, plan] = build_inference_canvas({im, im}, im, 8);
    int top_patches = (plan.rows / 2) * plan.cols;
    for (int idx : plan.masked) CHECK(idx >= top_patches);
}
