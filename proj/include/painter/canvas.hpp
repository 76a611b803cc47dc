#pragma once

#include <vector>

#include "painter/image.hpp"
#include "painter/rng.hpp"

namespace painter {

enum class StitchAxis { vertical, horizontal };

// Stitched input/output image pair: two task inputs stacked on one canvas and
// the two encoded targets stacked in the same order.
struct Canvas {
    Image input;
    Image output;
};

// Set of masked patches over the output canvas grid.
struct MaskPlan {
    int rows = 0, cols = 0;
    std::vector<int> masked;  // unique patch indices, ascending
    double ratio = 0.0;

    int total() const { return rows * cols; }
    std::vector<std::uint8_t> bitmap() const {
        std::vector<std::uint8_t> m(static_cast<std::size_t>(rows) * cols, 0);
        for (int i : masked) m[i] = 1;
        return m;
    }
};

inline Image stack_images(const Image& a, const Image& b, StitchAxis axis) {
    require(a.same_size(b) || (axis == StitchAxis::vertical && a.width == b.width) ||
                (axis == StitchAxis::horizontal && a.height == b.height),
            "stitch: image dimensions mismatch");
    if (axis == StitchAxis::vertical) {
        Image out(a.height + b.height, a.width);
        std::copy(a.data.begin(), a.data.end(), out.data.begin());
        std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
        return out;
    }
    Image out(a.height, a.width + b.width);
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = a.at(y, x, c);
        for (int x = 0; x < b.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, a.width + x, c) = b.at(y, x, c);
    }
    return out;
}

// Pair A stacks first (top for vertical, left for horizontal).
inline Canvas stitch_training_sample(const std::pair<Image, Image>& pair_a,
                                     const std::pair<Image, Image>& pair_b,
                                     StitchAxis axis = StitchAxis::vertical) {
    require(pair_a.first.same_size(pair_a.second) && pair_b.first.same_size(pair_b.second) &&
                pair_a.first.same_size(pair_b.first),
            "stitch: all four images must share dimensions");
    return {stack_images(pair_a.first, pair_b.first, axis),
            stack_images(pair_a.second, pair_b.second, axis)};
}

struct BlockMaskConfig {
    int min_block_patches = 4;
    double aspect_lo = 0.3;
    double aspect_hi = 1.0 / 0.3;
};

// Block-wise masking: random rectangles of patches are unioned until the
// masked count first reaches ceil(ratio * total); the last block is trimmed
// in scan order, so the fraction lands in [ratio, ratio + 1/total).
inline MaskPlan sample_block_mask(int rows, int cols, double ratio, Rng& rng,
                                  const BlockMaskConfig& cfg = {}) {
    require(ratio > 0.0 && ratio <= 1.0, "mask ratio must be in (0, 1]");
    const int total = rows * cols;
    require(total >= cfg.min_block_patches, "grid too small to host the minimum block");
    const int target = static_cast<int>(std::ceil(ratio * total - 1e-9));
    const int max_block =
        std::max(cfg.min_block_patches, static_cast<int>(std::floor(0.05 * total)));
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(total), 0);
    int count = 0;
    int stall = 0;
    while (count < target) {
        int area = rng.uniform_int(cfg.min_block_patches, max_block);
        double ar = std::exp(rng.uniform(std::log(cfg.aspect_lo), std::log(cfg.aspect_hi)));
        int bw = std::clamp(static_cast<int>(std::lround(std::sqrt(area * ar))), 1, cols);
        int bh = std::clamp(static_cast<int>(std::lround(std::sqrt(area / ar))), 1, rows);
        int by = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(rows - bh + 1)));
        int bx = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cols - bw + 1)));
        int added = 0;
        for (int y = by; y < by + bh && count < target; ++y)
            for (int x = bx; x < bx + bw && count < target; ++x) {
                std::size_t i = static_cast<std::size_t>(y) * cols + x;
                if (!mask[i]) {
                    mask[i] = 1;
                    ++count;
                    ++added;
                }
            }
        stall = added == 0 ? stall + 1 : 0;
        if (stall > 1000) {  // saturate deterministically on pathological draws
            for (int i = 0; i < total && count < target; ++i)
                if (!mask[i]) {
                    mask[i] = 1;
                    ++count;
                }
        }
    }
    MaskPlan plan;
    plan.rows = rows;
    plan.cols = cols;
    plan.ratio = ratio;
    for (int i = 0; i < total; ++i)
        if (mask[i]) plan.masked.push_back(i);
    return plan;
}

// In-context inference canvas: the prompt pair is fully visible, the query's
// output region is fully masked (and starts as zeros).
inline std::pair<Canvas, MaskPlan> build_inference_canvas(const std::pair<Image, Image>& prompt,
                                                          const Image& query_input, int patch_size,
                                                          StitchAxis axis = StitchAxis::vertical) {
    require(prompt.first.same_size(prompt.second) && prompt.first.same_size(query_input),
            "inference canvas: prompt/query dimensions mismatch");
    Image zeros(query_input.height, query_input.width, 0);
    Canvas canvas{stack_images(prompt.first, query_input, axis),
                  stack_images(prompt.second, zeros, axis)};
    require(canvas.output.height % patch_size == 0 && canvas.output.width % patch_size == 0,
            "canvas dimensions must be divisible by the patch size");
    MaskPlan plan;
    plan.rows = canvas.output.height / patch_size;
    plan.cols = canvas.output.width / patch_size;
    plan.ratio = 0.5;
    if (axis == StitchAxis::vertical) {
        for (int y = plan.rows / 2; y < plan.rows; ++y)
            for (int x = 0; x < plan.cols; ++x) plan.masked.push_back(y * plan.cols + x);
    } else {
        for (int y = 0; y < plan.rows; ++y)
            for (int x = plan.cols / 2; x < plan.cols; ++x) plan.masked.push_back(y * plan.cols + x);
    }
    return {std::move(canvas), std::move(plan)};
}

}  // namespace painter
