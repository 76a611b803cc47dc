#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "painter/color_table.hpp"
#include "painter/image.hpp"

namespace painter {

struct InstanceDecodeConfig {
    int color_threshold = 18;
    int min_area = 16;
    double nms_sigma = 2.0;
    double nms_keep_threshold = 0.3;
};

// Each instance mask painted in the color of the fine-grid cell holding its
// center. Larger instances are painted first so smaller ones stay on top;
// equal areas paint in index order. Background stays black.
inline Image encode_instances(const InstanceSet& insts, int h, int w,
                              const ColorTable& loc = location_color_table()) {
    Image out(h, w);
    std::vector<std::size_t> order(insts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> areas(insts.size());
    for (std::size_t i = 0; i < insts.size(); ++i) {
        require(insts[i].area() > 0, "instance mask is empty");
        areas[i] = insts[i].area();
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return areas[a] > areas[b]; });
    for (std::size_t idx : order) {
        const Instance& inst = insts[idx];
        require(inst.height == h && inst.width == w, "instance mask dimensions mismatch");
        require(inst.center_row >= 0 && inst.center_row < h && inst.center_col >= 0 &&
                    inst.center_col < w,
                "instance center outside image");
        int cell = location_cell(inst.center_row / h, inst.center_col / w);
        const auto& col = loc.colors[cell];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (inst.mask_at(y, x))
                    out.set(y, x, static_cast<std::uint8_t>(col[0]), static_cast<std::uint8_t>(col[1]),
                            static_cast<std::uint8_t>(col[2]));
    }
    return out;
}

inline double mask_iou(const Instance& a, const Instance& b) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.mask.size(); ++i) {
        bool ma = a.mask[i] != 0, mb = b.mask[i] != 0;
        inter += ma && mb;
        uni += ma || mb;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Gaussian Matrix NMS (SOLOv2): sort by score, decay each score by
// min over higher-scored i of exp(-sigma * (iou_ij^2 - maxcompete_i^2)),
// then drop instances whose decayed score falls below the keep threshold.
// Scores only ever decrease; masks are untouched.
inline InstanceSet matrix_nms(const InstanceSet& insts, double sigma = 2.0,
                              double keep_threshold = 0.3) {
    std::vector<std::size_t> order(insts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return insts[a].score > insts[b].score; });
    const std::size_t n = order.size();
    std::vector<std::vector<double>> iou(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) iou[i][j] = mask_iou(insts[order[i]], insts[order[j]]);
    // maxcompete_i: the stiffest competition instance i itself faced
    std::vector<double> compete(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) compete[i] = std::max(compete[i], iou[j][i]);
    InstanceSet out;
    for (std::size_t j = 0; j < n; ++j) {
        double decay = 1.0;
        for (std::size_t i = 0; i < j; ++i) {
            double d = std::exp(-sigma * (iou[i][j] * iou[i][j] - compete[i] * compete[i]));
            decay = std::min(decay, d);
        }
        Instance kept = insts[order[j]];
        kept.score *= decay;
        if (kept.score >= keep_threshold) out.push_back(std::move(kept));
    }
    return out;
}

// Class-agnostic instance decoding: snap the image's colors onto the location
// palette, grow a mask around every surviving kernel color, score by mean
// distance, then let Matrix NMS remove duplicates.
inline InstanceSet decode_instances(const Image& img, const InstanceDecodeConfig& cfg = {},
                                    const ColorTable& loc = location_color_table()) {
    const int h = img.height, w = img.width;
    std::map<std::array<int, 3>, int> seen;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::array<int, 3> px = {img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
            seen.emplace(px, 0);
        }
    std::vector<int> candidates;
    for (const auto& [px, _] : seen) {
        int dist = 0;
        int cell = loc.nearest(px, &dist);
        if (dist <= cfg.color_threshold) candidates.push_back(cell);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    InstanceSet result;
    for (int cell : candidates) {
        Instance inst;
        inst.height = h;
        inst.width = w;
        inst.mask.assign(static_cast<std::size_t>(h) * w, 0);
        const auto& col = loc.colors[cell];
        long long sum_d = 0;
        std::size_t area = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int d = std::abs(img.at(y, x, 0) - col[0]) + std::abs(img.at(y, x, 1) - col[1]) +
                        std::abs(img.at(y, x, 2) - col[2]);
                if (d <= cfg.color_threshold) {
                    inst.mask[static_cast<std::size_t>(y) * w + x] = 1;
                    sum_d += d;
                    ++area;
                }
            }
        if (area < static_cast<std::size_t>(cfg.min_area)) continue;
        inst.score = 1.0 - static_cast<double>(sum_d) / static_cast<double>(area) / (3.0 * 255.0);
        recompute_center(inst);
        result.push_back(std::move(inst));
    }
    return matrix_nms(result, cfg.nms_sigma, cfg.nms_keep_threshold);
}

}  // namespace painter
