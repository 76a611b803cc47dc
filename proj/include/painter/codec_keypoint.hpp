#pragma once

#include <cmath>

#include "painter/color_table.hpp"
#include "painter/image.hpp"

namespace painter {

constexpr int kHeatmapWindow = 17;  // class-agnostic Gaussian window
constexpr int kClassSquare = 9;     // class-color square

struct KeypointCodecConfig {
    double heatmap_sigma = 2.0;
    double peak_threshold = 64.0;  // classes with weaker peaks are omitted
};

// Channel 0 holds per-keypoint 17x17 Gaussians peaking at exactly 255 on the
// keypoint pixel; channels 1-2 hold a 9x9 square in the keypoint's class
// color. Windows clip at borders; later keypoints overwrite earlier ones.
inline Image encode_keypoints(const KeypointSet& kps, int h, int w,
                              const ColorTable& ct2 = keypoint_class_table(),
                              const KeypointCodecConfig& cfg = {}) {
    Image out(h, w);
    const int hr = kHeatmapWindow / 2;
    const int sr = kClassSquare / 2;
    for (const auto& kp : kps) {
        require(kp.cls >= 0 && kp.cls < ct2.size(), "keypoint class out of range");
        require(kp.x >= 0 && kp.x < w && kp.y >= 0 && kp.y < h, "keypoint outside image bounds");
        int cy = static_cast<int>(std::lround(kp.y));
        int cx = static_cast<int>(std::lround(kp.x));
        for (int dy = -hr; dy <= hr; ++dy)
            for (int dx = -hr; dx <= hr; ++dx) {
                int y = cy + dy, x = cx + dx;
                if (y < 0 || y >= h || x < 0 || x >= w) continue;
                double g = std::exp(-(dy * dy + dx * dx) / (2.0 * cfg.heatmap_sigma * cfg.heatmap_sigma));
                out.at(y, x, 0) = static_cast<std::uint8_t>(std::lround(255.0 * g));
            }
        const auto& col = ct2.colors[kp.cls];
        for (int dy = -sr; dy <= sr; ++dy)
            for (int dx = -sr; dx <= sr; ++dx) {
                int y = cy + dy, x = cx + dx;
                if (y < 0 || y >= h || x < 0 || x >= w) continue;
                out.at(y, x, 1) = static_cast<std::uint8_t>(col[0]);
                out.at(y, x, 2) = static_cast<std::uint8_t>(col[1]);
            }
    }
    return out;
}

// Per pixel, the nearest 2-channel class from (G, B) selects which class
// heatmap the R value feeds; each class decodes to its heatmap argmax with a
// quarter-pixel shift toward the larger neighbour.
inline KeypointSet decode_keypoints(const Image& img, const ColorTable& ct2 = keypoint_class_table(),
                                    const KeypointCodecConfig& cfg = {}) {
    const int h = img.height, w = img.width;
    std::vector<int> cls_of(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::array<int, 3> px = {img.at(y, x, 1), img.at(y, x, 2), 0};
            cls_of[static_cast<std::size_t>(y) * w + x] = ct2.nearest(px);
        }
    KeypointSet out;
    for (int k = 0; k < ct2.size(); ++k) {
        int best_v = -1, by = 0, bx = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (cls_of[static_cast<std::size_t>(y) * w + x] != k) continue;
                int v = img.at(y, x, 0);
                if (v > best_v) {
                    best_v = v;
                    by = y;
                    bx = x;
                }
            }
        if (best_v < cfg.peak_threshold) continue;
        auto heat = [&](int y, int x) -> int {
            if (y < 0 || y >= h || x < 0 || x >= w) return 0;
            if (cls_of[static_cast<std::size_t>(y) * w + x] != k) return 0;
            return img.at(y, x, 0);
        };
        double fy = by, fx = bx;
        int l = heat(by, bx - 1), r = heat(by, bx + 1);
        if (r > l)
            fx += 0.25;
        else if (l > r)
            fx -= 0.25;
        int u = heat(by - 1, bx), d = heat(by + 1, bx);
        if (d > u)
            fy += 0.25;
        else if (u > d)
            fy -= 0.25;
        out.push_back({k, fx, fy, best_v / 255.0});
    }
    return out;
}

}  // namespace painter
