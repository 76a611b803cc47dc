#pragma once

#include <algorithm>
#include <cmath>

#include "painter/image.hpp"
#include "painter/rng.hpp"

namespace painter {

enum class Interp { bilinear, nearest };

struct AugmentConfig {
    double scale_lo = 0.3, scale_hi = 1.0;    // crop area fraction
    double ratio_lo = 3.0 / 4.0, ratio_hi = 4.0 / 3.0;
    int out_size = 64;
    double flip_prob = 0.5;
};

// One crop/flip decision, applied identically to every tensor of the sample.
struct CropParams {
    int y = 0, x = 0, h = 0, w = 0;
    bool flip = false;
    int out_size = 0;
};

inline CropParams sample_crop(int h, int w, Rng& rng, const AugmentConfig& cfg) {
    CropParams p;
    p.out_size = cfg.out_size;
    for (int attempt = 0; attempt < 10; ++attempt) {
        double area = h * static_cast<double>(w) * rng.uniform(cfg.scale_lo, cfg.scale_hi);
        double ar = std::exp(rng.uniform(std::log(cfg.ratio_lo), std::log(cfg.ratio_hi)));
        int cw = static_cast<int>(std::lround(std::sqrt(area * ar)));
        int ch = static_cast<int>(std::lround(std::sqrt(area / ar)));
        if (cw >= 1 && ch >= 1 && cw <= w && ch <= h) {
            p.w = cw;
            p.h = ch;
            p.x = cw == w ? 0 : static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(w - cw + 1)));
            p.y = ch == h ? 0 : static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(h - ch + 1)));
            p.flip = rng.bernoulli(cfg.flip_prob);
            return p;
        }
    }
    // fallback: largest centered crop with a legal aspect ratio
    int side = std::min(h, w);
    p.w = side;
    p.h = side;
    p.x = (w - side) / 2;
    p.y = (h - side) / 2;
    p.flip = rng.bernoulli(cfg.flip_prob);
    return p;
}

namespace detail {

// src coordinate of an output pixel center (half-pixel convention)
inline double src_coord(int dst, int dst_size, int src_size) {
    return (dst + 0.5) * static_cast<double>(src_size) / dst_size - 0.5;
}

inline int src_index_nearest(int dst, int dst_size, int src_size) {
    int i = static_cast<int>(std::floor((dst + 0.5) * static_cast<double>(src_size) / dst_size));
    return std::clamp(i, 0, src_size - 1);
}

}  // namespace detail

inline Image resize_image(const Image& src, int oh, int ow, Interp interp) {
    Image out(oh, ow);
    if (interp == Interp::nearest) {
        for (int y = 0; y < oh; ++y) {
            int sy = detail::src_index_nearest(y, oh, src.height);
            for (int x = 0; x < ow; ++x) {
                int sx = detail::src_index_nearest(x, ow, src.width);
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(sy, sx, c);
            }
        }
        return out;
    }
    for (int y = 0; y < oh; ++y) {
        double fy = std::clamp(detail::src_coord(y, oh, src.height), 0.0, src.height - 1.0);
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, src.height - 1);
        double wy = fy - y0;
        for (int x = 0; x < ow; ++x) {
            double fx = std::clamp(detail::src_coord(x, ow, src.width), 0.0, src.width - 1.0);
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, src.width - 1);
            double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                double v = (1 - wy) * ((1 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c)) +
                           wy * ((1 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c));
                out.at(y, x, c) = to_u8(v / 255.0);
            }
        }
    }
    return out;
}

inline Image crop_image(const Image& src, int y, int x, int h, int w) {
    Image out(h, w);
    for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx)
            for (int c = 0; c < 3; ++c) out.at(yy, xx, c) = src.at(y + yy, x + xx, c);
    return out;
}

inline Image flip_image(const Image& src) {
    Image out(src.height, src.width);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(y, src.width - 1 - x, c);
    return out;
}

inline Image apply_crop(const Image& src, const CropParams& p, Interp interp) {
    Image out = crop_image(src, p.y, p.x, p.h, p.w);
    out = resize_image(out, p.out_size, p.out_size, interp);
    if (p.flip) out = flip_image(out);
    return out;
}

// Random resize crop + flip applied identically to an input/target pair.
// The target's interpolation is a per-task choice: bilinear blends codec
// colors, so discrete codecs must resize nearest-neighbor.
inline std::pair<Image, Image> augment_pair(const Image& input, const Image& target, Rng& rng,
                                            const AugmentConfig& cfg,
                                            Interp target_interp = Interp::nearest) {
    require(input.same_size(target), "augment_pair: input/target dimensions mismatch");
    CropParams p = sample_crop(input.height, input.width, rng, cfg);
    return {apply_crop(input, p, Interp::bilinear), apply_crop(target, p, target_interp)};
}

inline DepthMap apply_crop(const DepthMap& src, const CropParams& p) {
    DepthMap out(p.out_size, p.out_size);
    for (int y = 0; y < p.out_size; ++y) {
        double fy = std::clamp(detail::src_coord(y, p.out_size, p.h), 0.0, p.h - 1.0);
        int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, p.h - 1);
        double wy = fy - y0;
        int ny = detail::src_index_nearest(y, p.out_size, p.h);
        for (int x = 0; x < p.out_size; ++x) {
            int ox = p.flip ? p.out_size - 1 - x : x;
            double fx = std::clamp(detail::src_coord(x, p.out_size, p.w), 0.0, p.w - 1.0);
            int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, p.w - 1);
            double wx = fx - x0;
            double v = (1 - wy) * ((1 - wx) * src.at(p.y + y0, p.x + x0) + wx * src.at(p.y + y0, p.x + x1)) +
                       wy * ((1 - wx) * src.at(p.y + y1, p.x + x0) + wx * src.at(p.y + y1, p.x + x1));
            out.at(y, ox) = v;
            int nx = detail::src_index_nearest(x, p.out_size, p.w);
            out.valid[static_cast<std::size_t>(y) * p.out_size + ox] =
                src.valid[static_cast<std::size_t>(p.y + ny) * src.width + (p.x + nx)];
        }
    }
    return out;
}

inline LabelMap apply_crop(const LabelMap& src, const CropParams& p) {
    LabelMap out(p.out_size, p.out_size, src.num_classes);
    for (int y = 0; y < p.out_size; ++y) {
        int sy = detail::src_index_nearest(y, p.out_size, p.h);
        for (int x = 0; x < p.out_size; ++x) {
            int ox = p.flip ? p.out_size - 1 - x : x;
            int sx = detail::src_index_nearest(x, p.out_size, p.w);
            out.at(y, ox) = src.at(p.y + sy, p.x + sx);
        }
    }
    return out;
}

// COCO convention: mirroring the image swaps left/right joints.
constexpr int kKeypointFlipPairs[8][2] = {{1, 2}, {3, 4},  {5, 6},   {7, 8},
                                          {9, 10}, {11, 12}, {13, 14}, {15, 16}};

inline KeypointSet apply_crop(const KeypointSet& src, const CropParams& p) {
    KeypointSet out;
    double sx = static_cast<double>(p.out_size) / p.w;
    double sy = static_cast<double>(p.out_size) / p.h;
    for (const auto& kp : src) {
        double x = (kp.x - p.x + 0.5) * sx - 0.5;
        double y = (kp.y - p.y + 0.5) * sy - 0.5;
        if (x < -0.5 || x >= p.out_size - 0.5 || y < -0.5 || y >= p.out_size - 0.5) continue;
        x = std::clamp(x, 0.0, p.out_size - 1.0);
        y = std::clamp(y, 0.0, p.out_size - 1.0);
        int cls = kp.cls;
        if (p.flip) {
            x = (p.out_size - 1) - x;
            for (const auto& pr : kKeypointFlipPairs) {
                if (cls == pr[0])
                    cls = pr[1];
                else if (cls == pr[1])
                    cls = pr[0];
            }
        }
        out.push_back({cls, x, y, kp.score});
    }
    return out;
}

inline InstanceSet apply_crop(const InstanceSet& src, const CropParams& p) {
    InstanceSet out;
    for (const auto& inst : src) {
        Instance cropped;
        cropped.height = p.out_size;
        cropped.width = p.out_size;
        cropped.mask.assign(static_cast<std::size_t>(p.out_size) * p.out_size, 0);
        std::size_t area = 0;
        for (int y = 0; y < p.out_size; ++y) {
            int sy = detail::src_index_nearest(y, p.out_size, p.h);
            for (int x = 0; x < p.out_size; ++x) {
                int ox = p.flip ? p.out_size - 1 - x : x;
                int sx = detail::src_index_nearest(x, p.out_size, p.w);
                if (inst.mask[static_cast<std::size_t>(p.y + sy) * inst.width + (p.x + sx)]) {
                    cropped.mask[static_cast<std::size_t>(y) * p.out_size + ox] = 1;
                    ++area;
                }
            }
        }
        if (area == 0) continue;
        cropped.cls = inst.cls;
        cropped.score = inst.score;
        recompute_center(cropped);
        out.push_back(std::move(cropped));
    }
    return out;
}

}  // namespace painter
