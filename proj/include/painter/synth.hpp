#pragma once

#include <cmath>

#include "painter/image.hpp"
#include "painter/rng.hpp"

namespace painter {

enum class ShapeKind { rectangle, ellipse, stick_figure };

// Deterministic multi-task scene generator. Every ground truth is exact by
// construction; shape appearance, class, and depth are tied together so the
// tasks stay learnable from pixels alone.
struct SceneSpec {
    int size = 64;
    int min_shapes = 1;
    int max_shapes = 3;
    bool rectangles = true;
    bool ellipses = true;
    bool stick_figures = true;
    int max_stick_figures = 1;  // keypoint decoding is one peak per class
    int num_classes = 6;
    int min_shape = 12;
    int max_shape = 26;
    int max_place_retries = 100;
    double background_depth = 10.0;
    std::uint8_t background_gray = 160;
};

struct Scene {
    Image image;
    DepthMap depth;
    LabelMap labels;
    KeypointSet keypoints;
    InstanceSet instances;
};

// Fixed fill color per class: evenly spaced hues, constant saturation/value.
inline std::array<std::uint8_t, 3> class_fill_color(int cls, int num_classes) {
    double h = 6.0 * cls / std::max(num_classes, 1);
    double s = 0.8, v = 0.85;
    int i = static_cast<int>(h) % 6;
    double f = h - std::floor(h);
    double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r, g, b;
    switch (i) {
        case 0: r = v, g = t, b = p; break;
        case 1: r = q, g = v, b = p; break;
        case 2: r = p, g = v, b = t; break;
        case 3: r = p, g = q, b = v; break;
        case 4: r = t, g = p, b = v; break;
        default: r = v, g = p, b = q; break;
    }
    return {to_u8(r), to_u8(g), to_u8(b)};
}

// Depth is a function of the class so it is predictable from appearance.
inline double class_depth(int cls, int num_classes) {
    return 0.5 + 9.0 * cls / std::max(num_classes - 1, 1);
}

namespace detail {

// 17 joints in box fractions (x, y), COCO ordering.
constexpr double kJointLayout[17][2] = {
    {0.50, 0.10}, {0.44, 0.06}, {0.56, 0.06}, {0.38, 0.09}, {0.62, 0.09}, {0.30, 0.26},
    {0.70, 0.26}, {0.20, 0.42}, {0.80, 0.42}, {0.14, 0.58}, {0.86, 0.58}, {0.38, 0.56},
    {0.62, 0.56}, {0.34, 0.76}, {0.66, 0.76}, {0.32, 0.95}, {0.68, 0.95}};

inline void paint_disc(std::vector<std::uint8_t>& mask, int size, double cy, double cx, double r) {
    int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
    int y1 = std::min(size - 1, static_cast<int>(std::ceil(cy + r)));
    int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
    int x1 = std::min(size - 1, static_cast<int>(std::ceil(cx + r)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
                mask[static_cast<std::size_t>(y) * size + x] = 1;
}

inline void paint_segment(std::vector<std::uint8_t>& mask, int size, double y0, double x0, double y1,
                          double x1, double thickness) {
    double len = std::hypot(y1 - y0, x1 - x0);
    int steps = std::max(2, static_cast<int>(std::ceil(len * 2)));
    for (int s = 0; s <= steps; ++s) {
        double t = static_cast<double>(s) / steps;
        paint_disc(mask, size, y0 + t * (y1 - y0), x0 + t * (x1 - x0), thickness / 2);
    }
}

struct PlacedShape {
    ShapeKind kind;
    int cls;
    int x0, y0, w, h;
    std::vector<std::uint8_t> mask;  // size x size
    KeypointSet joints;
};

inline PlacedShape rasterize(ShapeKind kind, int cls, int x0, int y0, int w, int h, int size) {
    PlacedShape sh;
    sh.kind = kind;
    sh.cls = cls;
    sh.x0 = x0;
    sh.y0 = y0;
    sh.w = w;
    sh.h = h;
    sh.mask.assign(static_cast<std::size_t>(size) * size, 0);
    switch (kind) {
        case ShapeKind::rectangle:
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x) sh.mask[static_cast<std::size_t>(y) * size + x] = 1;
            break;
        case ShapeKind::ellipse: {
            double cy = y0 + (h - 1) / 2.0, cx = x0 + (w - 1) / 2.0;
            double ry = h / 2.0, rx = w / 2.0;
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x) {
                    double dy = (y - cy) / ry, dx = (x - cx) / rx;
                    if (dy * dy + dx * dx <= 1.0) sh.mask[static_cast<std::size_t>(y) * size + x] = 1;
                }
            break;
        }
        case ShapeKind::stick_figure: {
            auto joint = [&](int k) {
                return std::pair<double, double>{y0 + kJointLayout[k][1] * (h - 1),
                                                 x0 + kJointLayout[k][0] * (w - 1)};
            };
            for (int k = 0; k < kNumKeypointClasses; ++k) {
                auto [jy, jx] = joint(k);
                sh.joints.push_back({k, jx, jy, 1.0});
            }
            double th = 2.0;
            auto seg = [&](int a, int b) {
                auto [ya, xa] = joint(a);
                auto [yb, xb] = joint(b);
                paint_segment(sh.mask, size, ya, xa, yb, xb, th);
            };
            auto [ny, nx] = joint(0);
            paint_disc(sh.mask, size, ny + 0.04 * h, nx, std::max(2.0, 0.11 * std::min(w, h)));
            seg(5, 6);                                     // shoulders
            seg(11, 12);                                   // hips
            double my = (joint(5).first + joint(6).first) / 2;
            double mx = (joint(5).second + joint(6).second) / 2;
            double hy = (joint(11).first + joint(12).first) / 2;
            double hx = (joint(11).second + joint(12).second) / 2;
            paint_segment(sh.mask, size, my, mx, hy, hx, th);  // torso
            seg(5, 7), seg(7, 9), seg(6, 8), seg(8, 10);       // arms
            seg(11, 13), seg(13, 15), seg(12, 14), seg(14, 16);  // legs
            break;
        }
    }
    return sh;
}

}  // namespace detail

inline Scene gen_scene(const SceneSpec& spec, Rng& rng) {
    require(spec.num_classes >= 1, "scene spec needs at least one class");
    require(spec.min_shape >= 4 && spec.max_shape <= spec.size - 2 && spec.min_shape <= spec.max_shape,
            "scene spec shape sizes out of range");
    Scene scene;
    const int n = spec.size;
    scene.image = Image(n, n, spec.background_gray);
    scene.depth = DepthMap(n, n, spec.background_depth);
    scene.labels = LabelMap(n, n, spec.num_classes);  // IGNORE background
    std::vector<ShapeKind> kinds;
    if (spec.rectangles) kinds.push_back(ShapeKind::rectangle);
    if (spec.ellipses) kinds.push_back(ShapeKind::ellipse);
    if (spec.stick_figures) kinds.push_back(ShapeKind::stick_figure);
    require(!kinds.empty(), "scene spec enables no shape kinds");

    int count = rng.uniform_int(spec.min_shapes, spec.max_shapes);
    std::vector<std::array<int, 4>> boxes;  // x0, y0, w, h with 1px halo
    int sticks = 0;
    for (int i = 0; i < count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < spec.max_place_retries && !placed; ++attempt) {
            ShapeKind kind = kinds[rng.uniform_int(kinds.size())];
            if (kind == ShapeKind::stick_figure && sticks >= spec.max_stick_figures)
                kind = spec.rectangles || spec.ellipses
                           ? (spec.rectangles ? ShapeKind::rectangle : ShapeKind::ellipse)
                           : kind;
            if (kind == ShapeKind::stick_figure && sticks >= spec.max_stick_figures) break;
            int w = rng.uniform_int(spec.min_shape, spec.max_shape);
            int h = rng.uniform_int(spec.min_shape, spec.max_shape);
            int x0 = rng.uniform_int(1, n - w - 1);
            int y0 = rng.uniform_int(1, n - h - 1);
            bool overlaps = false;
            for (const auto& b : boxes)
                if (x0 < b[0] + b[2] + 1 && b[0] < x0 + w + 1 && y0 < b[1] + b[3] + 1 &&
                    b[1] < y0 + h + 1) {
                    overlaps = true;
                    break;
                }
            if (overlaps) continue;
            int cls = static_cast<int>(rng.uniform_int(spec.num_classes));
            auto shape = detail::rasterize(kind, cls, x0, y0, w, h, n);
            boxes.push_back({x0, y0, w, h});
            if (kind == ShapeKind::stick_figure) ++sticks;
            auto fill = class_fill_color(cls, spec.num_classes);
            double depth = class_depth(cls, spec.num_classes);
            Instance inst;
            inst.height = n;
            inst.width = n;
            inst.mask = shape.mask;
            inst.cls = cls;
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x)
                    if (shape.mask[static_cast<std::size_t>(y) * n + x]) {
                        scene.image.set(y, x, fill[0], fill[1], fill[2]);
                        scene.depth.at(y, x) = depth;
                        scene.labels.at(y, x) = cls;
                    }
            recompute_center(inst);
            scene.instances.push_back(std::move(inst));
            for (const auto& kp : shape.joints) scene.keypoints.push_back(kp);
            placed = true;
        }
        if (!placed && static_cast<int>(boxes.size()) < spec.min_shapes)
            throw error("cannot place shapes without overlap after bounded retries");
    }
    return scene;
}

enum class CorruptKind { gaussian_noise, rain, darken };

struct CorruptConfig {
    CorruptKind kind = CorruptKind::gaussian_noise;
    double noise_sigma = 25.0;
    double gamma = 2.2;       // > 1 darkens
    double rain_density = 1.0 / 160.0;  // streaks per pixel
};

// Synthetic corruption for the restoration tasks. Deterministic per seed and
// dimension-preserving.
inline Image corrupt(const Image& img, const CorruptConfig& cfg, Rng& rng) {
    Image out = img;
    switch (cfg.kind) {
        case CorruptKind::gaussian_noise: {
            require(cfg.noise_sigma >= 0.0, "noise sigma must be nonnegative");
            if (cfg.noise_sigma == 0.0) return out;
            for (auto& v : out.data) {
                int nv = static_cast<int>(std::lround(v + rng.normal(0.0, cfg.noise_sigma)));
                v = static_cast<std::uint8_t>(std::clamp(nv, 0, 255));
            }
            return out;
        }
        case CorruptKind::rain: {
            int streaks = std::max(1, static_cast<int>(img.height * img.width * cfg.rain_density));
            for (int s = 0; s < streaks; ++s) {
                double y = rng.uniform(0.0, img.height);
                double x = rng.uniform(0.0, img.width);
                double angle = rng.uniform(45.0, 75.0) * M_PI / 180.0;
                double len = rng.uniform(img.height / 8.0, img.height / 3.0);
                int add = rng.uniform_int(60, 140);
                int steps = static_cast<int>(len * 2);
                for (int t = 0; t <= steps; ++t) {
                    int py = static_cast<int>(y + std::sin(angle) * len * t / steps);
                    int px = static_cast<int>(x + std::cos(angle) * len * t / steps);
                    if (py < 0 || py >= img.height || px < 0 || px >= img.width) continue;
                    for (int c = 0; c < 3; ++c) {
                        int v = out.at(py, px, c) + add;
                        out.at(py, px, c) = static_cast<std::uint8_t>(std::min(v, 255));
                    }
                }
            }
            return out;
        }
        case CorruptKind::darken: {
            require(cfg.gamma >= 1.0, "darken gamma must be >= 1");
            for (auto& v : out.data)
                v = static_cast<std::uint8_t>(
                    std::lround(255.0 * std::pow(v / 255.0, cfg.gamma)));
            return out;
        }
    }
    throw error("unknown corruption kind");
}

}  // namespace painter
