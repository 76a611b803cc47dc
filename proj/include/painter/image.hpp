#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "painter/common.hpp"

namespace painter {

// H x W x 3 pixel tensor, the universal interface for task inputs/outputs.
// Storage form is u8 in [0, 255]; the model form is unit-real in [0, 1].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // row-major, 3 channels interleaved

    Image() = default;
    Image(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    std::uint8_t& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    void set(int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        at(y, x, 0) = r;
        at(y, x, 1) = g;
        at(y, x, 2) = b;
    }
    bool same_size(const Image& o) const { return height == o.height && width == o.width; }
    bool operator==(const Image& o) const = default;
};

inline std::uint8_t to_u8(double v) {
    // round-half-up, clamped; inverse of v/255
    double r = std::floor(v * 255.0 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

// Unit-real image in the model's [0, 1] domain.
struct RealImage {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    RealImage() = default;
    RealImage(int h, int w, double fill = 0.0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

inline RealImage to_unit_real(const Image& img) {
    RealImage out(img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] / 255.0;
    return out;
}

inline Image from_unit_real(const RealImage& img) {
    Image out(img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = to_u8(img.data[i]);
    return out;
}

// Per-pixel metric depth in [0, 10] meters plus a validity mask.
struct DepthMap {
    int height = 0;
    int width = 0;
    std::vector<double> depth;
    std::vector<std::uint8_t> valid;

    DepthMap() = default;
    DepthMap(int h, int w, double fill = 0.0, bool v = true)
        : height(h),
          width(w),
          depth(static_cast<std::size_t>(h) * w, fill),
          valid(static_cast<std::size_t>(h) * w, v ? 1 : 0) {}

    double& at(int y, int x) { return depth[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return depth[static_cast<std::size_t>(y) * width + x]; }
    bool is_valid(int y, int x) const { return valid[static_cast<std::size_t>(y) * width + x] != 0; }
};

constexpr double kDepthRange = 10.0;  // meters

constexpr int kIgnoreLabel = -1;

// Per-pixel integer class labels in [0, L) with an IGNORE sentinel.
struct LabelMap {
    int height = 0;
    int width = 0;
    int num_classes = 0;
    std::vector<int> label;

    LabelMap() = default;
    LabelMap(int h, int w, int classes, int fill = kIgnoreLabel)
        : height(h), width(w), num_classes(classes), label(static_cast<std::size_t>(h) * w, fill) {}

    int& at(int y, int x) { return label[static_cast<std::size_t>(y) * width + x]; }
    int at(int y, int x) const { return label[static_cast<std::size_t>(y) * width + x]; }
};

constexpr int kNumKeypointClasses = 17;

struct Keypoint {
    int cls = 0;       // [0, 17)
    double x = 0.0;    // pixel column
    double y = 0.0;    // pixel row
    double score = 1.0;
};

using KeypointSet = std::vector<Keypoint>;

// One binary mask instance with its center (row, col) in real pixels.
struct Instance {
    std::vector<std::uint8_t> mask;  // H*W, row-major
    int height = 0;
    int width = 0;
    double center_row = 0.0;
    double center_col = 0.0;
    std::optional<int> cls;
    double score = 1.0;

    bool mask_at(int y, int x) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t area() const {
        std::size_t n = 0;
        for (auto v : mask) n += v != 0;
        return n;
    }
};

using InstanceSet = std::vector<Instance>;

// Centroid of the mask; required whenever a center is derived from a mask.
inline void recompute_center(Instance& inst) {
    double sr = 0.0, sc = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < inst.height; ++y)
        for (int x = 0; x < inst.width; ++x)
            if (inst.mask_at(y, x)) {
                sr += y;
                sc += x;
                ++n;
            }
    require(n > 0, "instance mask is empty");
    inst.center_row = sr / static_cast<double>(n);
    inst.center_col = sc / static_cast<double>(n);
}

constexpr int kVoidSegment = 0;  // panoptic "no segment" id

struct PanopticSegment {
    int id = 0;
    int cls = 0;
    bool is_thing = false;
};

// Per-pixel segment ids plus the segment table. Id 0 is VOID.
struct PanopticMap {
    int height = 0;
    int width = 0;
    std::vector<int> segment;  // H*W segment ids
    std::vector<PanopticSegment> table;

    PanopticMap() = default;
    PanopticMap(int h, int w)
        : height(h), width(w), segment(static_cast<std::size_t>(h) * w, kVoidSegment) {}

    int& at(int y, int x) { return segment[static_cast<std::size_t>(y) * width + x]; }
    int at(int y, int x) const { return segment[static_cast<std::size_t>(y) * width + x]; }

    const PanopticSegment* find(int id) const {
        for (const auto& s : table)
            if (s.id == id) return &s;
        return nullptr;
    }
};

}  // namespace painter
