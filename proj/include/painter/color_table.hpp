#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "painter/common.hpp"

namespace painter {

// Injective map from discrete categories (or instance locations) to colors.
// Background/ignore is black and never emitted for a class.
struct ColorTable {
    int channels = 3;  // 2 for the keypoint-class code, 3 otherwise
    int base = 0;
    int margin = 0;
    std::vector<std::array<int, 3>> colors;  // channel 2 unused when channels == 2

    int size() const { return static_cast<int>(colors.size()); }

    int l1_distance(int k, const std::array<int, 3>& px) const {
        int d = 0;
        for (int c = 0; c < channels; ++c) d += std::abs(colors[k][c] - px[c]);
        return d;
    }

    // Nearest class by L1 distance; ties break to the lowest class id.
    int nearest(const std::array<int, 3>& px, int* dist_out = nullptr) const {
        int best = 0, best_d = std::numeric_limits<int>::max();
        for (int k = 0; k < size(); ++k) {
            int d = l1_distance(k, px);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        if (dist_out) *dist_out = best_d;
        return best;
    }

    // Minimum pairwise L1 distance, by brute force.
    int min_pairwise_l1() const {
        int best = std::numeric_limits<int>::max();
        for (int i = 0; i < size(); ++i)
            for (int j = i + 1; j < size(); ++j) {
                int d = 0;
                for (int c = 0; c < channels; ++c) d += std::abs(colors[i][c] - colors[j][c]);
                best = std::min(best, d);
            }
        return best;
    }
};

// Base-b color code: class k is written as three base-b digits, each digit d
// mapping to channel value 255 - d*m with margin m = 255 // b.
inline ColorTable generate_color_table(int b, int K) {
    require(b >= 2, "color table base must be >= 2");
    require(K <= b * b * b, "too many classes for base: K > b^3");
    ColorTable ct;
    ct.channels = 3;
    ct.base = b;
    ct.margin = 255 / b;
    ct.colors.reserve(K);
    for (int k = 0; k < K; ++k) {
        int d0 = k / (b * b);
        int d1 = (k / b) % b;
        int d2 = k % b;
        ct.colors.push_back({255 - d0 * ct.margin, 255 - d1 * ct.margin, 255 - d2 * ct.margin});
    }
    return ct;
}

// Two-channel variant for keypoint classes: two base-b digits over the
// G/B channels, b = ceil(sqrt(K)).
inline ColorTable generate_color_table_2ch(int b, int K) {
    require(b >= 2, "color table base must be >= 2");
    require(K <= b * b, "too many classes for base: K > b^2");
    ColorTable ct;
    ct.channels = 2;
    ct.base = b;
    ct.margin = 255 / b;
    ct.colors.reserve(K);
    for (int k = 0; k < K; ++k) {
        int d0 = k / b;
        int d1 = k % b;
        ct.colors.push_back({255 - d0 * ct.margin, 255 - d1 * ct.margin, 0});
    }
    return ct;
}

inline ColorTable keypoint_class_table() { return generate_color_table_2ch(5, 17); }

constexpr int kLocationGridRows = 80;
constexpr int kLocationGridCols = 80;
constexpr int kNumLocationColors = kLocationGridRows * kLocationGridCols;  // 16*20*20

// Instance-location palette: the 80x80 fine grid cell index is decomposed in
// mixed radix (16, 20, 20), one digit per channel, margins (15, 12, 12).
inline ColorTable location_color_table() {
    ColorTable ct;
    ct.channels = 3;
    ct.base = 0;  // mixed radix, no single base
    ct.margin = 12;
    ct.colors.reserve(kNumLocationColors);
    for (int k = 0; k < kNumLocationColors; ++k) {
        int d0 = k / 400;
        int d1 = (k % 400) / 20;
        int d2 = k % 20;
        ct.colors.push_back({255 - d0 * 15, 255 - d1 * 12, 255 - d2 * 12});
    }
    return ct;
}

// Fine-grid cell of a normalized center position in [0,1)^2.
inline int location_cell(double norm_row, double norm_col) {
    int r = std::min(kLocationGridRows - 1, static_cast<int>(norm_row * kLocationGridRows));
    int c = std::min(kLocationGridCols - 1, static_cast<int>(norm_col * kLocationGridCols));
    return r * kLocationGridCols + c;
}

}  // namespace painter
