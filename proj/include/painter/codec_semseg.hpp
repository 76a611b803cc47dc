#pragma once

#include <vector>

#include "painter/color_table.hpp"
#include "painter/image.hpp"

namespace painter {

// Every pixel painted with its class color; IGNORE painted black.
inline Image encode_semseg(const LabelMap& lm, const ColorTable& ct) {
    Image out(lm.height, lm.width);
    for (int y = 0; y < lm.height; ++y)
        for (int x = 0; x < lm.width; ++x) {
            int l = lm.at(y, x);
            if (l == kIgnoreLabel) continue;
            require(l >= 0 && l < ct.size(), "label out of range for color table");
            const auto& c = ct.colors[l];
            out.set(y, x, static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]),
                    static_cast<std::uint8_t>(c[2]));
        }
    return out;
}

// H x W x K L1 distances between pixels and table colors. Kept around by the
// decoder because instance majority voting consumes it.
struct DistanceField {
    int height = 0;
    int width = 0;
    int num_classes = 0;
    std::vector<int> dist;  // row-major [y][x][k]

    int at(int y, int x, int k) const {
        return dist[(static_cast<std::size_t>(y) * width + x) * num_classes + k];
    }
    int max_value() const {
        int m = 0;
        for (int d : dist) m = std::max(m, d);
        return m;
    }
};

struct SemsegDecodeResult {
    LabelMap labels;
    DistanceField field;
};

// Nearest table color per pixel (L1, ties to the lowest class id).
inline SemsegDecodeResult decode_semseg(const Image& img, const ColorTable& ct) {
    SemsegDecodeResult res;
    res.labels = LabelMap(img.height, img.width, ct.size(), 0);
    res.field.height = img.height;
    res.field.width = img.width;
    res.field.num_classes = ct.size();
    res.field.dist.resize(static_cast<std::size_t>(img.height) * img.width * ct.size());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            std::array<int, 3> px = {img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
            int best = 0, best_d = std::numeric_limits<int>::max();
            for (int k = 0; k < ct.size(); ++k) {
                int d = ct.l1_distance(k, px);
                res.field.dist[(static_cast<std::size_t>(y) * img.width + x) * ct.size() + k] = d;
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            res.labels.at(y, x) = best;
        }
    return res;
}

}  // namespace painter
