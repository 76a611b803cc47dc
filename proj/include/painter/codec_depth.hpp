#pragma once

#include <cmath>

#include "painter/image.hpp"

namespace painter {

// Depth in [0, 10] m quantized to [0, 255] and replicated over all three
// channels. Invalid pixels are painted black; validity travels separately.
inline Image encode_depth(const DepthMap& dm) {
    Image out(dm.height, dm.width);
    for (int y = 0; y < dm.height; ++y)
        for (int x = 0; x < dm.width; ++x) {
            if (!dm.is_valid(y, x)) continue;  // stays (0,0,0)
            double d = dm.at(y, x);
            require(d >= 0.0 && d <= kDepthRange, "depth outside [0, 10] m");
            int v = static_cast<int>(std::floor(d * 255.0 / kDepthRange));
            v = std::clamp(v, 0, 255);
            out.set(y, x, static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v),
                    static_cast<std::uint8_t>(v));
        }
    return out;
}

// Average of the three channels mapped back to meters. Total function.
inline DepthMap decode_depth(const Image& img) {
    DepthMap dm(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double mean = (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
            dm.at(y, x) = std::clamp(mean * kDepthRange / 255.0, 0.0, kDepthRange);
        }
    return dm;
}

}  // namespace painter
