#pragma once

#include <algorithm>
#include <numeric>
#include <set>

#include "painter/codec_semseg.hpp"
#include "painter/image.hpp"

namespace painter {

// Majority vote: distances over thing classes become scores
// 1 - dist/max(dist), each instance takes the argmax of its summed scores.
// Ties break to the lowest class id.
inline std::vector<int> vote_instance_classes(const DistanceField& segm_dist,
                                              const InstanceSet& masks) {
    int max_d = segm_dist.max_value();
    require(max_d > 0, "degenerate distance field: max distance is zero");
    std::vector<int> classes;
    classes.reserve(masks.size());
    for (const auto& inst : masks) {
        require(inst.height == segm_dist.height && inst.width == segm_dist.width,
                "distance field and mask dimensions mismatch");
        std::vector<double> probs(segm_dist.num_classes, 0.0);
        for (int y = 0; y < inst.height; ++y)
            for (int x = 0; x < inst.width; ++x) {
                if (!inst.mask_at(y, x)) continue;
                for (int k = 0; k < segm_dist.num_classes; ++k)
                    probs[k] += 1.0 - static_cast<double>(segm_dist.at(y, x, k)) / max_d;
            }
        int best = 0;
        for (int k = 1; k < segm_dist.num_classes; ++k)
            if (probs[k] > probs[best]) best = k;
        classes.push_back(best);
    }
    return classes;
}

struct PanopticMergeConfig {
    double overlap_keep_fraction = 0.5;  // instance must keep this share of its mask
    int min_stuff_area = 64;             // smaller stuff segments become VOID
};

// Panoptic-FPN merge discipline: instances claim pixels in score order, then
// surviving pixels take stuff labels from the semantic map; one segment per
// stuff class, small ones voided.
inline PanopticMap merge_panoptic(const LabelMap& sem, const InstanceSet& insts,
                                  const std::set<int>& thing_classes,
                                  const PanopticMergeConfig& cfg = {}) {
    for (const auto& inst : insts) {
        require(inst.cls.has_value(), "panoptic merge needs classed instances");
        require(inst.height == sem.height && inst.width == sem.width,
                "semantic map and instance dimensions mismatch");
        require(thing_classes.count(*inst.cls) > 0,
                "class partition missing an instance class id");
    }
    PanopticMap out(sem.height, sem.width);
    std::vector<std::size_t> order(insts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return insts[a].score > insts[b].score; });
    int next_id = 1;
    for (std::size_t idx : order) {
        const Instance& inst = insts[idx];
        std::size_t total = 0, unclaimed = 0;
        for (std::size_t i = 0; i < inst.mask.size(); ++i)
            if (inst.mask[i]) {
                ++total;
                if (out.segment[i] == kVoidSegment) ++unclaimed;
            }
        if (total == 0 ||
            static_cast<double>(unclaimed) < cfg.overlap_keep_fraction * static_cast<double>(total))
            continue;
        int id = next_id++;
        for (std::size_t i = 0; i < inst.mask.size(); ++i)
            if (inst.mask[i] && out.segment[i] == kVoidSegment) out.segment[i] = id;
        out.table.push_back({id, *inst.cls, true});
    }
    // stuff: one segment per class over the pixels instances did not claim
    std::map<int, std::vector<std::size_t>> stuff_pixels;
    for (std::size_t i = 0; i < sem.label.size(); ++i) {
        if (out.segment[i] != kVoidSegment) continue;
        int l = sem.label[i];
        if (l == kIgnoreLabel || thing_classes.count(l) > 0) continue;  // stays VOID
        stuff_pixels[l].push_back(i);
    }
    for (const auto& [cls, pixels] : stuff_pixels) {
        if (pixels.size() < static_cast<std::size_t>(cfg.min_stuff_area)) continue;
        int id = next_id++;
        for (std::size_t i : pixels) out.segment[i] = id;
        out.table.push_back({id, cls, false});
    }
    return out;
}

}  // namespace painter
