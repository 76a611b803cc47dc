#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "painter/image.hpp"

namespace painter {

struct DepthMetrics {
    double rmse = 0.0;
    double a_rel = 0.0;
    double delta1 = 0.0;
};

// RMSE, absolute relative error, and the delta < 1.25 inlier fraction,
// restricted to the ground truth's valid mask. A.Rel skips gt = 0 pixels.
inline DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt) {
    require(pred.height == gt.height && pred.width == gt.width, "depth metrics: dims mismatch");
    double se = 0.0, rel = 0.0, inliers = 0.0;
    std::size_t n = 0, nrel = 0;
    for (std::size_t i = 0; i < gt.depth.size(); ++i) {
        if (!gt.valid[i]) continue;
        double p = pred.depth[i], g = gt.depth[i];
        se += (p - g) * (p - g);
        if (g > 0.0) {
            rel += std::abs(p - g) / g;
            ++nrel;
        }
        if (p > 0.0 && g > 0.0 && std::max(p / g, g / p) < 1.25) inliers += 1.0;
        ++n;
    }
    require(n > 0, "depth metrics: no valid pixels");
    DepthMetrics m;
    m.rmse = std::sqrt(se / static_cast<double>(n));
    m.a_rel = nrel > 0 ? rel / static_cast<double>(nrel) : 0.0;
    m.delta1 = inliers / static_cast<double>(n);
    return m;
}

struct MiouResult {
    double miou = 0.0;
    std::map<int, double> per_class;
};

// Mean IoU over the classes present in gt or pred; gt IGNORE pixels are
// excluded everywhere.
inline MiouResult miou(const LabelMap& pred, const LabelMap& gt) {
    require(pred.height == gt.height && pred.width == gt.width, "miou: dims mismatch");
    std::map<int, long> tp, fp, fn;
    std::set<int> classes;
    for (std::size_t i = 0; i < gt.label.size(); ++i) {
        int g = gt.label[i];
        if (g == kIgnoreLabel) continue;
        int p = pred.label[i];
        classes.insert(g);
        if (p != kIgnoreLabel) classes.insert(p);
        if (p == g)
            ++tp[g];
        else {
            ++fn[g];
            if (p != kIgnoreLabel) ++fp[p];
        }
    }
    MiouResult res;
    if (classes.empty()) return res;
    double sum = 0.0;
    for (int c : classes) {
        long denom = tp[c] + fp[c] + fn[c];
        double iou = denom > 0 ? static_cast<double>(tp[c]) / static_cast<double>(denom) : 0.0;
        res.per_class[c] = iou;
        sum += iou;
    }
    res.miou = sum / static_cast<double>(classes.size());
    return res;
}

struct PQResult {
    double pq = 0.0;
    double sq = 0.0;
    double rq = 0.0;
};

// Panoptic quality under the IoU > 0.5 unique-matching rule, per class then
// averaged. Pixels void in gt are excluded; pred segments mostly over void
// are discarded rather than counted as false positives.
inline PQResult panoptic_quality(const PanopticMap& pred, const PanopticMap& gt) {
    require(pred.height == gt.height && pred.width == gt.width, "panoptic quality: dims mismatch");
    std::map<int, std::size_t> pred_area, gt_area;
    std::map<std::pair<int, int>, std::size_t> inter;
    std::map<int, std::size_t> pred_void;
    for (std::size_t i = 0; i < gt.segment.size(); ++i) {
        int ps = pred.segment[i], gs = gt.segment[i];
        if (gs == kVoidSegment) {
            if (ps != kVoidSegment) ++pred_void[ps];
            continue;
        }
        ++gt_area[gs];
        if (ps != kVoidSegment) {
            ++pred_area[ps];
            ++inter[{ps, gs}];
        }
    }
    std::map<int, double> iou_sum;  // per class
    std::map<int, int> tps, fps, fns;
    std::set<int> classes;
    std::set<int> matched_pred, matched_gt;
    for (const auto& [pair, in] : inter) {
        auto [ps, gs] = pair;
        const PanopticSegment* pseg = pred.find(ps);
        const PanopticSegment* gseg = gt.find(gs);
        require(pseg && gseg, "panoptic quality: segment missing from table");
        if (pseg->cls != gseg->cls) continue;
        double uni = static_cast<double>(pred_area[ps] + gt_area[gs] - in);
        double iou = uni > 0 ? static_cast<double>(in) / uni : 0.0;
        if (iou > 0.5) {  // unique by the >0.5 theorem
            ++tps[gseg->cls];
            iou_sum[gseg->cls] += iou;
            matched_pred.insert(ps);
            matched_gt.insert(gs);
            classes.insert(gseg->cls);
        }
    }
    for (const auto& seg : gt.table) {
        if (gt_area.find(seg.id) == gt_area.end()) continue;  // fully void
        classes.insert(seg.cls);
        if (!matched_gt.count(seg.id)) ++fns[seg.cls];
    }
    for (const auto& seg : pred.table) {
        std::size_t area = pred_area.count(seg.id) ? pred_area[seg.id] : 0;
        std::size_t voided = pred_void.count(seg.id) ? pred_void[seg.id] : 0;
        if (area + voided == 0 || voided > area) continue;  // mostly void: not a false positive
        classes.insert(seg.cls);
        if (!matched_pred.count(seg.id)) ++fps[seg.cls];
    }
    PQResult res;
    if (classes.empty()) return res;
    for (int c : classes) {
        double denom = tps[c] + 0.5 * fps[c] + 0.5 * fns[c];
        if (denom > 0) {
            res.pq += iou_sum[c] / denom;
            res.rq += tps[c] / denom;
        }
        if (tps[c] > 0) res.sq += iou_sum[c] / tps[c];
    }
    res.pq /= static_cast<double>(classes.size());
    res.sq /= static_cast<double>(classes.size());
    res.rq /= static_cast<double>(classes.size());
    return res;
}

// COCO per-keypoint constants.
inline const std::vector<double>& coco_keypoint_sigmas() {
    static const std::vector<double> k = {0.026, 0.025, 0.025, 0.035, 0.035, 0.079,
                                          0.079, 0.072, 0.072, 0.062, 0.062, 0.107,
                                          0.107, 0.087, 0.087, 0.089, 0.089};
    return k;
}

struct OksConfig {
    std::vector<double> sigmas = coco_keypoint_sigmas();
};

// Object keypoint similarity for one instance: s^2 is the object area.
inline double oks(const KeypointSet& pred, const KeypointSet& gt, double area,
                  const OksConfig& cfg = {}) {
    require(!cfg.sigmas.empty(), "oks: missing per-keypoint sigmas");
    require(area > 0.0, "oks: area must be positive");
    std::map<int, const Keypoint*> by_class;
    for (const auto& kp : pred) by_class[kp.cls] = &kp;
    double sum = 0.0;
    std::size_t vis = 0;
    for (const auto& g : gt) {
        require(g.cls < static_cast<int>(cfg.sigmas.size()), "oks: class without a sigma");
        ++vis;
        auto it = by_class.find(g.cls);
        if (it == by_class.end()) continue;  // miss contributes zero
        double dx = it->second->x - g.x, dy = it->second->y - g.y;
        double k = cfg.sigmas[g.cls];
        sum += std::exp(-(dx * dx + dy * dy) / (2.0 * area * k * k));
    }
    require(vis > 0, "oks: no ground-truth keypoints");
    return sum / static_cast<double>(vis);
}

// AP over OKS thresholds 0.5:0.05:0.95, one instance per image.
inline double oks_ap(const std::vector<std::pair<KeypointSet, KeypointSet>>& pred_gt_pairs,
                     const std::vector<double>& areas, const OksConfig& cfg = {}) {
    require(pred_gt_pairs.size() == areas.size(), "oks_ap: areas count mismatch");
    require(!pred_gt_pairs.empty(), "oks_ap: no instances");
    double ap = 0.0;
    std::vector<double> scores;
    for (std::size_t i = 0; i < pred_gt_pairs.size(); ++i)
        scores.push_back(oks(pred_gt_pairs[i].first, pred_gt_pairs[i].second, areas[i], cfg));
    for (int t = 0; t < 10; ++t) {
        double thr = 0.5 + 0.05 * t;
        std::size_t hits = 0;
        for (double s : scores) hits += s > thr;
        ap += static_cast<double>(hits) / static_cast<double>(scores.size());
    }
    return ap / 10.0;
}

// Peak signal-to-noise ratio in dB over u8 images; +inf when identical.
inline double psnr(const Image& pred, const Image& gt) {
    require(pred.same_size(gt), "psnr: dims mismatch");
    double se = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        double d = static_cast<double>(pred.data[i]) - static_cast<double>(gt.data[i]);
        se += d * d;
    }
    double mse = se / static_cast<double>(pred.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// Mean SSIM with the standard 11-tap Gaussian window (sigma 1.5), valid
// positions only, averaged over channels. C1 = (0.01*255)^2, C2 = (0.03*255)^2.
inline double ssim(const Image& pred, const Image& gt, int window = 11, double sigma = 1.5) {
    require(pred.same_size(gt), "ssim: dims mismatch");
    require(pred.height >= window && pred.width >= window, "ssim: image smaller than the window");
    const double c1 = 0.01 * 255 * 0.01 * 255, c2 = 0.03 * 255 * 0.03 * 255;
    std::vector<double> kernel(window);
    double ksum = 0.0;
    for (int i = 0; i < window; ++i) {
        double d = i - (window - 1) / 2.0;
        kernel[i] = std::exp(-d * d / (2 * sigma * sigma));
        ksum += kernel[i];
    }
    for (auto& k : kernel) k /= ksum;
    const int oh = pred.height - window + 1, ow = pred.width - window + 1;
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int i = 0; i < window; ++i)
                    for (int j = 0; j < window; ++j) {
                        double w = kernel[i] * kernel[j];
                        double a = pred.at(y + i, x + j, c);
                        double b = gt.at(y + i, x + j, c);
                        mx += w * a;
                        my += w * b;
                        mxx += w * a * a;
                        myy += w * b * b;
                        mxy += w * a * b;
                    }
                double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
                acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        total += acc / (static_cast<double>(oh) * ow);
    }
    return total / 3.0;
}

}  // namespace painter
