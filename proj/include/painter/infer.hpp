#pragma once

#include "painter/dataset.hpp"
#include "painter/metrics.hpp"
#include "painter/model.hpp"
#include "painter/panoptic.hpp"

namespace painter {

struct InferResult {
    Image canvas;      // full predicted output canvas
    Image prediction;  // the query's predicted (still encoded) output image
};

// In-context inference: condition on a visible prompt pair, inpaint the
// query's fully-masked output half.
inline InferResult in_context_infer(const ParamStore& params, const ModelConfig& cfg,
                                    const std::pair<Image, Image>& prompt, const Image& query) {
    require(prompt.first.height == cfg.image_h && prompt.first.width == cfg.image_w,
            "prompt dimensions do not match the model");
    auto [canvas, plan] = build_inference_canvas(prompt, query, cfg.patch_size, cfg.axis);
    Tensor pred = forward(params, cfg, canvas, plan);
    InferResult res;
    res.canvas = tensor_to_image(pred);
    if (cfg.axis == StitchAxis::vertical)
        res.prediction = crop_image(res.canvas, cfg.image_h, 0, cfg.image_h, cfg.image_w);
    else
        res.prediction = crop_image(res.canvas, 0, cfg.image_w, cfg.image_h, cfg.image_w);
    return res;
}

// Higher-is-better scalar used for prompt search and ranking.
struct TaskScore {
    double value = 0.0;          // comparable scalar
    std::string metric_name;     // what `value` is (negated where noted)
};

inline double keypoint_area(const KeypointSet& gt) {
    double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
    for (const auto& kp : gt) {
        x0 = std::min(x0, kp.x);
        x1 = std::max(x1, kp.x);
        y0 = std::min(y0, kp.y);
        y1 = std::max(y1, kp.y);
    }
    return std::max(1.0, (x1 - x0) * (y1 - y0));
}

// Decode a predicted output image and score it against the native ground
// truth of its task.
inline TaskScore score_prediction(TaskKind task, const Image& prediction, const NativeTarget& gt,
                                  const CodecContext& codec) {
    switch (task) {
        case TaskKind::depth: {
            DepthMetrics m = depth_metrics(decode_depth(prediction), std::get<DepthMap>(gt));
            return {-m.rmse, "neg_rmse"};
        }
        case TaskKind::semseg: {
            auto res = decode_semseg(prediction, codec.semseg_table);
            // decoded maps have no IGNORE; compare on gt's non-ignored pixels
            return {miou(res.labels, std::get<LabelMap>(gt)).miou, "miou"};
        }
        case TaskKind::keypoints: {
            const auto& gt_kps = std::get<KeypointSet>(gt);
            KeypointSet pred = decode_keypoints(prediction, codec.keypoint_table, codec.kp_cfg);
            return {oks(pred, gt_kps, keypoint_area(gt_kps)), "oks"};
        }
        case TaskKind::instances: {
            const auto& gt_insts = std::get<InstanceSet>(gt);
            InstanceSet pred = decode_instances(prediction, codec.inst_cfg, codec.location_table);
            if (gt_insts.empty()) return {pred.empty() ? 1.0 : 0.0, "mean_mask_iou"};
            double sum = 0.0;
            for (const auto& g : gt_insts) {
                double best = 0.0;
                for (const auto& p : pred) best = std::max(best, mask_iou(p, g));
                sum += best;
            }
            return {sum / static_cast<double>(gt_insts.size()), "mean_mask_iou"};
        }
        default:
            return {psnr(prediction, std::get<Image>(gt)), "psnr"};
    }
}

// Queries share one prompt; returns the mean score over the evaluation set.
inline double evaluate_prompt(const ParamStore& params, const ModelConfig& cfg,
                              const std::pair<Image, Image>& prompt,
                              const std::vector<LoadedSample>& eval_set, TaskKind task,
                              const CodecContext& codec) {
    require(!eval_set.empty(), "empty evaluation set");
    std::vector<double> scores(eval_set.size());
    parallel_for(eval_set.size(), [&](std::size_t i) {
        InferResult res = in_context_infer(params, cfg, prompt, eval_set[i].input);
        scores[i] = score_prediction(task, res.prediction, eval_set[i].target, codec).value;
    });
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

// The clean (unaugmented) prompt pair for a sample.
inline std::pair<Image, Image> sample_prompt_pair(TaskKind task, const LoadedSample& sample,
                                                  const CodecContext& codec) {
    return {sample.input,
            encode_target(task, sample.target, codec, sample.input.height, sample.input.width)};
}

}  // namespace painter
