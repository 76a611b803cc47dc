#pragma once

#include "painter/infer.hpp"
#include "painter/train.hpp"

namespace painter {

struct PromptSearchResult {
    std::size_t best_index = 0;
    std::pair<Image, Image> best;
    std::vector<double> scores;  // one per candidate, input order
};

// Heuristic prompt selection: run every candidate pair over the evaluation
// set, keep the argmax (ties go to the first).
inline PromptSearchResult search_prompts(const ParamStore& params, const ModelConfig& cfg,
                                         const std::vector<std::pair<Image, Image>>& candidates,
                                         const std::vector<LoadedSample>& eval_set, TaskKind task,
                                         const CodecContext& codec) {
    require(!candidates.empty(), "prompt search: no candidates");
    PromptSearchResult res;
    res.scores.resize(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        res.scores[i] = evaluate_prompt(params, cfg, candidates[i], eval_set, task, codec);
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (res.scores[i] > res.scores[res.best_index]) res.best_index = i;
    res.best = candidates[res.best_index];
    return res;
}

struct PromptLearnConfig {
    long steps = 100;
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double smooth_l1_beta = 0.01;
    LossKind loss = LossKind::smooth_l1;
};

struct PromptLearnResult {
    std::pair<Image, Image> prompt;  // the best pair seen (never worse than init)
    std::vector<double> loss_curve;  // mean training loss per step, step 0 = init
};

// Learned prompts: the prompt's input and output pixels are the only
// optimized variables; the model is frozen. Optimization happens in
// unit-real pixel space, clamped to [0, 1] after every step, so the result
// stays a saveable image pair.
inline PromptLearnResult learn_prompts(const ParamStore& params, const ModelConfig& cfg,
                                       const std::pair<Image, Image>& init,
                                       const std::vector<LoadedSample>& queries, TaskKind task,
                                       const CodecContext& codec, const PromptLearnConfig& pcfg) {
    require(!queries.empty(), "prompt learning: no queries");
    require(init.first.height == cfg.image_h && init.first.width == cfg.image_w,
            "prompt learning: init prompt dimensions do not match the model");
    using T = Tensor;
    T prompt_in = image_to_tensor<float>(init.first);
    T prompt_out = image_to_tensor<float>(init.second);

    // fixed query-side tensors
    struct Query {
        T input;
        T target_canvas;  // zeros on the prompt half, encoded target below
    };
    std::vector<Query> fixed;
    for (const auto& q : queries) {
        Query qq;
        qq.input = image_to_tensor<float>(q.input);
        Image enc = encode_target(task, q.target, codec, q.input.height, q.input.width);
        T enc_t = image_to_tensor<float>(enc);
        qq.target_canvas = T({cfg.canvas_h(), cfg.canvas_w(), 3});
        std::copy(enc_t.data.begin(), enc_t.data.end(),
                  qq.target_canvas.data.begin() + enc_t.numel());  // query half
        fixed.push_back(std::move(qq));
    }
    require(cfg.axis == StitchAxis::vertical, "prompt learning supports vertical stitching");
    MaskPlan plan;
    plan.rows = cfg.grid_rows();
    plan.cols = cfg.grid_cols();
    plan.ratio = 0.5;
    for (int y = plan.rows / 2; y < plan.rows; ++y)
        for (int x = 0; x < plan.cols; ++x) plan.masked.push_back(y * plan.cols + x);
    auto pixel_mask = pixel_mask_from_plan(plan, cfg.patch_size);

    auto mean_loss_and_grads = [&](T* gin, T* gout) {
        if (gin) {
            *gin = T(prompt_in.shape);
            *gout = T(prompt_out.shape);
        }
        double total = 0.0;
        for (const auto& q : fixed) {
            Tape tape;
            ForwardGraph<float> graph(tape, cfg, params, /*params_require_grad=*/false);
            int pin = tape.leaf(prompt_in, gin != nullptr);
            int pout = tape.leaf(prompt_out, gin != nullptr);
            int qin = tape.leaf(q.input, false);
            int zeros = tape.leaf(T({cfg.image_h, cfg.image_w, 3}), false);
            int canvas_in = tape.stack_rows(pin, qin);
            int canvas_out = tape.stack_rows(pout, zeros);
            int pred = graph.build(canvas_in, canvas_out, plan, /*training=*/false, nullptr);
            int loss = tape.masked_loss(pred, q.target_canvas, pixel_mask,
                                        static_cast<float>(pcfg.smooth_l1_beta), pcfg.loss);
            total += tape.value(loss).data[0];
            if (gin) {
                tape.backward(loss);
                const T& gi = tape.grad(pin);
                const T& go = tape.grad(pout);
                for (std::size_t k = 0; k < gin->data.size(); ++k) {
                    if (!gi.empty()) gin->data[k] += gi.data[k];
                    if (!go.empty()) gout->data[k] += go.data[k];
                }
            }
        }
        double inv = 1.0 / static_cast<double>(fixed.size());
        if (gin)
            for (std::size_t k = 0; k < gin->data.size(); ++k) {
                gin->data[k] *= inv;
                gout->data[k] *= inv;
            }
        return total * inv;
    };

    PromptLearnResult res;
    double init_loss = mean_loss_and_grads(nullptr, nullptr);
    res.loss_curve.push_back(init_loss);
    double best_loss = init_loss;
    T best_in = prompt_in, best_out = prompt_out;

    // Adam without weight decay on the two pixel tensors
    T m_in(prompt_in.shape), v_in(prompt_in.shape), m_out(prompt_out.shape), v_out(prompt_out.shape);
    for (long step = 1; step <= pcfg.steps; ++step) {
        T gin, gout;
        double loss = mean_loss_and_grads(&gin, &gout);
        require(std::isfinite(loss), "prompt learning: non-finite loss");
        double bc1 = 1.0 - std::pow(pcfg.beta1, static_cast<double>(step));
        double bc2 = 1.0 - std::pow(pcfg.beta2, static_cast<double>(step));
        auto update = [&](T& p, const T& g, T& m, T& v) {
            for (std::size_t k = 0; k < p.data.size(); ++k) {
                double mk = pcfg.beta1 * m.data[k] + (1.0 - pcfg.beta1) * g.data[k];
                double vk = pcfg.beta2 * v.data[k] + (1.0 - pcfg.beta2) * g.data[k] * g.data[k];
                m.data[k] = static_cast<float>(mk);
                v.data[k] = static_cast<float>(vk);
                double w = p.data[k] - pcfg.lr * (mk / bc1) / (std::sqrt(vk / bc2) + pcfg.eps);
                p.data[k] = static_cast<float>(std::clamp(w, 0.0, 1.0));
            }
        };
        update(prompt_in, gin, m_in, v_in);
        update(prompt_out, gout, m_out, v_out);
        double after = mean_loss_and_grads(nullptr, nullptr);
        res.loss_curve.push_back(after);
        if (after < best_loss) {
            best_loss = after;
            best_in = prompt_in;
            best_out = prompt_out;
        }
    }
    // The returned pair is quantized to u8 images; keep the init pair if
    // quantization ate the improvement, so the loss never increases.
    res.prompt = {tensor_to_image(best_in), tensor_to_image(best_out)};
    prompt_in = image_to_tensor<float>(res.prompt.first);
    prompt_out = image_to_tensor<float>(res.prompt.second);
    if (mean_loss_and_grads(nullptr, nullptr) > init_loss) res.prompt = init;
    return res;
}

}  // namespace painter
