#pragma once

#include <array>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "painter/canvas.hpp"
#include "painter/image.hpp"
#include "painter/rng.hpp"
#include "painter/tape.hpp"

namespace painter {

enum class HeadKind { light, linear };

// Encoder-only ViT with dual input/output branches merged after a few blocks
// and a light pixel-regression head.
struct ModelConfig {
    int patch_size = 8;
    int embed_dim = 128;
    int depth = 6;
    int heads = 8;
    int merge_after = 3;            // branches are summed after this many blocks
    std::array<int, 4> taps{};      // 1-based block indices in [merge_after, depth]; 0 = derive
    double drop_path_rate = 0.1;
    double mlp_ratio = 4.0;
    int image_h = 64, image_w = 64;  // single task image; the canvas holds two
    StitchAxis axis = StitchAxis::vertical;
    bool share_pos_embed = true;
    HeadKind head = HeadKind::light;

    int canvas_h() const { return axis == StitchAxis::vertical ? 2 * image_h : image_h; }
    int canvas_w() const { return axis == StitchAxis::vertical ? image_w : 2 * image_w; }
    int grid_rows() const { return canvas_h() / patch_size; }
    int grid_cols() const { return canvas_w() / patch_size; }
    int tokens() const { return grid_rows() * grid_cols(); }
    int patch_dim() const { return patch_size * patch_size * 3; }
    int hidden_dim() const { return static_cast<int>(embed_dim * mlp_ratio); }

    // Taps pick the 4 feature maps: ceil(i*N/4) clamped up to the merge point.
    std::array<int, 4> effective_taps() const {
        if (taps[0] != 0) return taps;
        std::array<int, 4> t{};
        for (int i = 1; i <= 4; ++i)
            t[i - 1] = std::max(merge_after, (i * depth + 3) / 4);
        return t;
    }

    void validate() const {
        require(patch_size > 0 && canvas_h() % patch_size == 0 && canvas_w() % patch_size == 0,
                "model config: patch size must divide the canvas dimensions");
        require(merge_after >= 0 && merge_after < depth, "model config: need merge_after < depth");
        require(embed_dim % heads == 0, "model config: embed_dim not divisible by heads");
        auto t = effective_taps();
        for (int i = 0; i < 4; ++i) {
            require(t[i] >= merge_after && t[i] <= depth, "model config: tap outside [merge, depth]");
            require(i == 0 || t[i] >= t[i - 1], "model config: taps must be non-decreasing");
        }
        require(drop_path_rate >= 0.0 && drop_path_rate < 1.0, "model config: bad drop path rate");
    }
};

// Named parameter tensors in a stable order.
struct ParamStore {
    std::vector<std::pair<std::string, Tensor>> items;

    Tensor& at(const std::string& name) {
        for (auto& [n, t] : items)
            if (n == name) return t;
        throw error("no such parameter: " + name);
    }
    const Tensor& at(const std::string& name) const {
        for (const auto& [n, t] : items)
            if (n == name) return t;
        throw error("no such parameter: " + name);
    }
    std::size_t total_params() const {
        std::size_t n = 0;
        for (const auto& [_, t] : items) n += t.numel();
        return n;
    }
    bool operator==(const ParamStore& o) const {
        if (items.size() != o.items.size()) return false;
        for (std::size_t i = 0; i < items.size(); ++i)
            if (items[i].first != o.items[i].first || items[i].second.shape != o.items[i].second.shape ||
                items[i].second.data != o.items[i].second.data)
                return false;
        return true;
    }
};

// Weight decay does not touch norm affines, biases, positional embeddings or
// the mask token.
inline bool decay_exempt(const std::string& name) {
    return name.find("norm") != std::string::npos || name == "pos_embed" ||
           name == "pos_embed_out" || name == "mask_token" || name.ends_with(".b") ||
           name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with(".g") ||
           name.ends_with("bqkv") || name.ends_with(".bo");
}

inline ParamStore init_params(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    ParamStore ps;
    auto normal_init = [&](const std::string& name, std::vector<int> shape) {
        Tensor t(std::move(shape));
        for (auto& v : t.data) v = static_cast<float>(rng.trunc_normal(0.02));
        ps.items.emplace_back(name, std::move(t));
    };
    auto const_init = [&](const std::string& name, std::vector<int> shape, float fill) {
        ps.items.emplace_back(name, Tensor(std::move(shape), fill));
    };
    const int d = cfg.embed_dim;
    normal_init("patch_embed.w", {cfg.patch_dim(), d});
    const_init("patch_embed.b", {d}, 0.f);
    normal_init("pos_embed", {cfg.tokens(), d});
    if (!cfg.share_pos_embed) normal_init("pos_embed_out", {cfg.tokens(), d});
    normal_init("mask_token", {d});
    for (int i = 0; i < cfg.depth; ++i) {
        std::string b = "block" + std::to_string(i) + ".";
        const_init(b + "norm1.g", {d}, 1.f);
        const_init(b + "norm1.b", {d}, 0.f);
        normal_init(b + "attn.wqkv", {d, 3 * d});
        const_init(b + "attn.bqkv", {3 * d}, 0.f);
        normal_init(b + "attn.wo", {d, d});
        const_init(b + "attn.bo", {d}, 0.f);
        const_init(b + "norm2.g", {d}, 1.f);
        const_init(b + "norm2.b", {d}, 0.f);
        normal_init(b + "mlp.w1", {d, cfg.hidden_dim()});
        const_init(b + "mlp.b1", {cfg.hidden_dim()}, 0.f);
        normal_init(b + "mlp.w2", {cfg.hidden_dim(), d});
        const_init(b + "mlp.b2", {d}, 0.f);
    }
    if (cfg.head == HeadKind::light) {
        normal_init("head.fc1.w", {4 * d, d});
        const_init("head.fc1.b", {d}, 0.f);
        normal_init("head.conv.w", {9 * d, d});
        const_init("head.conv.b", {d}, 0.f);
        normal_init("head.out.w", {d, cfg.patch_dim()});
        const_init("head.out.b", {cfg.patch_dim()}, 0.f);
    } else {
        normal_init("head.out.w", {4 * d, cfg.patch_dim()});
        const_init("head.out.b", {cfg.patch_dim()}, 0.f);
    }
    return ps;
}

// Records the whole forward computation onto a tape. Templated on the scalar
// so the double instantiation can back the gradient verification.
template <class S>
class ForwardGraph {
  public:
    ForwardGraph(TapeT<S>& tape, const ModelConfig& cfg, const ParamStore& params,
                 bool params_require_grad)
        : tape_(tape), cfg_(cfg) {
        cfg.validate();
        for (const auto& [name, t] : params.items) {
            int id;
            if constexpr (std::is_same_v<S, float>) {
                id = tape_.leaf_ref(&t, params_require_grad);
            } else {
                TensorT<S> c;
                c.shape = t.shape;
                c.data.assign(t.data.begin(), t.data.end());
                id = tape_.leaf(std::move(c), params_require_grad);
            }
            ids_[name] = id;
            ordered_.push_back(id);
        }
    }

    int param(const std::string& name) const {
        auto it = ids_.find(name);
        require(it != ids_.end(), "no such parameter: " + name);
        return it->second;
    }

    // Gradients in ParamStore order after tape.backward(); untouched
    // parameters come back as zero tensors.
    std::vector<TensorT<S>> collect_grads(const TapeT<S>& tape) const {
        std::vector<TensorT<S>> grads;
        grads.reserve(ordered_.size());
        for (int id : ordered_) {
            const TensorT<S>& g = tape.grad(id);
            grads.push_back(g.empty() ? TensorT<S>(tape.value(id).shape) : g);
        }
        return grads;
    }

    // input/output canvas nodes are [Hc, Wc, 3] unit-real tensors already on
    // the tape (leaves or the output of prompt-assembly ops).
    int build(int input_canvas, int output_canvas, const MaskPlan& plan, bool training,
              Rng* drop_rng) {
        require(plan.rows == cfg_.grid_rows() && plan.cols == cfg_.grid_cols(),
                "mask plan grid does not match the model grid");
        const int d = cfg_.embed_dim;
        int xin = tape_.patchify(input_canvas, cfg_.patch_size);
        int xout = tape_.patchify(output_canvas, cfg_.patch_size);
        int tin = tape_.linear(xin, param("patch_embed.w"), param("patch_embed.b"));
        int tout = tape_.linear(xout, param("patch_embed.w"), param("patch_embed.b"));
        tout = tape_.mask_scatter(tout, param("mask_token"), plan.bitmap());
        tin = tape_.add(tin, param("pos_embed"));
        tout = tape_.add(tout, param(cfg_.share_pos_embed ? "pos_embed" : "pos_embed_out"));
        std::vector<int> feat_after(cfg_.depth + 1, -1);
        for (int i = 0; i < cfg_.merge_after; ++i) {
            tin = block(tin, i, training, drop_rng);
            tout = block(tout, i, training, drop_rng);
        }
        int x = tape_.add(tin, tout);
        feat_after[cfg_.merge_after] = x;
        for (int i = cfg_.merge_after; i < cfg_.depth; ++i) {
            x = block(x, i, training, drop_rng);
            feat_after[i + 1] = x;
        }
        std::vector<int> feats;
        for (int t : cfg_.effective_taps()) feats.push_back(feat_after[t]);
        int feat = tape_.concat_last(feats);
        int out;
        if (cfg_.head == HeadKind::light) {
            int h1 = tape_.gelu(tape_.linear(feat, param("head.fc1.w"), param("head.fc1.b")));
            int grid = tape_.reshape(h1, {cfg_.grid_rows(), cfg_.grid_cols(), d});
            int cv = tape_.gelu(tape_.conv3x3(grid, param("head.conv.w"), param("head.conv.b")));
            int flat = tape_.reshape(cv, {cfg_.tokens(), d});
            out = tape_.linear(flat, param("head.out.w"), param("head.out.b"));
        } else {
            out = tape_.linear(feat, param("head.out.w"), param("head.out.b"));
        }
        return tape_.unpatchify(out, cfg_.patch_size, cfg_.grid_rows(), cfg_.grid_cols());
    }

  private:
    int block(int x, int i, bool training, Rng* drop_rng) {
        std::string b = "block" + std::to_string(i) + ".";
        int a = tape_.layernorm(x, param(b + "norm1.g"), param(b + "norm1.b"));
        a = attention(a, b);
        x = tape_.add(x, residual_drop(a, i, training, drop_rng));
        int m = tape_.layernorm(x, param(b + "norm2.g"), param(b + "norm2.b"));
        m = tape_.linear(m, param(b + "mlp.w1"), param(b + "mlp.b1"));
        m = tape_.gelu(m);
        m = tape_.linear(m, param(b + "mlp.w2"), param(b + "mlp.b2"));
        return tape_.add(x, residual_drop(m, i, training, drop_rng));
    }

    int attention(int x, const std::string& b) {
        const int d = cfg_.embed_dim;
        int qkv = tape_.linear(x, param(b + "attn.wqkv"), param(b + "attn.bqkv"));
        int q = tape_.split_heads(tape_.slice_last(qkv, 0, d), cfg_.heads);
        int k = tape_.split_heads(tape_.slice_last(qkv, d, d), cfg_.heads);
        int v = tape_.split_heads(tape_.slice_last(qkv, 2 * d, d), cfg_.heads);
        q = tape_.scale(q, static_cast<S>(1.0 / std::sqrt(static_cast<double>(d / cfg_.heads))));
        int att = tape_.softmax_last(tape_.bmm(q, tape_.transpose12(k)));
        int o = tape_.merge_heads(tape_.bmm(att, v));
        return tape_.linear(o, param(b + "attn.wo"), param(b + "attn.bo"));
    }

    // Stochastic depth, linearly scaled over blocks; the kept path is
    // rescaled by 1/(1-p). Identity at inference.
    int residual_drop(int x, int block_idx, bool training, Rng* drop_rng) {
        double rate = cfg_.drop_path_rate * block_idx / std::max(cfg_.depth - 1, 1);
        if (!training || rate <= 0.0 || drop_rng == nullptr) return x;
        if (drop_rng->bernoulli(rate)) return tape_.scale(x, S(0));
        return tape_.scale(x, static_cast<S>(1.0 / (1.0 - rate)));
    }

    TapeT<S>& tape_;
    const ModelConfig& cfg_;
    std::unordered_map<std::string, int> ids_;
    std::vector<int> ordered_;
};

template <class S>
TensorT<S> image_to_tensor(const Image& img) {
    TensorT<S> t({img.height, img.width, 3});
    for (std::size_t i = 0; i < img.data.size(); ++i) t.data[i] = static_cast<S>(img.data[i] / 255.0);
    return t;
}

template <class S>
Image tensor_to_image(const TensorT<S>& t) {
    require(t.shape.size() == 3 && t.shape[2] == 3, "tensor_to_image: want [H, W, 3]");
    Image img(t.shape[0], t.shape[1]);
    for (std::size_t i = 0; i < t.data.size(); ++i)
        img.data[i] = to_u8(static_cast<double>(t.data[i]));
    return img;
}

// Inference-mode forward pass: predicted output canvas in unit-real form.
inline Tensor forward(const ParamStore& params, const ModelConfig& cfg, const Canvas& canvas,
                      const MaskPlan& plan) {
    Tape tape;
    ForwardGraph<float> graph(tape, cfg, params, /*params_require_grad=*/false);
    int in = tape.leaf(image_to_tensor<float>(canvas.input), false);
    int out = tape.leaf(image_to_tensor<float>(canvas.output), false);
    int pred = graph.build(in, out, plan, /*training=*/false, nullptr);
    require(all_finite(tape.value(pred)), "non-finite activations in forward pass");
    return tape.value(pred);
}

}  // namespace painter
