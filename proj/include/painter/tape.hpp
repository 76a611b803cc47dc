#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "painter/common.hpp"

namespace painter {

// 64-byte-aligned storage so Eigen's vectorized kernels peel identically for
// every buffer; float results are then bitwise reproducible regardless of
// where the allocator placed the data.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    template <class U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(Align)); }
    bool operator==(const AlignedAllocator&) const { return true; }
    bool operator!=(const AlignedAllocator&) const { return false; }
};

template <class S>
struct TensorT {
    using Storage = std::vector<S, AlignedAllocator<S>>;

    std::vector<int> shape;
    Storage data;

    TensorT() = default;
    explicit TensorT(std::vector<int> sh, S fill = S(0)) : shape(std::move(sh)) {
        data.assign(numel_of(shape), fill);
    }
    static std::size_t numel_of(const std::vector<int>& sh) {
        std::size_t n = 1;
        for (int d : sh) n *= static_cast<std::size_t>(d);
        return n;
    }
    std::size_t numel() const { return data.size(); }
    int dim(int i) const { return shape[i]; }
    bool empty() const { return data.empty(); }
};

using Tensor = TensorT<float>;

template <class S>
bool all_finite(const TensorT<S>& t) {
    for (S v : t.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

enum class LossKind { smooth_l1, l1, l2 };

// Reverse-mode automatic differentiation over a dynamically recorded graph.
// Ops execute eagerly; backward() replays the tape in reverse. The scalar
// type is a template parameter: float carries training, double carries the
// finite-difference verification of the very same code path.
template <class S>
class TapeT {
  public:
    using Tensor = TensorT<S>;
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MatMap = Eigen::Map<Mat>;
    using CMatMap = Eigen::Map<const Mat>;

    int leaf(Tensor v, bool requires_grad) {
        Node n;
        n.op = Op::leaf;
        n.val = std::move(v);
        n.rg = requires_grad;
        return push(std::move(n));
    }

    // External leaf: the tape reads the caller's tensor (which must outlive
    // the tape) instead of copying it. Used for model parameters.
    int leaf_ref(const Tensor* v, bool requires_grad) {
        Node n;
        n.op = Op::leaf;
        n.ext = v;
        n.rg = requires_grad;
        return push(std::move(n));
    }

    const Tensor& value(int id) const {
        const Node& n = nodes_[id];
        return n.ext ? *n.ext : n.val;
    }

    const Tensor& grad(int id) const { return grads_[id]; }
    bool requires_grad(int id) const { return nodes_[id].rg; }
    std::size_t size() const { return nodes_.size(); }

    // y = x * w + b, x:[m,k] w:[k,n] b:[n]
    int linear(int x, int w, int b) {
        const Tensor& xv = value(x);
        const Tensor& wv = value(w);
        const Tensor& bv = value(b);
        int m = xv.shape[0], k = xv.shape[1], n = wv.shape[1];
        require(wv.shape[0] == k && bv.shape[0] == n, "linear: shape mismatch");
        Node nd = make(Op::linear, {x, w, b});
        nd.val = Tensor({m, n});
        MatMap y(nd.val.data.data(), m, n);
        y.noalias() = CMatMap(xv.data.data(), m, k) * CMatMap(wv.data.data(), k, n);
        y.rowwise() += Eigen::Map<const Eigen::RowVector<S, Eigen::Dynamic>>(bv.data.data(), n);
        return push(std::move(nd));
    }

    // batched matmul, a:[B,m,k] b:[B,k,n]
    int bmm(int a, int b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        int B = av.shape[0], m = av.shape[1], k = av.shape[2], n = bv.shape[2];
        require(bv.shape[0] == B && bv.shape[1] == k, "bmm: shape mismatch");
        Node nd = make(Op::bmm, {a, b});
        nd.val = Tensor({B, m, n});
        for (int i = 0; i < B; ++i) {
            MatMap y(nd.val.data.data() + static_cast<std::size_t>(i) * m * n, m, n);
            y.noalias() = CMatMap(av.data.data() + static_cast<std::size_t>(i) * m * k, m, k) *
                          CMatMap(bv.data.data() + static_cast<std::size_t>(i) * k * n, k, n);
        }
        return push(std::move(nd));
    }

    int transpose12(int a) {
        const Tensor& av = value(a);
        int B = av.shape[0], m = av.shape[1], n = av.shape[2];
        Node nd = make(Op::transpose12, {a});
        nd.val = Tensor({B, n, m});
        for (int i = 0; i < B; ++i)
            MatMap(nd.val.data.data() + static_cast<std::size_t>(i) * m * n, n, m) =
                CMatMap(av.data.data() + static_cast<std::size_t>(i) * m * n, m, n).transpose();
        return push(std::move(nd));
    }

    // [T, h*dh] -> [h, T, dh]
    int split_heads(int x, int heads) {
        const Tensor& xv = value(x);
        int t = xv.shape[0], d = xv.shape[1], dh = d / heads;
        require(d % heads == 0, "split_heads: dim not divisible by heads");
        Node nd = make(Op::split_heads, {x});
        nd.i0 = heads;
        nd.val = Tensor({heads, t, dh});
        for (int h = 0; h < heads; ++h)
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < dh; ++j)
                    nd.val.data[(static_cast<std::size_t>(h) * t + i) * dh + j] =
                        xv.data[static_cast<std::size_t>(i) * d + h * dh + j];
        return push(std::move(nd));
    }

    // [h, T, dh] -> [T, h*dh]
    int merge_heads(int x) {
        const Tensor& xv = value(x);
        int heads = xv.shape[0], t = xv.shape[1], dh = xv.shape[2];
        Node nd = make(Op::merge_heads, {x});
        nd.val = Tensor({t, heads * dh});
        for (int h = 0; h < heads; ++h)
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < dh; ++j)
                    nd.val.data[static_cast<std::size_t>(i) * heads * dh + h * dh + j] =
                        xv.data[(static_cast<std::size_t>(h) * t + i) * dh + j];
        return push(std::move(nd));
    }

    // softmax over the last dimension (numerically stabilized)
    int softmax_last(int x) {
        const Tensor& xv = value(x);
        int cols = xv.shape.back();
        std::size_t rows = xv.numel() / cols;
        Node nd = make(Op::softmax_last, {x});
        nd.val = Tensor(xv.shape);
        for (std::size_t r = 0; r < rows; ++r) {
            const S* in = xv.data.data() + r * cols;
            S* out = nd.val.data.data() + r * cols;
            S mx = in[0];
            for (int c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
            S sum = S(0);
            for (int c = 0; c < cols; ++c) {
                out[c] = std::exp(in[c] - mx);
                sum += out[c];
            }
            for (int c = 0; c < cols; ++c) out[c] /= sum;
        }
        return push(std::move(nd));
    }

    int scale(int x, S factor) {
        const Tensor& xv = value(x);
        Node nd = make(Op::scale, {x});
        nd.s0 = factor;
        nd.val = Tensor(xv.shape);
        for (std::size_t i = 0; i < xv.numel(); ++i) nd.val.data[i] = xv.data[i] * factor;
        return push(std::move(nd));
    }

    int add(int a, int b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        require(av.shape == bv.shape, "add: shape mismatch");
        Node nd = make(Op::add, {a, b});
        nd.val = Tensor(av.shape);
        for (std::size_t i = 0; i < av.numel(); ++i) nd.val.data[i] = av.data[i] + bv.data[i];
        return push(std::move(nd));
    }

    int gelu(int x) {
        const Tensor& xv = value(x);
        Node nd = make(Op::gelu, {x});
        nd.val = Tensor(xv.shape);
        for (std::size_t i = 0; i < xv.numel(); ++i) {
            S v = xv.data[i];
            nd.val.data[i] = S(0.5) * v * (S(1) + std::erf(v * S(M_SQRT1_2)));
        }
        return push(std::move(nd));
    }

    // layer normalization over the last dimension with affine parameters
    int layernorm(int x, int gamma, int beta, S eps = S(1e-6)) {
        const Tensor& xv = value(x);
        int d = xv.shape.back();
        std::size_t rows = xv.numel() / d;
        require(value(gamma).shape == std::vector<int>{d} && value(beta).shape == std::vector<int>{d},
                "layernorm: affine shape mismatch");
        Node nd = make(Op::layernorm, {x, gamma, beta});
        nd.s0 = eps;
        nd.val = Tensor(xv.shape);
        nd.saved = Tensor({static_cast<int>(rows), 2});  // mean, inv std per row
        const S* g = value(gamma).data.data();
        const S* b = value(beta).data.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const S* in = xv.data.data() + r * d;
            S* out = nd.val.data.data() + r * d;
            S mean = S(0);
            for (int c = 0; c < d; ++c) mean += in[c];
            mean /= S(d);
            S var = S(0);
            for (int c = 0; c < d; ++c) var += (in[c] - mean) * (in[c] - mean);
            var /= S(d);
            S inv = S(1) / std::sqrt(var + eps);
            nd.saved.data[2 * r] = mean;
            nd.saved.data[2 * r + 1] = inv;
            for (int c = 0; c < d; ++c) out[c] = (in[c] - mean) * inv * g[c] + b[c];
        }
        return push(std::move(nd));
    }

    // rows of x flagged in the bitmap are replaced by the token vector
    int mask_scatter(int x, int token, std::vector<std::uint8_t> bitmap) {
        const Tensor& xv = value(x);
        const Tensor& tv = value(token);
        int t = xv.shape[0], d = xv.shape[1];
        require(tv.shape == std::vector<int>{d}, "mask_scatter: token dim mismatch");
        require(bitmap.size() == static_cast<std::size_t>(t), "mask_scatter: bitmap size mismatch");
        Node nd = make(Op::mask_scatter, {x, token});
        nd.mask = std::move(bitmap);
        nd.val = Tensor({t, d});
        for (int i = 0; i < t; ++i) {
            const S* src = nd.mask[i] ? tv.data.data() : xv.data.data() + static_cast<std::size_t>(i) * d;
            std::copy(src, src + d, nd.val.data.data() + static_cast<std::size_t>(i) * d);
        }
        return push(std::move(nd));
    }

    int concat_last(const std::vector<int>& xs) {
        require(!xs.empty(), "concat_last: no inputs");
        int t = value(xs[0]).shape[0];
        int dsum = 0;
        for (int id : xs) {
            require(value(id).shape[0] == t, "concat_last: row mismatch");
            dsum += value(id).shape[1];
        }
        Node nd;
        nd.op = Op::concat_last;
        nd.many = xs;
        for (int id : xs) nd.rg = nd.rg || nodes_[id].rg;
        nd.val = Tensor({t, dsum});
        int off = 0;
        for (int id : xs) {
            const Tensor& v = value(id);
            int d = v.shape[1];
            for (int i = 0; i < t; ++i)
                std::copy(v.data.data() + static_cast<std::size_t>(i) * d,
                          v.data.data() + static_cast<std::size_t>(i) * d + d,
                          nd.val.data.data() + static_cast<std::size_t>(i) * dsum + off);
            off += d;
        }
        return push(std::move(nd));
    }

    int slice_last(int x, int start, int len) {
        const Tensor& xv = value(x);
        int t = xv.shape[0], d = xv.shape[1];
        require(start >= 0 && start + len <= d, "slice_last: out of range");
        Node nd = make(Op::slice_last, {x});
        nd.i0 = start;
        nd.i1 = len;
        nd.val = Tensor({t, len});
        for (int i = 0; i < t; ++i)
            std::copy(xv.data.data() + static_cast<std::size_t>(i) * d + start,
                      xv.data.data() + static_cast<std::size_t>(i) * d + start + len,
                      nd.val.data.data() + static_cast<std::size_t>(i) * len);
        return push(std::move(nd));
    }

    // [H, W, 3] -> [T, P*P*3] with T = (H/P)*(W/P), patches in row-major order
    int patchify(int x, int patch) {
        const Tensor& xv = value(x);
        int h = xv.shape[0], w = xv.shape[1], c = xv.shape[2];
        require(h % patch == 0 && w % patch == 0, "patchify: dims not divisible by patch size");
        int gh = h / patch, gw = w / patch;
        Node nd = make(Op::patchify, {x});
        nd.i0 = patch;
        nd.val = Tensor({gh * gw, patch * patch * c});
        img_to_patches(xv.data.data(), nd.val.data.data(), gh, gw, patch, c, w);
        return push(std::move(nd));
    }

    // [T, P*P*3] -> [H, W, 3]
    int unpatchify(int x, int patch, int gh, int gw) {
        const Tensor& xv = value(x);
        int c = xv.shape[1] / (patch * patch);
        require(xv.shape[0] == gh * gw && xv.shape[1] == patch * patch * c,
                "unpatchify: shape mismatch");
        Node nd = make(Op::unpatchify, {x});
        nd.i0 = patch;
        nd.i1 = gh;
        nd.i2 = gw;
        nd.val = Tensor({gh * patch, gw * patch, c});
        patches_to_img(xv.data.data(), nd.val.data.data(), gh, gw, patch, c, gw * patch);
        return push(std::move(nd));
    }

    int reshape(int x, std::vector<int> shape) {
        const Tensor& xv = value(x);
        require(Tensor::numel_of(shape) == xv.numel(), "reshape: element count mismatch");
        Node nd = make(Op::reshape, {x});
        nd.val.shape = std::move(shape);
        nd.val.data = xv.data;
        return push(std::move(nd));
    }

    // stack along dim 0 of [H, W, C] tensors (contiguous, so a flat concat)
    int stack_rows(int a, int b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        require(av.shape.size() == 3 && bv.shape.size() == 3 && av.shape[1] == bv.shape[1] &&
                    av.shape[2] == bv.shape[2],
                "stack_rows: shape mismatch");
        Node nd = make(Op::stack_rows, {a, b});
        nd.val = Tensor({av.shape[0] + bv.shape[0], av.shape[1], av.shape[2]});
        std::copy(av.data.begin(), av.data.end(), nd.val.data.begin());
        std::copy(bv.data.begin(), bv.data.end(), nd.val.data.begin() + av.numel());
        return push(std::move(nd));
    }

    // 3x3 convolution over an [gh, gw, C] feature grid, zero padding 1,
    // computed as im2col + GEMM. w: [9*C, F], b: [F]
    int conv3x3(int x, int w, int b) {
        const Tensor& xv = value(x);
        const Tensor& wv = value(w);
        const Tensor& bv = value(b);
        int gh = xv.shape[0], gw = xv.shape[1], c = xv.shape[2];
        int f = wv.shape[1];
        require(wv.shape[0] == 9 * c && bv.shape[0] == f, "conv3x3: weight shape mismatch");
        Node nd = make(Op::conv3x3, {x, w, b});
        nd.saved = im2col(xv, gh, gw, c);
        nd.val = Tensor({gh, gw, f});
        MatMap y(nd.val.data.data(), gh * gw, f);
        y.noalias() = CMatMap(nd.saved.data.data(), gh * gw, 9 * c) * CMatMap(wv.data.data(), 9 * c, f);
        y.rowwise() += Eigen::Map<const Eigen::RowVector<S, Eigen::Dynamic>>(bv.data.data(), f);
        return push(std::move(nd));
    }

    // scalar dot with fixed weights; the reduction used by gradient tests
    int weighted_sum(int x, Tensor weights) {
        const Tensor& xv = value(x);
        require(weights.numel() == xv.numel(), "weighted_sum: size mismatch");
        Node nd = make(Op::wsum, {x});
        nd.aux = std::move(weights);
        nd.val = Tensor({1});
        double acc = 0.0;
        for (std::size_t i = 0; i < xv.numel(); ++i)
            acc += static_cast<double>(xv.data[i]) * nd.aux.data[i];
        nd.val.data[0] = static_cast<S>(acc);
        return push(std::move(nd));
    }

    // Regression loss over masked pixels only: mean over masked pixels x 3
    // channels of pred - target. pixel_mask is H*W.
    int masked_loss(int pred, const Tensor& target, std::vector<std::uint8_t> pixel_mask, S beta,
                    LossKind kind) {
        const Tensor& pv = value(pred);
        require(pv.shape == target.shape, "masked_loss: pred/target shape mismatch");
        require(pv.shape.size() == 3 && pv.shape[2] == 3, "masked_loss: want [H, W, 3]");
        std::size_t npix = pixel_mask.size();
        require(npix * 3 == pv.numel(), "masked_loss: mask size mismatch");
        std::size_t count = 0;
        for (auto m : pixel_mask) count += m != 0;
        require(count > 0, "masked_loss: empty mask");
        Node nd = make(Op::masked_loss, {pred});
        nd.mask = std::move(pixel_mask);
        nd.aux = target;  // copy; tapes are short-lived
        nd.s0 = beta;
        nd.i0 = static_cast<int>(kind);
        nd.i1 = static_cast<int>(count);
        double acc = 0.0;
        for (std::size_t p = 0; p < npix; ++p) {
            if (!nd.mask[p]) continue;
            for (int ch = 0; ch < 3; ++ch) {
                double x = static_cast<double>(pv.data[p * 3 + ch]) - target.data[p * 3 + ch];
                switch (kind) {
                    case LossKind::smooth_l1:
                        acc += std::abs(x) < beta ? 0.5 * x * x / beta : std::abs(x) - 0.5 * beta;
                        break;
                    case LossKind::l1:
                        acc += std::abs(x);
                        break;
                    case LossKind::l2:
                        acc += 0.5 * x * x;
                        break;
                }
            }
        }
        nd.val = Tensor({1});
        nd.val.data[0] = static_cast<S>(acc / (3.0 * static_cast<double>(count)));
        return push(std::move(nd));
    }

    // Reverse sweep from a scalar root. Gradients accumulate for every node
    // on a requires-grad path; leaves keep theirs for the caller.
    void backward(int root) {
        require(value(root).numel() == 1, "backward: root must be scalar");
        require(nodes_[root].rg, "backward: root does not require grad (graph not recorded)");
        grads_.assign(nodes_.size(), Tensor());
        grads_[root] = Tensor({1}, S(1));
        for (int id = root; id >= 0; --id) {
            const Node& n = nodes_[id];
            if (!n.rg || grads_[id].empty()) continue;
            step_back(id, n);
        }
    }

  private:
    enum class Op {
        leaf,
        linear,
        bmm,
        transpose12,
        split_heads,
        merge_heads,
        softmax_last,
        scale,
        add,
        gelu,
        layernorm,
        mask_scatter,
        concat_last,
        slice_last,
        patchify,
        unpatchify,
        reshape,
        stack_rows,
        conv3x3,
        wsum,
        masked_loss,
    };

    struct Node {
        Op op = Op::leaf;
        std::array<int, 3> in{-1, -1, -1};
        std::vector<int> many;  // concat inputs
        Tensor val;
        const Tensor* ext = nullptr;
        Tensor saved;  // op scratch kept for backward (im2col, norm stats)
        Tensor aux;    // loss target
        std::vector<std::uint8_t> mask;
        bool rg = false;
        int i0 = 0, i1 = 0, i2 = 0;
        S s0{};
    };

    Node make(Op op, std::initializer_list<int> ins) {
        Node n;
        n.op = op;
        int k = 0;
        for (int id : ins) {
            n.in[k++] = id;
            n.rg = n.rg || nodes_[id].rg;
        }
        return n;
    }

    int push(Node&& n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size() - 1);
    }

    Tensor& grad_buf(int id) {
        if (grads_[id].empty()) grads_[id] = Tensor(value(id).shape);
        return grads_[id];
    }

    // img is [gh*p, img_w, c]; pat is [gh*gw, p*p*c]
    void img_to_patches(const S* img, S* pat, int gh, int gw, int p, int c, int img_w) const {
        for (int gy = 0; gy < gh; ++gy)
            for (int gx = 0; gx < gw; ++gx) {
                std::size_t t = static_cast<std::size_t>(gy) * gw + gx;
                for (int py = 0; py < p; ++py) {
                    std::size_t img_off =
                        ((static_cast<std::size_t>(gy) * p + py) * img_w + static_cast<std::size_t>(gx) * p) * c;
                    std::size_t pat_off = t * (p * p * c) + static_cast<std::size_t>(py) * p * c;
                    std::copy(img + img_off, img + img_off + p * c, pat + pat_off);
                }
            }
    }

    void patches_to_img(const S* pat, S* img, int gh, int gw, int p, int c, int img_w) const {
        for (int gy = 0; gy < gh; ++gy)
            for (int gx = 0; gx < gw; ++gx) {
                std::size_t t = static_cast<std::size_t>(gy) * gw + gx;
                for (int py = 0; py < p; ++py) {
                    std::size_t img_off =
                        ((static_cast<std::size_t>(gy) * p + py) * img_w + static_cast<std::size_t>(gx) * p) * c;
                    std::size_t pat_off = t * (p * p * c) + static_cast<std::size_t>(py) * p * c;
                    std::copy(pat + pat_off, pat + pat_off + p * c, img + img_off);
                }
            }
    }

    Tensor im2col(const Tensor& x, int gh, int gw, int c) const {
        Tensor col({gh * gw, 9 * c});
        for (int i = 0; i < gh; ++i)
            for (int j = 0; j < gw; ++j) {
                S* dst = col.data.data() + (static_cast<std::size_t>(i) * gw + j) * 9 * c;
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        int si = i + di, sj = j + dj;
                        if (si >= 0 && si < gh && sj >= 0 && sj < gw) {
                            const S* src = x.data.data() + (static_cast<std::size_t>(si) * gw + sj) * c;
                            std::copy(src, src + c, dst);
                        }
                        dst += c;
                    }
            }
        return col;
    }

    void add_to(Tensor& dst, const S* src, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) dst.data[i] += src[i];
    }

    void step_back(int id, const Node& n) {
        const Tensor& gy = grads_[id];
        auto rg = [&](int k) { return n.in[k] >= 0 && nodes_[n.in[k]].rg; };
        switch (n.op) {
            case Op::leaf:
                break;
            case Op::linear: {
                const Tensor& xv = value(n.in[0]);
                const Tensor& wv = value(n.in[1]);
                int m = xv.shape[0], k = xv.shape[1], c = wv.shape[1];
                CMatMap gym(gy.data.data(), m, c);
                if (rg(0)) {
                    MatMap gx(grad_buf(n.in[0]).data.data(), m, k);
                    gx.noalias() += gym * CMatMap(wv.data.data(), k, c).transpose();
                }
                if (rg(1)) {
                    MatMap gw(grad_buf(n.in[1]).data.data(), k, c);
                    gw.noalias() += CMatMap(xv.data.data(), m, k).transpose() * gym;
                }
                if (rg(2)) {
                    Tensor& gb = grad_buf(n.in[2]);
                    Eigen::Map<Eigen::RowVector<S, Eigen::Dynamic>>(gb.data.data(), c) +=
                        gym.colwise().sum();
                }
                break;
            }
            case Op::bmm: {
                const Tensor& av = value(n.in[0]);
                const Tensor& bv = value(n.in[1]);
                int B = av.shape[0], m = av.shape[1], k = av.shape[2], c = bv.shape[2];
                for (int i = 0; i < B; ++i) {
                    CMatMap gym(gy.data.data() + static_cast<std::size_t>(i) * m * c, m, c);
                    if (rg(0)) {
                        MatMap ga(grad_buf(n.in[0]).data.data() + static_cast<std::size_t>(i) * m * k, m, k);
                        ga.noalias() +=
                            gym * CMatMap(bv.data.data() + static_cast<std::size_t>(i) * k * c, k, c).transpose();
                    }
                    if (rg(1)) {
                        MatMap gb(grad_buf(n.in[1]).data.data() + static_cast<std::size_t>(i) * k * c, k, c);
                        gb.noalias() +=
                            CMatMap(av.data.data() + static_cast<std::size_t>(i) * m * k, m, k).transpose() * gym;
                    }
                }
                break;
            }
            case Op::transpose12: {
                const Tensor& av = value(n.in[0]);
                int B = av.shape[0], m = av.shape[1], c = av.shape[2];
                if (rg(0)) {
                    Tensor& ga = grad_buf(n.in[0]);
                    for (int i = 0; i < B; ++i)
                        MatMap(ga.data.data() + static_cast<std::size_t>(i) * m * c, m, c) +=
                            CMatMap(gy.data.data() + static_cast<std::size_t>(i) * m * c, c, m).transpose();
                }
                break;
            }
            case Op::split_heads: {
                if (!rg(0)) break;
                const Tensor& xv = value(n.in[0]);
                int t = xv.shape[0], d = xv.shape[1], heads = n.i0, dh = d / heads;
                Tensor& gx = grad_buf(n.in[0]);
                for (int h = 0; h < heads; ++h)
                    for (int i = 0; i < t; ++i)
                        for (int j = 0; j < dh; ++j)
                            gx.data[static_cast<std::size_t>(i) * d + h * dh + j] +=
                                gy.data[(static_cast<std::size_t>(h) * t + i) * dh + j];
                break;
            }
            case Op::merge_heads: {
                if (!rg(0)) break;
                const Tensor& xv = value(n.in[0]);
                int heads = xv.shape[0], t = xv.shape[1], dh = xv.shape[2];
                Tensor& gx = grad_buf(n.in[0]);
                for (int h = 0; h < heads; ++h)
                    for (int i = 0; i < t; ++i)
                        for (int j = 0; j < dh; ++j)
                            gx.data[(static_cast<std::size_t>(h) * t + i) * dh + j] +=
                                gy.data[static_cast<std::size_t>(i) * heads * dh + h * dh + j];
                break;
            }
            case Op::softmax_last: {
                if (!rg(0)) break;
                const Tensor& yv = n.val;
                int cols = yv.shape.back();
                std::size_t rows = yv.numel() / cols;
                Tensor& gx = grad_buf(n.in[0]);
                for (std::size_t r = 0; r < rows; ++r) {
                    const S* y = yv.data.data() + r * cols;
                    const S* g = gy.data.data() + r * cols;
                    S dot = S(0);
                    for (int c = 0; c < cols; ++c) dot += y[c] * g[c];
                    S* out = gx.data.data() + r * cols;
                    for (int c = 0; c < cols; ++c) out[c] += y[c] * (g[c] - dot);
                }
                break;
            }
            case Op::scale: {
                if (!rg(0)) break;
                Tensor& gx = grad_buf(n.in[0]);
                for (std::size_t i = 0; i < gy.numel(); ++i) gx.data[i] += gy.data[i] * n.s0;
                break;
            }
            case Op::add: {
                if (rg(0)) add_to(grad_buf(n.in[0]), gy.data.data(), gy.numel());
                if (rg(1)) add_to(grad_buf(n.in[1]), gy.data.data(), gy.numel());
                break;
            }
            case Op::gelu: {
                if (!rg(0)) break;
                const Tensor& xv = value(n.in[0]);
                Tensor& gx = grad_buf(n.in[0]);
                for (std::size_t i = 0; i < xv.numel(); ++i) {
                    S v = xv.data[i];
                    S cdf = S(0.5) * (S(1) + std::erf(v * S(M_SQRT1_2)));
                    S pdf = std::exp(S(-0.5) * v * v) * S(0.3989422804014327);
                    gx.data[i] += gy.data[i] * (cdf + v * pdf);
                }
                break;
            }
            case Op::layernorm: {
                const Tensor& xv = value(n.in[0]);
                const Tensor& gv = value(n.in[1]);
                int d = xv.shape.back();
                std::size_t rows = xv.numel() / d;
                for (std::size_t r = 0; r < rows; ++r) {
                    const S* x = xv.data.data() + r * d;
                    const S* g = gy.data.data() + r * d;
                    S mean = n.saved.data[2 * r];
                    S inv = n.saved.data[2 * r + 1];
                    if (rg(1) || rg(2)) {
                        for (int c = 0; c < d; ++c) {
                            S xh = (x[c] - mean) * inv;
                            if (rg(1)) grad_buf(n.in[1]).data[c] += g[c] * xh;
                            if (rg(2)) grad_buf(n.in[2]).data[c] += g[c];
                        }
                    }
                    if (rg(0)) {
                        S sum_gg = S(0), sum_ggx = S(0);
                        for (int c = 0; c < d; ++c) {
                            S gg = g[c] * gv.data[c];
                            S xh = (x[c] - mean) * inv;
                            sum_gg += gg;
                            sum_ggx += gg * xh;
                        }
                        S* out = grad_buf(n.in[0]).data.data() + r * d;
                        for (int c = 0; c < d; ++c) {
                            S gg = g[c] * gv.data[c];
                            S xh = (x[c] - mean) * inv;
                            out[c] += inv * (gg - sum_gg / S(d) - xh * sum_ggx / S(d));
                        }
                    }
                }
                break;
            }
            case Op::mask_scatter: {
                int t = n.val.shape[0], d = n.val.shape[1];
                if (rg(0)) {
                    Tensor& gx = grad_buf(n.in[0]);
                    for (int i = 0; i < t; ++i)
                        if (!n.mask[i])
                            add_to_offset(gx, static_cast<std::size_t>(i) * d,
                                          gy.data.data() + static_cast<std::size_t>(i) * d, d);
                }
                if (rg(1)) {
                    Tensor& gt = grad_buf(n.in[1]);
                    for (int i = 0; i < t; ++i)
                        if (n.mask[i])
                            for (int j = 0; j < d; ++j)
                                gt.data[j] += gy.data[static_cast<std::size_t>(i) * d + j];
                }
                break;
            }
            case Op::concat_last: {
                int t = n.val.shape[0], dsum = n.val.shape[1];
                int off = 0;
                for (int id2 : n.many) {
                    int d = value(id2).shape[1];
                    if (nodes_[id2].rg) {
                        Tensor& gx = grad_buf(id2);
                        for (int i = 0; i < t; ++i)
                            for (int j = 0; j < d; ++j)
                                gx.data[static_cast<std::size_t>(i) * d + j] +=
                                    gy.data[static_cast<std::size_t>(i) * dsum + off + j];
                    }
                    off += d;
                }
                break;
            }
            case Op::slice_last: {
                if (!rg(0)) break;
                const Tensor& xv = value(n.in[0]);
                int t = xv.shape[0], d = xv.shape[1];
                Tensor& gx = grad_buf(n.in[0]);
                for (int i = 0; i < t; ++i)
                    for (int j = 0; j < n.i1; ++j)
                        gx.data[static_cast<std::size_t>(i) * d + n.i0 + j] +=
                            gy.data[static_cast<std::size_t>(i) * n.i1 + j];
                break;
            }
            case Op::patchify: {
                if (!rg(0)) break;
                const Tensor& xv = value(n.in[0]);
                int h = xv.shape[0], w = xv.shape[1], c = xv.shape[2];
                int p = n.i0, gh = h / p, gw = w / p;
                Tensor tmp(xv.shape);
                patches_to_img(gy.data.data(), tmp.data.data(), gh, gw, p, c, w);
                add_to(grad_buf(n.in[0]), tmp.data.data(), tmp.numel());
                break;
            }
            case Op::unpatchify: {
                if (!rg(0)) break;
                int p = n.i0, gh = n.i1, gw = n.i2;
                const Tensor& xv = value(n.in[0]);
                int c = xv.shape[1] / (p * p);
                Tensor tmp(xv.shape);
                img_to_patches(gy.data.data(), tmp.data.data(), gh, gw, p, c, gw * p);
                add_to(grad_buf(n.in[0]), tmp.data.data(), tmp.numel());
                break;
            }
            case Op::reshape: {
                if (rg(0)) add_to(grad_buf(n.in[0]), gy.data.data(), gy.numel());
                break;
            }
            case Op::stack_rows: {
                const Tensor& av = value(n.in[0]);
                if (rg(0)) add_to(grad_buf(n.in[0]), gy.data.data(), av.numel());
                if (rg(1))
                    add_to(grad_buf(n.in[1]), gy.data.data() + av.numel(), value(n.in[1]).numel());
                break;
            }
            case Op::conv3x3: {
                const Tensor& wv = value(n.in[1]);
                int gh = n.val.shape[0], gw = n.val.shape[1], f = n.val.shape[2];
                int c9 = wv.shape[0], c = c9 / 9;
                CMatMap gym(gy.data.data(), gh * gw, f);
                if (rg(1)) {
                    MatMap gwm(grad_buf(n.in[1]).data.data(), c9, f);
                    gwm.noalias() += CMatMap(n.saved.data.data(), gh * gw, c9).transpose() * gym;
                }
                if (rg(2)) {
                    Eigen::Map<Eigen::RowVector<S, Eigen::Dynamic>>(grad_buf(n.in[2]).data.data(), f) +=
                        gym.colwise().sum();
                }
                if (rg(0)) {
                    Tensor gcol({gh * gw, c9});
                    MatMap gcolm(gcol.data.data(), gh * gw, c9);
                    gcolm.noalias() = gym * CMatMap(wv.data.data(), c9, f).transpose();
                    Tensor& gx = grad_buf(n.in[0]);
                    for (int i = 0; i < gh; ++i)
                        for (int j = 0; j < gw; ++j) {
                            const S* src = gcol.data.data() + (static_cast<std::size_t>(i) * gw + j) * c9;
                            for (int di = -1; di <= 1; ++di)
                                for (int dj = -1; dj <= 1; ++dj) {
                                    int si = i + di, sj = j + dj;
                                    if (si >= 0 && si < gh && sj >= 0 && sj < gw)
                                        add_to_offset(gx, (static_cast<std::size_t>(si) * gw + sj) * c, src, c);
                                    src += c;
                                }
                        }
                }
                break;
            }
            case Op::wsum: {
                if (!rg(0)) break;
                Tensor& gx = grad_buf(n.in[0]);
                for (std::size_t i = 0; i < gx.numel(); ++i)
                    gx.data[i] += gy.data[0] * n.aux.data[i];
                break;
            }
            case Op::masked_loss: {
                if (!rg(0)) break;
                const Tensor& pv = value(n.in[0]);
                auto kind = static_cast<LossKind>(n.i0);
                S beta = n.s0;
                S scale = gy.data[0] / (S(3) * static_cast<S>(n.i1));
                Tensor& gp = grad_buf(n.in[0]);
                for (std::size_t p = 0; p < n.mask.size(); ++p) {
                    if (!n.mask[p]) continue;
                    for (int ch = 0; ch < 3; ++ch) {
                        std::size_t i = p * 3 + ch;
                        S x = pv.data[i] - n.aux.data[i];
                        S d = S(0);
                        switch (kind) {
                            case LossKind::smooth_l1:
                                d = std::abs(x) < beta ? x / beta : (x > 0 ? S(1) : (x < 0 ? S(-1) : S(0)));
                                break;
                            case LossKind::l1:
                                d = x > 0 ? S(1) : (x < 0 ? S(-1) : S(0));
                                break;
                            case LossKind::l2:
                                d = x;
                                break;
                        }
                        gp.data[i] += scale * d;
                    }
                }
                break;
            }
        }
    }

    void add_to_offset(Tensor& dst, std::size_t off, const S* src, int n) {
        for (int i = 0; i < n; ++i) dst.data[off + i] += src[i];
    }

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

using Tape = TapeT<float>;

}  // namespace painter
