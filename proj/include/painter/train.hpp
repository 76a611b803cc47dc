#pragma once

#include <cstdio>
#include <optional>

#include "painter/checkpoint.hpp"
#include "painter/dataset.hpp"
#include "painter/model.hpp"
#include "painter/optim.hpp"

namespace painter {

struct TrainConfig {
    double base_lr = 1e-3;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double warmup_fraction = 0.1;
    long total_iters = 2000;
    int batch_size = 8;
    double smooth_l1_beta = 0.01;  // in unit-real pixel space
    LossKind loss = LossKind::smooth_l1;
    double mask_ratio = 0.75;
    std::vector<std::pair<TaskKind, double>> task_weights;
    std::uint64_t seed = 0;
    long checkpoint_every = 0;  // 0 = final checkpoint only
    AugmentConfig augment;

    void validate() const {
        require(!task_weights.empty(), "train config: no task weights");
        double sum = 0.0;
        for (const auto& [_, w] : task_weights) {
            require(w >= 0.0, "train config: negative task weight");
            sum += w;
        }
        require(sum > 0.0, "train config: task weights sum to zero");
        require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, "train config: bad warmup fraction");
        require(batch_size > 0, "train config: batch size must be positive");
    }
};

// Categorical draw proportional to the weights.
inline TaskKind sample_task(Rng& rng, const std::vector<std::pair<TaskKind, double>>& weights) {
    double sum = 0.0;
    for (const auto& [_, w] : weights) sum += w;
    require(sum > 0.0, "sample_task: weights sum to zero");
    double u = rng.uniform() * sum;
    double acc = 0.0;
    for (const auto& [task, w] : weights) {
        acc += w;
        if (u < acc) return task;
    }
    return weights.back().first;
}

// Independent per-(iteration, sample) stream so parallel batch assembly stays
// deterministic regardless of scheduling.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (a + 1) + 0xbf58476d1ce4e5b9ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
}

inline std::vector<std::uint8_t> pixel_mask_from_plan(const MaskPlan& plan, int patch) {
    int h = plan.rows * patch, w = plan.cols * patch;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
    for (int idx : plan.masked) {
        int py = idx / plan.cols, px = idx % plan.cols;
        for (int y = 0; y < patch; ++y)
            for (int x = 0; x < patch; ++x)
                mask[static_cast<std::size_t>(py * patch + y) * w + (px * patch + x)] = 1;
    }
    return mask;
}

struct LogRow {
    long iter;
    TaskKind task;
    double loss;
    double lr;
};

inline void write_loss_csv(const std::vector<LogRow>& log, const std::filesystem::path& path) {
    std::string out = "iteration,task,loss,lr\n";
    char buf[128];
    for (const auto& row : log) {
        std::snprintf(buf, sizeof buf, "%ld,%s,%.9e,%.9e\n", row.iter, task_name(row.task).c_str(),
                      row.loss, row.lr);
        out += buf;
    }
    atomic_write_file(path, out);
}

struct TrainResult {
    ParamStore params;
    std::vector<LogRow> log;
};

// One stitched training sample: two augmented pairs of the same task, a
// block mask over the whole output canvas, forward, masked loss, backward.
// Returns the loss; grads come back in ParamStore order.
inline double train_sample_pass(const ParamStore& params, const ModelConfig& mcfg,
                                const TrainConfig& tcfg, const CodecContext& codec,
                                const std::vector<LoadedSample>& pool, TaskKind task, Rng&& rng,
                                Grads* grads_out) {
    Rng aug_rng = rng.fork("augment");
    Rng mask_rng = rng.fork("mask");
    Rng drop_rng = rng.fork("droppath");
    const auto& a = pool[rng.uniform_int(pool.size())];
    const auto& b = pool[rng.uniform_int(pool.size())];
    AugmentConfig aug = tcfg.augment;
    aug.out_size = mcfg.image_h;
    auto pair_a = make_training_pair(task, a, aug_rng, aug, codec);
    auto pair_b = make_training_pair(task, b, aug_rng, aug, codec);
    Canvas canvas = stitch_training_sample(pair_a, pair_b, mcfg.axis);
    MaskPlan plan =
        sample_block_mask(mcfg.grid_rows(), mcfg.grid_cols(), tcfg.mask_ratio, mask_rng);

    Tape tape;
    ForwardGraph<float> graph(tape, mcfg, params, /*params_require_grad=*/grads_out != nullptr);
    int in_node = tape.leaf(image_to_tensor<float>(canvas.input), false);
    int out_node = tape.leaf(image_to_tensor<float>(canvas.output), false);
    int pred = graph.build(in_node, out_node, plan, /*training=*/true, &drop_rng);
    int loss = tape.masked_loss(pred, image_to_tensor<float>(canvas.output),
                                pixel_mask_from_plan(plan, mcfg.patch_size),
                                static_cast<float>(tcfg.smooth_l1_beta), tcfg.loss);
    double value = tape.value(loss).data[0];
    if (grads_out) {
        tape.backward(loss);
        *grads_out = graph.collect_grads(tape);
    }
    return value;
}

// The full masked-image-modeling loop: sample task, draw two pairs, augment,
// encode, stitch, mask, regress, AdamW with a cosine schedule.
inline TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                         const LoadedDataset& data, const CodecContext& codec,
                         const std::optional<std::filesystem::path>& out_dir = {}) {
    mcfg.validate();
    tcfg.validate();
    for (const auto& [task, w] : tcfg.task_weights)
        if (w > 0.0) data.samples(task);  // fail fast on empty datasets

    Rng init_rng = derive_rng(tcfg.seed, 0x1717, 0);
    TrainResult result;
    result.params = init_params(mcfg, init_rng);
    OptimizerState state = OptimizerState::init(result.params);
    AdamWConfig adamw{tcfg.beta1, tcfg.beta2, 1e-8, tcfg.weight_decay};
    Rng task_rng = derive_rng(tcfg.seed, 0x7a5c, 1);

    if (out_dir) std::filesystem::create_directories(*out_dir);
    for (long iter = 0; iter < tcfg.total_iters; ++iter) {
        double lr = cosine_lr(iter, tcfg.total_iters, tcfg.base_lr, tcfg.warmup_fraction);
        TaskKind task = sample_task(task_rng, tcfg.task_weights);
        const auto& pool = data.samples(task);
        std::vector<Grads> grads(tcfg.batch_size);
        std::vector<double> losses(tcfg.batch_size, 0.0);
        parallel_for(tcfg.batch_size, [&](std::size_t s) {
            losses[s] = train_sample_pass(result.params, mcfg, tcfg, codec, pool, task,
                                          derive_rng(tcfg.seed, iter + 1, s), &grads[s]);
        });
        double batch_loss = 0.0;
        for (double l : losses) batch_loss += l;
        batch_loss /= tcfg.batch_size;
        if (!std::isfinite(batch_loss))
            throw error("non-finite loss at iteration " + std::to_string(iter) + " on task " +
                        task_name(task));
        Grads total = std::move(grads[0]);
        for (int s = 1; s < tcfg.batch_size; ++s)
            for (std::size_t p = 0; p < total.size(); ++p)
                for (std::size_t k = 0; k < total[p].data.size(); ++k)
                    total[p].data[k] += grads[s][p].data[k];
        float inv = 1.0f / static_cast<float>(tcfg.batch_size);
        for (auto& g : total)
            for (auto& v : g.data) v *= inv;
        adamw_step(result.params, total, state, lr, adamw);
        result.log.push_back({iter, task, batch_loss, lr});
        if (out_dir && tcfg.checkpoint_every > 0 && (iter + 1) % tcfg.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_%06ld.ckpt", iter + 1);
            save_checkpoint(mcfg, result.params, *out_dir / name);
        }
    }
    if (out_dir) {
        save_checkpoint(mcfg, result.params, *out_dir / "checkpoint.ckpt");
        write_loss_csv(result.log, *out_dir / "loss.csv");
    }
    return result;
}

}  // namespace painter
