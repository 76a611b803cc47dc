// painter: one binary, subcommands for synthetic data, codecs, training,
// in-context inference, evaluation, prompt tuning and visualization.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "painter/checkpoint.hpp"
#include "painter/config.hpp"
#include "painter/dataset.hpp"
#include "painter/infer.hpp"
#include "painter/metrics.hpp"
#include "painter/prompt_tuning.hpp"
#include "painter/synth.hpp"
#include "painter/train.hpp"

using namespace painter;
namespace fs = std::filesystem;

namespace {

ModelConfig model_config_from(const Config& cfg) {
    ModelConfig m;
    m.patch_size = static_cast<int>(cfg.get_int("model.patch_size", m.patch_size));
    m.embed_dim = static_cast<int>(cfg.get_int("model.embed_dim", m.embed_dim));
    m.depth = static_cast<int>(cfg.get_int("model.depth", m.depth));
    m.heads = static_cast<int>(cfg.get_int("model.heads", m.heads));
    m.merge_after = static_cast<int>(cfg.get_int("model.merge_after", m.merge_after));
    m.drop_path_rate = cfg.get_double("model.drop_path_rate", m.drop_path_rate);
    m.mlp_ratio = cfg.get_double("model.mlp_ratio", m.mlp_ratio);
    int size = static_cast<int>(cfg.get_int("model.image_size", m.image_h));
    m.image_h = m.image_w = size;
    m.share_pos_embed = cfg.get_bool("model.share_pos_embed", m.share_pos_embed);
    std::string head = cfg.get_str("model.head", "light");
    require(head == "light" || head == "linear", "config model.head must be light or linear");
    m.head = head == "light" ? HeadKind::light : HeadKind::linear;
    std::string axis = cfg.get_str("model.stitch_axis", "vertical");
    require(axis == "vertical" || axis == "horizontal",
            "config model.stitch_axis must be vertical or horizontal");
    m.axis = axis == "vertical" ? StitchAxis::vertical : StitchAxis::horizontal;
    return m;
}

TrainConfig train_config_from(const Config& cfg) {
    TrainConfig t;
    t.base_lr = cfg.get_double("train.base_lr", t.base_lr);
    t.weight_decay = cfg.get_double("train.weight_decay", t.weight_decay);
    t.beta1 = cfg.get_double("train.beta1", t.beta1);
    t.beta2 = cfg.get_double("train.beta2", t.beta2);
    t.warmup_fraction = cfg.get_double("train.warmup_fraction", t.warmup_fraction);
    t.total_iters = cfg.get_int("train.total_iters", t.total_iters);
    t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", t.batch_size));
    t.smooth_l1_beta = cfg.get_double("train.smooth_l1_beta", t.smooth_l1_beta);
    t.mask_ratio = cfg.get_double("train.mask_ratio", t.mask_ratio);
    t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 0));
    t.checkpoint_every = cfg.get_int("train.checkpoint_every", t.checkpoint_every);
    std::string loss = cfg.get_str("train.loss", "smooth_l1");
    if (loss == "smooth_l1")
        t.loss = LossKind::smooth_l1;
    else if (loss == "l1")
        t.loss = LossKind::l1;
    else if (loss == "l2")
        t.loss = LossKind::l2;
    else
        throw error("config train.loss must be smooth_l1, l1 or l2");
    for (const auto& [task, weight] : cfg.table("train.task_weights"))
        t.task_weights.emplace_back(parse_task(task), std::stod(weight));
    t.augment.scale_lo = cfg.get_double("augment.scale_lo", t.augment.scale_lo);
    t.augment.scale_hi = cfg.get_double("augment.scale_hi", t.augment.scale_hi);
    t.augment.ratio_lo = cfg.get_double("augment.ratio_lo", t.augment.ratio_lo);
    t.augment.ratio_hi = cfg.get_double("augment.ratio_hi", t.augment.ratio_hi);
    t.augment.flip_prob = cfg.get_double("augment.flip_prob", t.augment.flip_prob);
    return t;
}

CodecContext codec_from(const Config& cfg, int classes_flag) {
    int classes =
        classes_flag > 0 ? classes_flag : static_cast<int>(cfg.get_int("codec.classes", 6));
    CodecContext codec(classes);
    codec.inst_cfg.color_threshold =
        static_cast<int>(cfg.get_int("codec.color_threshold", codec.inst_cfg.color_threshold));
    codec.inst_cfg.min_area =
        static_cast<int>(cfg.get_int("codec.min_area", codec.inst_cfg.min_area));
    codec.inst_cfg.nms_sigma = cfg.get_double("codec.nms_sigma", codec.inst_cfg.nms_sigma);
    codec.inst_cfg.nms_keep_threshold =
        cfg.get_double("codec.nms_keep_threshold", codec.inst_cfg.nms_keep_threshold);
    codec.kp_cfg.heatmap_sigma = cfg.get_double("codec.heatmap_sigma", codec.kp_cfg.heatmap_sigma);
    codec.kp_cfg.peak_threshold =
        cfg.get_double("codec.peak_threshold", codec.kp_cfg.peak_threshold);
    return codec;
}

void cmd_make_synth(const fs::path& out, int count, int size, int classes, std::uint64_t seed,
                    const std::vector<TaskKind>& tasks) {
    fs::create_directories(out / "input");
    fs::create_directories(out / "target");
    SceneSpec spec;
    spec.size = size;
    spec.num_classes = classes;
    spec.stick_figures = std::count(tasks.begin(), tasks.end(), TaskKind::keypoints) > 0;
    Manifest manifest;
    manifest.root = out;
    char name[64];
    for (int i = 0; i < count; ++i) {
        Rng rng = derive_rng(seed, 0x5ce, i);
        Scene scene = gen_scene(spec, rng);
        std::snprintf(name, sizeof name, "scene_%05d", i);
        std::string base = name;
        fs::path input_rel = fs::path("input") / (base + ".png");
        save_image(scene.image, out / input_rel);
        for (TaskKind task : tasks) {
            switch (task) {
                case TaskKind::depth: {
                    fs::path rel = fs::path("target") / (base + "_depth.pgm");
                    save_depth_pgm(scene.depth, out / rel);
                    manifest.records.push_back({task, input_rel, rel});
                    break;
                }
                case TaskKind::semseg: {
                    fs::path rel = fs::path("target") / (base + "_labels.png");
                    save_label_png(scene.labels, out / rel);
                    manifest.records.push_back({task, input_rel, rel});
                    break;
                }
                case TaskKind::keypoints: {
                    if (scene.keypoints.empty()) break;
                    fs::path rel = fs::path("target") / (base + "_keypoints.txt");
                    atomic_write_file(out / rel, serialize_keypoints(scene.keypoints, size, size));
                    manifest.records.push_back({task, input_rel, rel});
                    break;
                }
                case TaskKind::instances: {
                    if (scene.instances.empty()) break;
                    fs::path rel = fs::path("target") / (base + "_instances.txt");
                    atomic_write_file(out / rel, serialize_instances(scene.instances, size, size));
                    manifest.records.push_back({task, input_rel, rel});
                    break;
                }
                case TaskKind::denoise: {
                    CorruptConfig cc;
                    cc.kind = CorruptKind::gaussian_noise;
                    Rng crng = rng.fork("noise");
                    fs::path rel = fs::path("input") / (base + "_noisy.png");
                    save_image(corrupt(scene.image, cc, crng), out / rel);
                    manifest.records.push_back({task, rel, input_rel});
                    break;
                }
                case TaskKind::derain: {
                    CorruptConfig cc;
                    cc.kind = CorruptKind::rain;
                    Rng crng = rng.fork("rain");
                    fs::path rel = fs::path("input") / (base + "_rainy.png");
                    save_image(corrupt(scene.image, cc, crng), out / rel);
                    manifest.records.push_back({task, rel, input_rel});
                    break;
                }
                case TaskKind::enhance: {
                    CorruptConfig cc;
                    cc.kind = CorruptKind::darken;
                    Rng crng = rng.fork("darken");
                    fs::path rel = fs::path("input") / (base + "_dark.png");
                    save_image(corrupt(scene.image, cc, crng), out / rel);
                    manifest.records.push_back({task, rel, input_rel});
                    break;
                }
            }
        }
    }
    save_manifest(manifest, out / "manifest.txt");
    std::printf("wrote %zu records to %s\n", manifest.records.size(),
                (out / "manifest.txt").string().c_str());
}

void cmd_encode(TaskKind task, const fs::path& in, const fs::path& out, const CodecContext& codec) {
    switch (task) {
        case TaskKind::depth:
            save_image(encode_depth(load_depth_pgm(in)), out);
            break;
        case TaskKind::semseg:
            save_image(encode_semseg(load_label_png(in, codec.num_classes), codec.semseg_table),
                       out);
            break;
        case TaskKind::keypoints: {
            int h = 0, w = 0;
            KeypointSet kps = parse_keypoints(read_file(in), &h, &w);
            save_image(encode_keypoints(kps, h, w, codec.keypoint_table, codec.kp_cfg), out);
            break;
        }
        case TaskKind::instances: {
            int h = 0, w = 0;
            InstanceSet insts = parse_instances(read_file(in), &h, &w);
            save_image(encode_instances(insts, h, w, codec.location_table), out);
            break;
        }
        default:  // restoration: the identity codec
            save_image(load_image(in), out);
            break;
    }
}

void cmd_decode(TaskKind task, const fs::path& in, const fs::path& out, const CodecContext& codec) {
    Image img = load_image(in);
    switch (task) {
        case TaskKind::depth:
            save_depth_pgm(decode_depth(img), out);
            break;
        case TaskKind::semseg:
            save_label_png(decode_semseg(img, codec.semseg_table).labels, out);
            break;
        case TaskKind::keypoints:
            atomic_write_file(
                out, serialize_keypoints(decode_keypoints(img, codec.keypoint_table, codec.kp_cfg),
                                         img.height, img.width));
            break;
        case TaskKind::instances:
            atomic_write_file(
                out, serialize_instances(decode_instances(img, codec.inst_cfg, codec.location_table),
                                         img.height, img.width));
            break;
        default:
            save_image(img, out);
            break;
    }
}

Image load_sized(const fs::path& path, int h, int w, Interp interp) {
    Image img = load_image(path);
    if (img.height == h && img.width == w) return img;
    return resize_image(img, h, w, interp);
}

void cmd_infer(const fs::path& ckpt, const fs::path& prompt_in, const fs::path& prompt_out,
               const fs::path& query, TaskKind task, const fs::path& out,
               const CodecContext& codec) {
    auto [cfg, params] = load_checkpoint(ckpt);
    fs::create_directories(out);
    // inputs resize bilinearly; the encoded prompt output must stay discrete
    std::pair<Image, Image> prompt = {
        load_sized(prompt_in, cfg.image_h, cfg.image_w, Interp::bilinear),
        load_sized(prompt_out, cfg.image_h, cfg.image_w, Interp::nearest)};
    Image query_img = load_sized(query, cfg.image_h, cfg.image_w, Interp::bilinear);
    InferResult res = in_context_infer(params, cfg, prompt, query_img);
    save_image(res.canvas, out / "canvas.png");
    save_image(res.prediction, out / "prediction.png");
    switch (task) {
        case TaskKind::depth:
            save_depth_pgm(decode_depth(res.prediction), out / "decoded_depth.pgm");
            break;
        case TaskKind::semseg:
            save_label_png(decode_semseg(res.prediction, codec.semseg_table).labels,
                           out / "decoded_labels.png");
            break;
        case TaskKind::keypoints:
            atomic_write_file(
                out / "decoded_keypoints.txt",
                serialize_keypoints(
                    decode_keypoints(res.prediction, codec.keypoint_table, codec.kp_cfg),
                    cfg.image_h, cfg.image_w));
            break;
        case TaskKind::instances:
            atomic_write_file(
                out / "decoded_instances.txt",
                serialize_instances(
                    decode_instances(res.prediction, codec.inst_cfg, codec.location_table),
                    cfg.image_h, cfg.image_w));
            break;
        default:
            save_image(res.prediction, out / "restored.png");
            break;
    }
    std::printf("wrote prediction to %s\n", out.string().c_str());
}

std::vector<std::pair<fs::path, fs::path>> matched_files(const fs::path& pred, const fs::path& gt) {
    require(fs::exists(pred), "missing prediction path: " + pred.string());
    require(fs::exists(gt), "missing ground-truth path: " + gt.string());
    if (!fs::is_directory(pred)) return {{pred, gt}};
    require(fs::is_directory(gt), "prediction is a directory but ground truth is not");
    std::vector<fs::path> names;
    for (const auto& e : fs::directory_iterator(pred)) names.push_back(e.path().filename());
    std::sort(names.begin(), names.end());
    std::vector<std::pair<fs::path, fs::path>> pairs;
    for (const auto& n : names) {
        require(fs::exists(gt / n), "ground truth missing for " + n.string());
        pairs.push_back({pred / n, gt / n});
    }
    require(!pairs.empty(), "no prediction files found in " + pred.string());
    return pairs;
}

void write_metrics_csv(const std::vector<std::pair<std::string, double>>& metrics,
                       const fs::path& out) {
    std::string text = "metric,value\n";
    char buf[96];
    for (const auto& [name, value] : metrics) {
        std::snprintf(buf, sizeof buf, "%s,%.6f\n", name.c_str(), value);
        text += buf;
    }
    if (!out.empty()) atomic_write_file(out, text);
    std::printf("%-16s %s\n", "metric", "value");
    for (const auto& [name, value] : metrics) std::printf("%-16s %.6f\n", name.c_str(), value);
}

void cmd_eval(TaskKind task, const fs::path& pred, const fs::path& gt, const fs::path& out,
              const CodecContext& codec) {
    auto pairs = matched_files(pred, gt);
    std::vector<std::pair<std::string, double>> metrics;
    switch (task) {
        case TaskKind::depth: {
            double rmse = 0, arel = 0, d1 = 0;
            for (const auto& [p, g] : pairs) {
                DepthMetrics m = depth_metrics(load_depth_pgm(p), load_depth_pgm(g));
                rmse += m.rmse;
                arel += m.a_rel;
                d1 += m.delta1;
            }
            double n = static_cast<double>(pairs.size());
            metrics = {{"rmse", rmse / n}, {"a_rel", arel / n}, {"delta1", d1 / n}};
            break;
        }
        case TaskKind::semseg: {
            double m = 0;
            for (const auto& [p, g] : pairs)
                m += miou(load_label_png(p, codec.num_classes),
                          load_label_png(g, codec.num_classes))
                         .miou;
            metrics = {{"miou", m / static_cast<double>(pairs.size())}};
            break;
        }
        case TaskKind::keypoints: {
            std::vector<std::pair<KeypointSet, KeypointSet>> sets;
            std::vector<double> areas;
            for (const auto& [p, g] : pairs) {
                KeypointSet pk = parse_keypoints(read_file(p));
                KeypointSet gk = parse_keypoints(read_file(g));
                areas.push_back(keypoint_area(gk));
                sets.emplace_back(std::move(pk), std::move(gk));
            }
            double mean_oks = 0;
            for (std::size_t i = 0; i < sets.size(); ++i)
                mean_oks += oks(sets[i].first, sets[i].second, areas[i]);
            metrics = {{"oks", mean_oks / static_cast<double>(sets.size())},
                       {"ap", oks_ap(sets, areas)}};
            break;
        }
        case TaskKind::instances: {
            double total = 0;
            for (const auto& [p, g] : pairs) {
                InstanceSet pi = parse_instances(read_file(p));
                InstanceSet gi = parse_instances(read_file(g));
                double best_sum = 0;
                for (const auto& ginst : gi) {
                    double best = 0;
                    for (const auto& pinst : pi) best = std::max(best, mask_iou(pinst, ginst));
                    best_sum += best;
                }
                total += gi.empty() ? (pi.empty() ? 1.0 : 0.0)
                                    : best_sum / static_cast<double>(gi.size());
            }
            metrics = {{"mean_mask_iou", total / static_cast<double>(pairs.size())}};
            break;
        }
        default: {
            double p_sum = 0, s_sum = 0;
            for (const auto& [p, g] : pairs) {
                Image pi = load_image(p), gi = load_image(g);
                double v = psnr(pi, gi);
                p_sum += std::isinf(v) ? 99.0 : v;  // sentinel for identical images
                s_sum += ssim(pi, gi);
            }
            double n = static_cast<double>(pairs.size());
            metrics = {{"psnr", p_sum / n}, {"ssim", s_sum / n}};
            break;
        }
    }
    write_metrics_csv(metrics, out);
}

void save_prompt(const std::pair<Image, Image>& prompt, TaskKind task, double score,
                 const std::string& metric, const fs::path& out) {
    fs::create_directories(out);
    save_image(prompt.first, out / "prompt_input.png");
    save_image(prompt.second, out / "prompt_output.png");
    char buf[160];
    std::snprintf(buf, sizeof buf, "task %s\nscore %.6f\nmetric %s\n", task_name(task).c_str(),
                  score, metric.c_str());
    atomic_write_file(out / "prompt.txt", buf);
}

void cmd_prompt_search(const fs::path& ckpt, const fs::path& manifest_path, TaskKind task,
                       int candidates, int eval_count, const fs::path& out,
                       const CodecContext& codec) {
    auto [cfg, params] = load_checkpoint(ckpt);
    auto samples = load_dataset(load_manifest(manifest_path), codec).samples(task);
    require(samples.size() >= 2, "need at least two samples to search prompts");
    candidates = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(candidates), samples.size() - 1));
    std::vector<std::pair<Image, Image>> cands;
    for (int i = 0; i < candidates; ++i)
        cands.push_back(sample_prompt_pair(task, samples[i], codec));
    std::vector<LoadedSample> eval_set(
        samples.begin() + candidates,
        samples.begin() +
            std::min(samples.size(), static_cast<std::size_t>(candidates + eval_count)));
    PromptSearchResult res = search_prompts(params, cfg, cands, eval_set, task, codec);
    std::string metric =
        score_prediction(task, eval_set[0].input, eval_set[0].target, codec).metric_name;
    save_prompt(res.best, task, res.scores[res.best_index], metric, out);
    std::string table = "candidate,score\n";
    char buf[64];
    for (std::size_t i = 0; i < res.scores.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", i, res.scores[i]);
        table += buf;
    }
    atomic_write_file(out / "scores.csv", table);
    std::printf("best candidate %zu score %.6f\n", res.best_index, res.scores[res.best_index]);
}

void cmd_prompt_learn(const fs::path& ckpt, const fs::path& manifest_path, TaskKind task,
                      long steps, double lr, const fs::path& out, const CodecContext& codec) {
    auto [cfg, params] = load_checkpoint(ckpt);
    auto samples = load_dataset(load_manifest(manifest_path), codec).samples(task);
    require(samples.size() >= 2, "need at least two samples to learn prompts");
    auto init = sample_prompt_pair(task, samples[0], codec);
    std::vector<LoadedSample> queries(samples.begin() + 1, samples.end());
    PromptLearnConfig pcfg;
    pcfg.steps = steps;
    pcfg.lr = lr;
    PromptLearnResult res = learn_prompts(params, cfg, init, queries, task, codec, pcfg);
    save_prompt(res.prompt, task, res.loss_curve.back(), "train_loss", out);
    std::string curve = "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < res.loss_curve.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.9e\n", i, res.loss_curve[i]);
        curve += buf;
    }
    atomic_write_file(out / "loss_curve.csv", curve);
    std::printf("loss %.6e -> %.6e\n", res.loss_curve.front(), res.loss_curve.back());
}

void cmd_visualize(const std::vector<fs::path>& images, int cols, const fs::path& out) {
    require(!images.empty(), "visualize: no images given");
    std::vector<Image> tiles;
    int th = 0, tw = 0;
    for (const auto& p : images) {
        tiles.push_back(load_image(p));
        th = std::max(th, tiles.back().height);
        tw = std::max(tw, tiles.back().width);
    }
    cols = std::max(1, std::min(cols, static_cast<int>(tiles.size())));
    int rows = (static_cast<int>(tiles.size()) + cols - 1) / cols;
    const int pad = 2;
    Image grid(rows * th + (rows + 1) * pad, cols * tw + (cols + 1) * pad, 32);
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
        int y0 = pad + r * (th + pad), x0 = pad + c * (tw + pad);
        for (int y = 0; y < tiles[i].height; ++y)
            for (int x = 0; x < tiles[i].width; ++x)
                for (int ch = 0; ch < 3; ++ch) grid.at(y0 + y, x0 + x, ch) = tiles[i].at(y, x, ch);
    }
    save_image(grid, out);
    std::printf("wrote %s\n", out.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"painter: task-output image codecs, masked-image-modeling training, "
                 "and in-context inference"};
    app.require_subcommand(1);

    std::string config_path, task_str, out_str, in_str;
    std::uint64_t seed = 0;

    auto* synth = app.add_subcommand("make-synth", "generate a synthetic multi-task dataset");
    int synth_count = 16, synth_size = 64, synth_classes = 6;
    std::string synth_tasks = "depth,semseg,keypoints,instances,denoise,derain,enhance";
    synth->add_option("--out", out_str, "output dataset directory")->required();
    synth->add_option("--count", synth_count, "number of scenes");
    synth->add_option("--size", synth_size, "image size");
    synth->add_option("--classes", synth_classes, "number of semantic classes");
    synth->add_option("--seed", seed, "rng seed");
    synth->add_option("--tasks", synth_tasks, "comma-separated task list");

    auto* encode = app.add_subcommand("encode", "encode native ground truth as a task image");
    auto* decode = app.add_subcommand("decode", "decode a task image back to native ground truth");
    std::string codec_out;
    int classes_flag = 0;
    for (auto* c : {encode, decode}) {
        c->add_option("--task", task_str, "task name")->required();
        c->add_option("--in", in_str, "input file")->required();
        c->add_option("--out", codec_out, "output file")->required();
        c->add_option("--classes", classes_flag, "semantic class count");
        c->add_option("--config", config_path, "config file");
    }

    auto* train_cmd = app.add_subcommand("train", "train the masked image modeling model");
    std::string data_str;
    long iters_flag = -1;
    double lr_flag = -1;
    int batch_flag = -1;
    long seed_flag = -1;
    std::string tasks_flag;
    train_cmd->add_option("--config", config_path, "config file");
    train_cmd->add_option("--data", data_str, "dataset manifest")->required();
    train_cmd->add_option("--out", out_str, "output directory")->required();
    train_cmd->add_option("--iters", iters_flag, "total iterations (overrides config)");
    train_cmd->add_option("--lr", lr_flag, "base learning rate (overrides config)");
    train_cmd->add_option("--batch", batch_flag, "batch size (overrides config)");
    train_cmd->add_option("--seed", seed_flag, "seed (overrides config)");
    train_cmd->add_option("--tasks", tasks_flag, "task weights, e.g. semseg=0.667,depth=0.333");
    train_cmd->add_option("--classes", classes_flag, "semantic class count");

    auto* infer_cmd = app.add_subcommand("infer", "in-context inference with a prompt pair");
    std::string ckpt_str, prompt_in_str, prompt_out_str, query_str;
    infer_cmd->add_option("--checkpoint", ckpt_str, "model checkpoint")->required();
    infer_cmd->add_option("--prompt-input", prompt_in_str, "prompt input image")->required();
    infer_cmd->add_option("--prompt-output", prompt_out_str, "prompt encoded output image")
        ->required();
    infer_cmd->add_option("--query", query_str, "query input image")->required();
    infer_cmd->add_option("--task", task_str, "task name (for decoding)")->required();
    infer_cmd->add_option("--out", out_str, "output directory")->required();
    infer_cmd->add_option("--classes", classes_flag, "semantic class count");
    infer_cmd->add_option("--config", config_path, "config file");

    auto* eval_cmd = app.add_subcommand("eval", "compute task metrics from files");
    std::string pred_str, gt_str;
    eval_cmd->add_option("--task", task_str, "task name")->required();
    eval_cmd->add_option("--pred", pred_str, "prediction file or directory")->required();
    eval_cmd->add_option("--gt", gt_str, "ground truth file or directory")->required();
    eval_cmd->add_option("--out", out_str, "metrics csv path");
    eval_cmd->add_option("--classes", classes_flag, "semantic class count");
    eval_cmd->add_option("--config", config_path, "config file");

    auto* search_cmd = app.add_subcommand("prompt-search", "select the best prompt pair");
    int cand_count = 4, eval_count = 8;
    search_cmd->add_option("--checkpoint", ckpt_str, "model checkpoint")->required();
    search_cmd->add_option("--data", data_str, "dataset manifest")->required();
    search_cmd->add_option("--task", task_str, "task name")->required();
    search_cmd->add_option("--candidates", cand_count, "number of candidate prompts");
    search_cmd->add_option("--eval-count", eval_count, "evaluation query count");
    search_cmd->add_option("--out", out_str, "output directory")->required();
    search_cmd->add_option("--classes", classes_flag, "semantic class count");
    search_cmd->add_option("--config", config_path, "config file");

    auto* learn_cmd = app.add_subcommand("prompt-learn", "optimize a prompt pair in pixel space");
    long learn_steps = 100;
    double learn_lr = 1e-2;
    learn_cmd->add_option("--checkpoint", ckpt_str, "model checkpoint")->required();
    learn_cmd->add_option("--data", data_str, "dataset manifest")->required();
    learn_cmd->add_option("--task", task_str, "task name")->required();
    learn_cmd->add_option("--steps", learn_steps, "optimization steps");
    learn_cmd->add_option("--lr", learn_lr, "prompt learning rate");
    learn_cmd->add_option("--out", out_str, "output directory")->required();
    learn_cmd->add_option("--classes", classes_flag, "semantic class count");
    learn_cmd->add_option("--config", config_path, "config file");

    auto* vis_cmd = app.add_subcommand("visualize", "tile images into one grid png");
    std::vector<std::string> vis_images;
    int vis_cols = 3;
    vis_cmd->add_option("--images", vis_images, "input images")->required();
    vis_cmd->add_option("--cols", vis_cols, "grid columns");
    vis_cmd->add_option("--out", out_str, "output png")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        Config cfg = config_path.empty() ? Config() : Config::load(config_path);
        if (synth->parsed()) {
            std::vector<TaskKind> tasks;
            std::istringstream ts(synth_tasks);
            std::string tok;
            while (std::getline(ts, tok, ',')) tasks.push_back(parse_task(tok));
            cmd_make_synth(out_str, synth_count, synth_size, synth_classes, seed, tasks);
        } else if (encode->parsed()) {
            cmd_encode(parse_task(task_str), in_str, codec_out, codec_from(cfg, classes_flag));
        } else if (decode->parsed()) {
            cmd_decode(parse_task(task_str), in_str, codec_out, codec_from(cfg, classes_flag));
        } else if (train_cmd->parsed()) {
            ModelConfig mcfg = model_config_from(cfg);
            TrainConfig tcfg = train_config_from(cfg);
            if (iters_flag >= 0) tcfg.total_iters = iters_flag;
            if (lr_flag > 0) tcfg.base_lr = lr_flag;
            if (batch_flag > 0) tcfg.batch_size = batch_flag;
            if (seed_flag >= 0) tcfg.seed = static_cast<std::uint64_t>(seed_flag);
            if (!tasks_flag.empty()) {
                tcfg.task_weights.clear();
                std::istringstream ts(tasks_flag);
                std::string tok;
                while (std::getline(ts, tok, ',')) {
                    auto eq = tok.find('=');
                    require(eq != std::string::npos, "bad --tasks entry: " + tok);
                    tcfg.task_weights.emplace_back(parse_task(tok.substr(0, eq)),
                                                   std::stod(tok.substr(eq + 1)));
                }
            }
            if (tcfg.task_weights.empty())
                tcfg.task_weights = {{TaskKind::semseg, 2.0 / 3.0}, {TaskKind::depth, 1.0 / 3.0}};
            CodecContext codec = codec_from(cfg, classes_flag);
            LoadedDataset data = load_dataset(load_manifest(data_str), codec);
            TrainResult res = train(mcfg, tcfg, data, codec, fs::path(out_str));
            std::printf("trained %ld iterations; final loss %.6f; checkpoint at %s\n",
                        tcfg.total_iters, res.log.empty() ? 0.0 : res.log.back().loss,
                        (fs::path(out_str) / "checkpoint.ckpt").string().c_str());
        } else if (infer_cmd->parsed()) {
            cmd_infer(ckpt_str, prompt_in_str, prompt_out_str, query_str, parse_task(task_str),
                      out_str, codec_from(cfg, classes_flag));
        } else if (eval_cmd->parsed()) {
            cmd_eval(parse_task(task_str), pred_str, gt_str, out_str, codec_from(cfg, classes_flag));
        } else if (search_cmd->parsed()) {
            cmd_prompt_search(ckpt_str, data_str, parse_task(task_str), cand_count, eval_count,
                              out_str, codec_from(cfg, classes_flag));
        } else if (learn_cmd->parsed()) {
            cmd_prompt_learn(ckpt_str, data_str, parse_task(task_str), learn_steps, learn_lr,
                             out_str, codec_from(cfg, classes_flag));
        } else if (vis_cmd->parsed()) {
            std::vector<fs::path> paths(vis_images.begin(), vis_images.end());
            cmd_visualize(paths, vis_cols, out_str);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
