#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <variant>

#include "painter/augment.hpp"
#include "painter/codec_depth.hpp"
#include "painter/codec_instance.hpp"
#include "painter/codec_keypoint.hpp"
#include "painter/codec_semseg.hpp"
#include "painter/image_io.hpp"

namespace painter {

enum class TaskKind { depth, semseg, keypoints, instances, denoise, derain, enhance };

inline const std::vector<std::pair<TaskKind, std::string>>& task_names() {
    static const std::vector<std::pair<TaskKind, std::string>> names = {
        {TaskKind::depth, "depth"},         {TaskKind::semseg, "semseg"},
        {TaskKind::keypoints, "keypoints"}, {TaskKind::instances, "instances"},
        {TaskKind::denoise, "denoise"},     {TaskKind::derain, "derain"},
        {TaskKind::enhance, "enhance"}};
    return names;
}

inline std::string task_name(TaskKind task) {
    for (const auto& [t, n] : task_names())
        if (t == task) return n;
    throw error("unknown task kind");
}

inline TaskKind parse_task(const std::string& name) {
    for (const auto& [t, n] : task_names())
        if (n == name) return t;
    throw error("unknown task name: " + name);
}

inline bool is_restoration(TaskKind task) {
    return task == TaskKind::denoise || task == TaskKind::derain || task == TaskKind::enhance;
}

// Everything the codecs need, derived from the class count: semantic base is
// ceil(L^(1/3)) as in the color-code definition.
struct CodecContext {
    int num_classes = 6;
    ColorTable semseg_table;
    ColorTable keypoint_table = keypoint_class_table();
    ColorTable location_table = location_color_table();
    KeypointCodecConfig kp_cfg;
    InstanceDecodeConfig inst_cfg;

    explicit CodecContext(int classes = 6) : num_classes(classes) {
        int b = 2;
        while (b * b * b < classes) ++b;
        semseg_table = generate_color_table(b, classes);
    }
};

// --- line-oriented native records --------------------------------------
// keypoints file:   "keypoints <height> <width>" then one
//                   "<class> <x> <y> <score>" line per keypoint.
// instances file:   "instances <height> <width>" then one line per instance:
//                   "instance <class|-1> <score> <center_row> <center_col>
//                    <run0> <run1> ..." where runs alternate zeros/ones
//                   counts over the row-major mask, starting with zeros.

inline std::string serialize_keypoints(const KeypointSet& kps, int h, int w) {
    std::ostringstream out;
    out << "keypoints " << h << " " << w << "\n";
    out.precision(10);
    for (const auto& kp : kps)
        out << kp.cls << " " << kp.x << " " << kp.y << " " << kp.score << "\n";
    return out.str();
}

inline KeypointSet parse_keypoints(const std::string& text, int* h = nullptr, int* w = nullptr) {
    std::istringstream in(text);
    std::string magic;
    int hh = 0, ww = 0;
    in >> magic >> hh >> ww;
    require(magic == "keypoints" && hh > 0 && ww > 0, "malformed keypoints record");
    if (h) *h = hh;
    if (w) *w = ww;
    KeypointSet kps;
    Keypoint kp;
    while (in >> kp.cls >> kp.x >> kp.y >> kp.score) kps.push_back(kp);
    return kps;
}

inline std::string serialize_instances(const InstanceSet& insts, int h, int w) {
    std::ostringstream out;
    out << "instances " << h << " " << w << "\n";
    out.precision(10);
    for (const auto& inst : insts) {
        require(inst.height == h && inst.width == w, "instance dims mismatch");
        out << "instance " << (inst.cls ? *inst.cls : -1) << " " << inst.score << " "
            << inst.center_row << " " << inst.center_col;
        std::size_t i = 0, total = inst.mask.size();
        std::uint8_t run_value = 0;
        while (i < total) {
            std::size_t run = 0;
            while (i < total && (inst.mask[i] != 0) == (run_value != 0)) ++run, ++i;
            out << " " << run;
            run_value = !run_value;
        }
        out << "\n";
    }
    return out.str();
}

inline InstanceSet parse_instances(const std::string& text, int* h = nullptr, int* w = nullptr) {
    std::istringstream in(text);
    std::string magic;
    int hh = 0, ww = 0;
    in >> magic >> hh >> ww;
    require(magic == "instances" && hh > 0 && ww > 0, "malformed instances record");
    if (h) *h = hh;
    if (w) *w = ww;
    InstanceSet insts;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        Instance inst;
        inst.height = hh;
        inst.width = ww;
        int cls = -1;
        ls >> tag >> cls >> inst.score >> inst.center_row >> inst.center_col;
        require(tag == "instance", "malformed instances record");
        if (cls >= 0) inst.cls = cls;
        inst.mask.reserve(static_cast<std::size_t>(hh) * ww);
        std::size_t run;
        std::uint8_t value = 0;
        while (ls >> run) {
            inst.mask.insert(inst.mask.end(), run, value);
            value = !value;
        }
        require(inst.mask.size() == static_cast<std::size_t>(hh) * ww,
                "malformed instances record: run lengths do not cover the mask");
        insts.push_back(std::move(inst));
    }
    return insts;
}

// --- dataset manifest ----------------------------------------------------
// One record per line: "<task> <input_path> <target_path>", paths relative
// to the manifest file.

struct ManifestRecord {
    TaskKind task;
    std::filesystem::path input;
    std::filesystem::path target;
};

struct Manifest {
    std::filesystem::path root;
    std::vector<ManifestRecord> records;
};

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "# painter dataset manifest v1\n";
    for (const auto& r : m.records)
        out << task_name(r.task) << " " << r.input.generic_string() << " "
            << r.target.generic_string() << "\n";
    atomic_write_file(path, out.str());
}

inline Manifest load_manifest(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), "missing manifest: " + path.string());
    Manifest m;
    m.root = path.parent_path();
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string task, input, target;
        ls >> task >> input >> target;
        require(!target.empty(), "malformed manifest line: " + line);
        m.records.push_back({parse_task(task), input, target});
    }
    return m;
}

// Native per-task ground truth, preloaded for training.
using NativeTarget = std::variant<DepthMap, LabelMap, KeypointSet, InstanceSet, Image>;

struct LoadedSample {
    Image input;
    NativeTarget target;
};

struct LoadedDataset {
    std::map<TaskKind, std::vector<LoadedSample>> by_task;

    const std::vector<LoadedSample>& samples(TaskKind task) const {
        auto it = by_task.find(task);
        require(it != by_task.end() && !it->second.empty(),
                "dataset has no samples for task " + task_name(task));
        return it->second;
    }
};

inline NativeTarget load_native_target(TaskKind task, const std::filesystem::path& path,
                                       const CodecContext& codec) {
    switch (task) {
        case TaskKind::depth:
            return load_depth_pgm(path);
        case TaskKind::semseg:
            return load_label_png(path, codec.num_classes);
        case TaskKind::keypoints:
            return parse_keypoints(read_file(path));
        case TaskKind::instances:
            return parse_instances(read_file(path));
        default:
            return load_image(path);
    }
}

inline LoadedDataset load_dataset(const Manifest& m, const CodecContext& codec) {
    LoadedDataset ds;
    for (const auto& r : m.records) {
        LoadedSample s;
        s.input = load_image(m.root / r.input);
        s.target = load_native_target(r.task, m.root / r.target, codec);
        ds.by_task[r.task].push_back(std::move(s));
    }
    return ds;
}

// Encode a native target as its task image (no augmentation).
inline Image encode_target(TaskKind task, const NativeTarget& target, const CodecContext& codec) {
    switch (task) {
        case TaskKind::depth:
            return encode_depth(std::get<DepthMap>(target));
        case TaskKind::semseg:
            return encode_semseg(std::get<LabelMap>(target), codec.semseg_table);
        case TaskKind::keypoints: {
            throw error("keypoint encoding needs explicit dimensions; use encode_target(h, w)");
        }
        case TaskKind::instances: {
            const auto& insts = std::get<InstanceSet>(target);
            require(!insts.empty(), "cannot infer dimensions from an empty instance set");
            return encode_instances(insts, insts[0].height, insts[0].width, codec.location_table);
        }
        default:
            return std::get<Image>(target);
    }
}

inline Image encode_target(TaskKind task, const NativeTarget& target, const CodecContext& codec,
                           int h, int w) {
    if (task == TaskKind::keypoints)
        return encode_keypoints(std::get<KeypointSet>(target), h, w, codec.keypoint_table,
                                codec.kp_cfg);
    if (task == TaskKind::instances)
        return encode_instances(std::get<InstanceSet>(target), h, w, codec.location_table);
    return encode_target(task, target, codec);
}

// One augmented (input image, encoded target image) training pair. The
// native target is cropped with the same window as the input, then encoded.
inline std::pair<Image, Image> make_training_pair(TaskKind task, const LoadedSample& sample,
                                                  Rng& rng, const AugmentConfig& aug,
                                                  const CodecContext& codec) {
    CropParams p = sample_crop(sample.input.height, sample.input.width, rng, aug);
    Image input = apply_crop(sample.input, p, Interp::bilinear);
    Image target;
    switch (task) {
        case TaskKind::depth:
            target = encode_depth(apply_crop(std::get<DepthMap>(sample.target), p));
            break;
        case TaskKind::semseg:
            target = encode_semseg(apply_crop(std::get<LabelMap>(sample.target), p),
                                   codec.semseg_table);
            break;
        case TaskKind::keypoints:
            target = encode_keypoints(apply_crop(std::get<KeypointSet>(sample.target), p),
                                      p.out_size, p.out_size, codec.keypoint_table, codec.kp_cfg);
            break;
        case TaskKind::instances: {
            InstanceSet cropped = apply_crop(std::get<InstanceSet>(sample.target), p);
            target = encode_instances(cropped, p.out_size, p.out_size, codec.location_table);
            break;
        }
        default:
            target = apply_crop(std::get<Image>(sample.target), p, Interp::bilinear);
            break;
    }
    return {std::move(input), std::move(target)};
}

}  // namespace painter
