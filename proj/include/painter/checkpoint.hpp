#pragma once

#include <cstring>
#include <sstream>

#include "painter/model.hpp"

namespace painter {

// Checkpoint layout (little-endian):
//   magic "PNTRCKP1", version u32,
//   config: patch, dim, depth, heads, merge, taps[4], image_h, image_w (u32),
//           axis u8, share_pos u8, head u8, pad u8, drop_path f32, mlp_ratio f32,
//   tensor count u32, then per tensor:
//   name length u32, name bytes, dim count u32, dims u32 each, f32 data.
namespace detail {

constexpr char kCkptMagic[8] = {'P', 'N', 'T', 'R', 'C', 'K', 'P', '1'};

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& off) {
    require(off + sizeof(T) <= in.size(), "checkpoint truncated");
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace detail

inline std::string serialize_checkpoint(const ModelConfig& cfg, const ParamStore& params) {
    using detail::put;
    std::string out;
    out.append(detail::kCkptMagic, 8);
    put<std::uint32_t>(out, 1);
    for (int v : {cfg.patch_size, cfg.embed_dim, cfg.depth, cfg.heads, cfg.merge_after})
        put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    for (int t : cfg.taps) put<std::uint32_t>(out, static_cast<std::uint32_t>(t));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.image_h));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.image_w));
    put<std::uint8_t>(out, cfg.axis == StitchAxis::vertical ? 0 : 1);
    put<std::uint8_t>(out, cfg.share_pos_embed ? 1 : 0);
    put<std::uint8_t>(out, cfg.head == HeadKind::light ? 0 : 1);
    put<std::uint8_t>(out, 0);
    put<float>(out, static_cast<float>(cfg.drop_path_rate));
    put<float>(out, static_cast<float>(cfg.mlp_ratio));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.items.size()));
    for (const auto& [name, t] : params.items) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
    }
    return out;
}

inline std::pair<ModelConfig, ParamStore> deserialize_checkpoint(const std::string& in) {
    using detail::take;
    require(in.size() >= 8 && std::memcmp(in.data(), detail::kCkptMagic, 8) == 0,
            "not a checkpoint file (bad magic)");
    std::size_t off = 8;
    std::uint32_t version = take<std::uint32_t>(in, off);
    require(version == 1, "unsupported checkpoint version");
    ModelConfig cfg;
    cfg.patch_size = static_cast<int>(take<std::uint32_t>(in, off));
    cfg.embed_dim = static_cast<int>(take<std::uint32_t>(in, off));
    cfg.depth = static_cast<int>(take<std::uint32_t>(in, off));
    cfg.heads = static_cast<int>(take<std::uint32_t>(in, off));
    cfg.merge_after = static_cast<int>(take<std::uint32_t>(in, off));
    for (int i = 0; i < 4; ++i) cfg.taps[i] = static_cast<int>(take<std::uint32_t>(in, off));
    cfg.image_h = static_cast<int>(take<std::uint32_t>(in, off));
    cfg.image_w = static_cast<int>(take<std::uint32_t>(in, off));
    cfg.axis = take<std::uint8_t>(in, off) == 0 ? StitchAxis::vertical : StitchAxis::horizontal;
    cfg.share_pos_embed = take<std::uint8_t>(in, off) != 0;
    cfg.head = take<std::uint8_t>(in, off) == 0 ? HeadKind::light : HeadKind::linear;
    take<std::uint8_t>(in, off);
    cfg.drop_path_rate = take<float>(in, off);
    cfg.mlp_ratio = take<float>(in, off);
    std::uint32_t count = take<std::uint32_t>(in, off);
    ParamStore ps;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t nlen = take<std::uint32_t>(in, off);
        require(off + nlen <= in.size(), "checkpoint truncated");
        std::string name = in.substr(off, nlen);
        off += nlen;
        std::uint32_t ndim = take<std::uint32_t>(in, off);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(take<std::uint32_t>(in, off));
        Tensor t(shape);
        std::size_t bytes = t.numel() * sizeof(float);
        require(off + bytes <= in.size(), "checkpoint truncated");
        std::memcpy(t.data.data(), in.data() + off, bytes);
        off += bytes;
        ps.items.emplace_back(std::move(name), std::move(t));
    }
    return {cfg, std::move(ps)};
}

inline void save_checkpoint(const ModelConfig& cfg, const ParamStore& params,
                            const std::filesystem::path& path) {
    atomic_write_file(path, serialize_checkpoint(cfg, params));
}

inline std::pair<ModelConfig, ParamStore> load_checkpoint(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), "missing checkpoint: " + path.string());
    return deserialize_checkpoint(read_file(path));
}

}  // namespace painter
