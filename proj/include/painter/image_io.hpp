#pragma once

#include <png.h>

#include <cctype>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>

#include "painter/image.hpp"

namespace painter {

namespace detail {

inline bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

// Reads one PPM/PGM header token, skipping whitespace and '#' comments.
inline std::string pnm_token(std::istringstream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
        } else if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#') tok.push_back(static_cast<char>(in.get()));
            break;
        }
    }
    return tok;
}

inline Image decode_ppm(const std::string& bytes, const std::string& name) {
    std::istringstream in(bytes);
    std::string magic = pnm_token(in);
    require(magic == "P6", "unsupported or corrupt image format: " + name);
    std::string ws = pnm_token(in), hs = pnm_token(in), ms = pnm_token(in);
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(ws);
        h = std::stoi(hs);
        maxval = std::stoi(ms);
    } catch (...) {
        throw error("unsupported or corrupt image format: " + name);
    }
    require(w > 0 && h > 0 && maxval == 255, "unsupported or corrupt image format: " + name);
    in.get();  // single whitespace after maxval
    Image img(h, w);
    std::size_t need = img.data.size();
    std::size_t off = static_cast<std::size_t>(in.tellg());
    require(bytes.size() - off >= need, "unsupported or corrupt image format: " + name);
    std::memcpy(img.data.data(), bytes.data() + off, need);
    return img;
}

inline std::string encode_ppm(const Image& img) {
    std::ostringstream out;
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    return out.str();
}

inline Image decode_png_rgb(const std::string& bytes, const std::string& name) {
    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size()))
        throw error("unsupported or corrupt image format: " + name);
    pi.format = PNG_FORMAT_RGB;  // gray/palette/alpha all converted, alpha dropped
    Image img(static_cast<int>(pi.height), static_cast<int>(pi.width));
    if (!png_image_finish_read(&pi, nullptr, img.data.data(), 0, nullptr)) {
        png_image_free(&pi);
        throw error("unsupported or corrupt image format: " + name);
    }
    return img;
}

inline std::string encode_png_rgb(const Image& img) {
    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(img.width);
    pi.height = static_cast<png_uint_32>(img.height);
    pi.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    require(png_image_write_to_memory(&pi, nullptr, &size, 0, img.data.data(), 0, nullptr) != 0,
            "png encode failed");
    std::string bytes(size, '\0');
    require(png_image_write_to_memory(&pi, bytes.data(), &size, 0, img.data.data(), 0, nullptr) != 0,
            "png encode failed");
    bytes.resize(size);
    return bytes;
}

inline std::string encode_png_gray8(const std::vector<std::uint8_t>& pix, int h, int w) {
    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(w);
    pi.height = static_cast<png_uint_32>(h);
    pi.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    require(png_image_write_to_memory(&pi, nullptr, &size, 0, pix.data(), 0, nullptr) != 0,
            "png encode failed");
    std::string bytes(size, '\0');
    require(png_image_write_to_memory(&pi, bytes.data(), &size, 0, pix.data(), 0, nullptr) != 0,
            "png encode failed");
    bytes.resize(size);
    return bytes;
}

inline std::vector<std::uint8_t> decode_png_gray8(const std::string& bytes, int& h, int& w,
                                                  const std::string& name) {
    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size()))
        throw error("unsupported or corrupt image format: " + name);
    pi.format = PNG_FORMAT_GRAY;
    h = static_cast<int>(pi.height);
    w = static_cast<int>(pi.width);
    std::vector<std::uint8_t> pix(static_cast<std::size_t>(h) * w);
    if (!png_image_finish_read(&pi, nullptr, pix.data(), 0, nullptr)) {
        png_image_free(&pi);
        throw error("unsupported or corrupt image format: " + name);
    }
    return pix;
}

}  // namespace detail

// Loads an 8-bit RGB image from a PNG or binary PPM (P6) file. Non-RGB PNGs
// are converted to RGB; alpha is dropped. Missing files and malformed
// contents are reported as distinct errors.
inline Image load_image(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), "no such file: " + path.string());
    std::string bytes = read_file(path);
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), "\x89PNG\r\n\x1a\n", 8) == 0)
        return detail::decode_png_rgb(bytes, path.string());
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6')
        return detail::decode_ppm(bytes, path.string());
    throw error("unsupported or corrupt image format: " + path.string());
}

// Saves as PNG (".png") or binary PPM (".ppm"). Lossless: load_image of the
// written file is bit-identical to `img`. The write is atomic.
inline void save_image(const Image& img, const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    if (ext == ".png")
        atomic_write_file(path, detail::encode_png_rgb(img));
    else if (ext == ".ppm")
        atomic_write_file(path, detail::encode_ppm(img));
    else
        throw error("unsupported image extension (want .png or .ppm): " + path.string());
}

inline void save_image(const RealImage& img, const std::filesystem::path& path) {
    save_image(from_unit_real(img), path);
}

constexpr double kDepthPgmScale = 6553.5;  // PGM16 levels per meter

// 16-bit big-endian PGM (P5), value = round(depth * 6553.5). Invalid pixels
// are stored as 0 and a second write with suffix ".valid.pgm" is not needed:
// validity is value > 0 except where depth is exactly 0, which this synthetic
// pipeline never marks invalid. Full round trip keeps 1/6553.5 m precision.
inline void save_depth_pgm(const DepthMap& dm, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "P5\n" << dm.width << " " << dm.height << "\n65535\n";
    for (std::size_t i = 0; i < dm.depth.size(); ++i) {
        double v = dm.valid[i] ? dm.depth[i] : 0.0;
        auto q = static_cast<std::uint32_t>(std::lround(std::clamp(v, 0.0, kDepthRange) * kDepthPgmScale));
        out.put(static_cast<char>((q >> 8) & 0xff));
        out.put(static_cast<char>(q & 0xff));
    }
    atomic_write_file(path, out.str());
}

inline DepthMap load_depth_pgm(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), "no such file: " + path.string());
    std::string bytes = read_file(path);
    std::istringstream in(bytes);
    std::string magic = detail::pnm_token(in);
    require(magic == "P5", "unsupported or corrupt depth file: " + path.string());
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(detail::pnm_token(in));
        h = std::stoi(detail::pnm_token(in));
        maxval = std::stoi(detail::pnm_token(in));
    } catch (...) {
        throw error("unsupported or corrupt depth file: " + path.string());
    }
    require(w > 0 && h > 0 && maxval == 65535, "unsupported or corrupt depth file: " + path.string());
    in.get();
    std::size_t off = static_cast<std::size_t>(in.tellg());
    std::size_t need = static_cast<std::size_t>(w) * h * 2;
    require(bytes.size() - off >= need, "unsupported or corrupt depth file: " + path.string());
    DepthMap dm(h, w);
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        auto hi = static_cast<std::uint8_t>(bytes[off + 2 * i]);
        auto lo = static_cast<std::uint8_t>(bytes[off + 2 * i + 1]);
        dm.depth[i] = static_cast<double>((hi << 8) | lo) / kDepthPgmScale;
    }
    return dm;
}

constexpr std::uint8_t kIgnorePng = 255;  // IGNORE sentinel in label PNGs

// Single-channel PNG of class ids; IGNORE stored as 255 (so L <= 255).
inline void save_label_png(const LabelMap& lm, const std::filesystem::path& path) {
    require(lm.num_classes <= 255, "label PNG supports at most 255 classes");
    std::vector<std::uint8_t> pix(lm.label.size());
    for (std::size_t i = 0; i < lm.label.size(); ++i)
        pix[i] = lm.label[i] == kIgnoreLabel ? kIgnorePng : static_cast<std::uint8_t>(lm.label[i]);
    atomic_write_file(path, detail::encode_png_gray8(pix, lm.height, lm.width));
}

inline LabelMap load_label_png(const std::filesystem::path& path, int num_classes) {
    require(std::filesystem::exists(path), "no such file: " + path.string());
    std::string bytes = read_file(path);
    int h = 0, w = 0;
    auto pix = detail::decode_png_gray8(bytes, h, w, path.string());
    LabelMap lm(h, w, num_classes);
    for (std::size_t i = 0; i < pix.size(); ++i)
        lm.label[i] = pix[i] == kIgnorePng ? kIgnoreLabel : pix[i];
    return lm;
}

}  // namespace painter
