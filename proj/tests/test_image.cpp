#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "painter/augment.hpp"
#include "painter/image.hpp"
#include "painter/image_io.hpp"
#include "painter/rng.hpp"

using namespace painter;
namespace fs = std::filesystem;

namespace {

Image random_image(int h, int w, Rng& rng) {
    Image img(h, w);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(256));
    return img;
}

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() / "painter_image_tests";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("u8 / unit-real conversion") {
    CHECK(to_u8(0.5) == 128);  // round(0.5 * 255) = round(127.5)
    CHECK(to_u8(0.0) == 0);
    CHECK(to_u8(1.0) == 255);
    CHECK(to_u8(-0.2) == 0);
    CHECK(to_u8(1.7) == 255);
    Image img(1, 1);
    img.set(0, 0, 7, 128, 255);
    RealImage r = to_unit_real(img);
    CHECK(r.at(0, 0, 0) == Catch::Approx(7.0 / 255.0));
    CHECK(from_unit_real(r) == img);
}

TEST_CASE("ppm and png save/load roundtrip is bit-exact") {
    Rng rng(7);
    auto dir = temp_dir();
    for (int trial = 0; trial < 20; ++trial) {
        int h = 1 + static_cast<int>(rng.uniform_int(16));
        int w = 1 + static_cast<int>(rng.uniform_int(16));
        Image img = random_image(h, w, rng);
        for (const char* ext : {".ppm", ".png"}) {
            fs::path p = dir / ("rt" + std::to_string(trial) + ext);
            save_image(img, p);
            Image back = load_image(p);
            REQUIRE(back == img);
        }
    }
}

TEST_CASE("2x2 zero ppm decodes to zeros") {
    auto dir = temp_dir();
    fs::path p = dir / "zero.ppm";
    std::ofstream out(p, std::ios::binary);
    out << "P6\n2 2\n255\n";
    for (int i = 0; i < 12; ++i) out.put('\0');
    out.close();
    Image img = load_image(p);
    CHECK(img.height == 2);
    CHECK(img.width == 2);
    for (auto v : img.data) CHECK(v == 0);
}

TEST_CASE("all-white 1x1 image survives the file") {
    auto dir = temp_dir();
    Image img(1, 1, 255);
    save_image(img, dir / "white.png");
    Image back = load_image(dir / "white.png");
    CHECK(back.at(0, 0, 0) == 255);
    CHECK(back.at(0, 0, 1) == 255);
    CHECK(back.at(0, 0, 2) == 255);
}

TEST_CASE("unit-real 0.5 stores as u8 128") {
    auto dir = temp_dir();
    RealImage r(1, 1, 0.5);
    save_image(r, dir / "half.ppm");
    CHECK(load_image(dir / "half.ppm").at(0, 0, 0) == 128);
}

TEST_CASE("io error cases are distinct") {
    auto dir = temp_dir();
    CHECK_THROWS_WITH(load_image(dir / "does_not_exist.png"),
                      Catch::Matchers::ContainsSubstring("no such file"));
    fs::path text = dir / "not_an_image.png";
    std::ofstream(text) << "hello, world\n";
    CHECK_THROWS_WITH(load_image(text),
                      Catch::Matchers::ContainsSubstring("unsupported or corrupt"));
    Image img(2, 2);
    CHECK_THROWS_AS(save_image(img, dir / "nodir" / "x.png"), error);
    CHECK_THROWS_AS(save_image(img, dir / "bad.jpeg"), error);
}

TEST_CASE("gray png loads as rgb") {
    auto dir = temp_dir();
    LabelMap lm(2, 3, 5, 2);
    save_label_png(lm, dir / "gray.png");
    Image img = load_image(dir / "gray.png");  // single channel promoted
    CHECK(img.height == 2);
    CHECK(img.width == 3);
    CHECK(img.at(0, 0, 0) == img.at(0, 0, 1));
}

TEST_CASE("depth pgm roundtrip") {
    auto dir = temp_dir();
    DepthMap dm(3, 2);
    dm.at(0, 0) = 0.0;
    dm.at(0, 1) = 10.0;
    dm.at(1, 0) = 4.98;
    dm.at(1, 1) = 0.015;
    dm.at(2, 0) = 7.7777;
    dm.at(2, 1) = 3.25;
    save_depth_pgm(dm, dir / "d.pgm");
    DepthMap back = load_depth_pgm(dir / "d.pgm");
    REQUIRE(back.height == 3);
    REQUIRE(back.width == 2);
    for (std::size_t i = 0; i < dm.depth.size(); ++i)
        CHECK(std::abs(back.depth[i] - dm.depth[i]) <= 0.5 / kDepthPgmScale);
}

TEST_CASE("label png roundtrip with ignore") {
    auto dir = temp_dir();
    LabelMap lm(4, 4, 151);
    lm.at(0, 0) = 0;
    lm.at(1, 2) = 150;
    lm.at(3, 3) = 42;
    save_label_png(lm, dir / "l.png");
    LabelMap back = load_label_png(dir / "l.png", 151);
    CHECK(back.label == lm.label);
}

TEST_CASE("identity augmentation with degenerate ranges") {
    Rng rng(3);
    Image img = random_image(32, 32, rng);
    AugmentConfig cfg;
    cfg.scale_lo = cfg.scale_hi = 1.0;
    cfg.ratio_lo = cfg.ratio_hi = 1.0;
    cfg.flip_prob = 0.0;
    cfg.out_size = 32;
    auto [a, b] = augment_pair(img, img, rng, cfg, Interp::bilinear);
    CHECK(a == img);
    CHECK(b == img);
}

TEST_CASE("flip twice is the identity") {
    Rng rng(4);
    Image img = random_image(17, 23, rng);
    CHECK(flip_image(flip_image(img)) == img);
}

TEST_CASE("augment_pair applies one window to both images") {
    Rng rng(11);
    // coordinate-grid image: pixel value encodes its position
    Image grid(40, 40);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) grid.set(y, x, static_cast<std::uint8_t>(y * 5),
                                              static_cast<std::uint8_t>(x * 5), 0);
    AugmentConfig cfg;
    cfg.out_size = 24;
    for (int trial = 0; trial < 10; ++trial) {
        auto [a, b] = augment_pair(grid, grid, rng, cfg, Interp::bilinear);
        CHECK(a == b);
    }
}

TEST_CASE("seeded crops are reproducible") {
    AugmentConfig cfg;
    cfg.out_size = 16;
    Rng r1(99), r2(99);
    for (int trial = 0; trial < 8; ++trial) {
        CropParams a = sample_crop(64, 48, r1, cfg);
        CropParams b = sample_crop(64, 48, r2, cfg);
        CHECK(a.x == b.x);
        CHECK(a.y == b.y);
        CHECK(a.w == b.w);
        CHECK(a.h == b.h);
        CHECK(a.flip == b.flip);
    }
}

TEST_CASE("nearest resize never invents pixel values") {
    Rng rng(21);
    Image img = random_image(13, 9, rng);
    std::set<std::uint8_t> source(img.data.begin(), img.data.end());
    Image big = resize_image(img, 31, 27, Interp::nearest);
    for (auto v : big.data) CHECK(source.count(v) == 1);
}

TEST_CASE("augment_pair rejects mismatched dimensions") {
    Rng rng(5);
    Image a(8, 8), b(8, 9);
    CHECK_THROWS_AS(augment_pair(a, b, rng, AugmentConfig{}), error);
}

TEST_CASE("keypoint crop transform tracks coordinates and flip classes") {
    KeypointSet kps = {{1, 10.0, 20.0, 1.0}, {2, 30.0, 20.0, 1.0}, {0, 5.0, 5.0, 1.0}};
    CropParams p;
    p.x = 0;
    p.y = 0;
    p.w = 40;
    p.h = 40;
    p.out_size = 40;
    p.flip = true;
    KeypointSet out = apply_crop(kps, p);
    REQUIRE(out.size() == 3);
    CHECK(out[0].cls == 2);  // left/right swap
    CHECK(out[0].x == Catch::Approx(29.0));
    CHECK(out[1].cls == 1);
    CHECK(out[2].cls == 0);  // nose keeps its class
}
