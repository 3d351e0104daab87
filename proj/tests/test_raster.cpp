#include <doctest.h>

#include "changeqa/class_map.hpp"
#include "changeqa/error.hpp"
#include "changeqa/png_io.hpp"
#include "changeqa/raster.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace changeqa;

namespace {

SemanticMask mask2x2(std::vector<std::uint8_t> labels, int k = 3) { return SemanticMask(2, 2, k, std::move(labels)); }

}  // namespace

TEST_CASE("semantic mask validates shape and labels") {
  CHECK(error_code([] { SemanticMask(2, 2, 3, {0, 1, 2}); }) == Errc::shape);
  CHECK(error_code([] { SemanticMask(2, 2, 3, {0, 1, 2, 3}); }) == Errc::schema);
  const SemanticMask ok(2, 2, 3, {0, 1, 2, 0});
  CHECK(ok.at(1, 1) == 0);
  CHECK(ok.at(0, 1) == 2);
}

TEST_CASE("diff mask") {
  SUBCASE("identical masks give an empty diff") {
    const auto m = mask2x2({0, 1, 1, 1});
    CHECK(diff_mask(m, m).popcount() == 0);
  }
  SUBCASE("pointwise example") {
    const auto d = diff_mask(mask2x2({0, 1, 1, 1}), mask2x2({0, 2, 1, 1}));
    CHECK(std::vector<std::uint8_t>(d.bits().begin(), d.bits().end()) == std::vector<std::uint8_t>{0, 1, 0, 0});
  }
  SUBCASE("errors") {
    CHECK(error_code([] { diff_mask(SemanticMask(2, 2, 3), SemanticMask(3, 2, 3)); }) == Errc::shape);
    CHECK(error_code([] { diff_mask(SemanticMask(2, 2, 3), SemanticMask(2, 2, 4)); }) == Errc::schema);
  }
  SUBCASE("random pairs match a loop oracle and are symmetric") {
    gen::Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      const auto a = gen::blocky(rng, 8, 8, 4, 3);
      const auto b = gen::perturb(rng, a, 0.2);
      const auto d = diff_mask(a, b);
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) REQUIRE(d.at(x, y) == (a.at(x, y) != b.at(x, y)));
      }
      REQUIRE(d == diff_mask(b, a));
      REQUIRE(diff_mask(a, a).popcount() == 0);
    }
  }
}

TEST_CASE("crop") {
  gen::Rng rng(3);
  const auto img = gen::image(rng, 10, 8);
  SUBCASE("full rect with no margin is the identity") { CHECK(crop(img, {0, 0, 10, 8}, 0) == img); }
  SUBCASE("single pixel") {
    const auto c = crop(img, {0, 0, 1, 1}, 0);
    REQUIRE(c.width() == 1);
    REQUIRE(c.height() == 1);
    CHECK(std::equal(c.pixel(0, 0), c.pixel(0, 0) + 3, img.pixel(0, 0)));
  }
  SUBCASE("margin clamps at the border") {
    // rect x 7..8, y 0..1 grown by 4: x 3..9, y 0..5.
    const auto c = crop(img, {7, 0, 2, 2}, 4);
    REQUIRE(c.width() == 7);
    REQUIRE(c.height() == 6);
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 7; ++x) REQUIRE(std::equal(c.pixel(x, y), c.pixel(x, y) + 3, img.pixel(x + 3, y)));
    }
    CHECK(expand_rect({7, 0, 2, 2}, 4, 10, 8) == PixelRect{3, 0, 7, 6});
  }
  SUBCASE("zero area") { CHECK(error_code([&] { crop(img, {2, 2, 0, 3}, 1); }) == Errc::empty_region); }
  SUBCASE("outside the image") { CHECK(error_code([&] { crop(img, {8, 0, 4, 2}, 0); }) == Errc::contract); }
}

TEST_CASE("png masks and images") {
  TempDir dir;
  SUBCASE("mask round trip") {
    gen::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const int w = gen::uniform_int(rng, 1, 9);
      const int h = gen::uniform_int(rng, 1, 9);
      const auto m = gen::blocky(rng, w, h, 7, 3);
      save_mask_png(dir / "m.png", m);
      REQUIRE(load_mask_png(dir / "m.png", 7) == m);
    }
    const auto m5 = gen::blocky(rng, 5, 5, 3, 2);
    save_mask_png(dir / "m5.png", m5);
    CHECK(load_mask_png(dir / "m5.png", 3).labels().size() == 25);
  }
  SUBCASE("image round trip") {
    gen::Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      const auto img = gen::image(rng, gen::uniform_int(rng, 1, 12), gen::uniform_int(rng, 1, 12));
      save_image_png(dir / "i.png", img);
      REQUIRE(load_image_png(dir / "i.png") == img);
    }
  }
  SUBCASE("known grayscale bytes") {
    // 2x2 8-bit grayscale PNG with rows [0 1] [2 3], written by a reference encoder.
    const std::vector<std::uint8_t> bytes = {
        0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
        0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x00, 0x00, 0x00, 0x00, 0x57, 0xdd, 0x52, 0xf8, 0x00, 0x00, 0x00,
        0x0e, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x60, 0x60, 0x64, 0x64, 0x62, 0x04, 0x00, 0x00, 0x12, 0x00,
        0x06, 0x22, 0x61, 0x0b, 0x2c, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
    write_file_bytes(dir / "k.png", bytes);
    const auto m = load_mask_png(dir / "k.png", 4);
    CHECK(std::vector<std::uint8_t>(m.labels().begin(), m.labels().end()) == std::vector<std::uint8_t>{0, 1, 2, 3});
    CHECK(error_code([&] { load_mask_png(dir / "k.png", 3); }) == Errc::schema);
  }
  SUBCASE("16-bit input is rejected") {
    const std::vector<std::uint8_t> bytes = {
        0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00,
        0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x10, 0x00, 0x00, 0x00, 0x00, 0x07, 0x4d, 0x8e, 0xbb, 0x00,
        0x00, 0x00, 0x12, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x60, 0x60, 0x60, 0x60, 0x64, 0x64, 0x60,
        0x62, 0x60, 0x04, 0x00, 0x00, 0x1c, 0x00, 0x06, 0xc9, 0x4a, 0x0b, 0x54, 0x00, 0x00, 0x00, 0x00, 0x49,
        0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
    write_file_bytes(dir / "w.png", bytes);
    CHECK(error_code([&] { load_mask_png(dir / "w.png", 4); }) == Errc::format);
  }
  SUBCASE("channel count is checked") {
    save_image_png(dir / "rgb.png", RgbImage(2, 2));
    CHECK(error_code([&] { load_mask_png(dir / "rgb.png", 4); }) == Errc::format);
    save_mask_png(dir / "gray.png", SemanticMask(2, 2, 2));
    CHECK(error_code([&] { load_image_png(dir / "gray.png"); }) == Errc::format);
  }
  SUBCASE("garbage is a format error") {
    write_file_bytes(dir / "bad.png", std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(error_code([&] { load_mask_png(dir / "bad.png", 4); }) == Errc::format);
  }
}

TEST_CASE("class map") {
  const auto m = ClassMap::parse("0\tbackground\n1\tbuilding\n2\ttree\n");
  CHECK(m.size() == 3);
  CHECK(m.name(1) == "building");
  CHECK(m.index_of("tree") == 2);
  CHECK_FALSE(m.find("water").has_value());
  CHECK(ClassMap::parse(m.serialize()).names() == m.names());
  CHECK(error_code([] { ClassMap::parse("0\ta\n2\tb\n"); }) == Errc::schema);
  CHECK(error_code([] { ClassMap::parse("0 a\n"); }) == Errc::format);
  CHECK(error_code([&] { m.index_of("water"); }) == Errc::schema);
}
