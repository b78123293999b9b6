#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "vlab/image.hpp"
#include "vlab/rng.hpp"

using namespace vlab;

namespace {

Image8 noise_image(int64_t w, int64_t h, uint64_t seed) {
  Image8 img;
  img.width = w;
  img.height = h;
  img.rgb.resize(size_t(w * h * 3));
  Rng rng(seed);
  for (auto& b : img.rgb) b = uint8_t(rng.next_below(256));
  return img;
}

std::filesystem::path tmp_dir() {
  auto p = std::filesystem::temp_directory_path() / "vlab_image_test";
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("png round trip is lossless") {
  Image8 img = noise_image(33, 17, 4);
  auto path = tmp_dir() / "rt.png";
  encode_png(path, img);
  Image8 back = decode_png(path);
  CHECK(back.width == 33);
  CHECK(back.height == 17);
  CHECK(back.rgb == img.rgb);
}

TEST_CASE("png encoding is byte-deterministic") {
  Image8 img = noise_image(16, 16, 9);
  auto p1 = tmp_dir() / "d1.png";
  auto p2 = tmp_dir() / "d2.png";
  encode_png(p1, img);
  encode_png(p2, img);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  CHECK(!b1.empty());
}

TEST_CASE("resize to the same size is the identity") {
  Image8 img = noise_image(24, 24, 5);
  ImageF out = resize_bilinear(img, 24, 24);
  for (int64_t y = 0; y < 24; ++y)
    for (int64_t x = 0; x < 24; ++x)
      for (int64_t c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == float(img.at(y, x, c)));
}

TEST_CASE("resize preserves constant images and hits target size") {
  Image8 img;
  img.width = 320;
  img.height = 240;
  img.rgb.assign(size_t(320 * 240 * 3), 77);
  ImageF out = resize_bilinear(img, 256, 256);
  CHECK(out.width == 256);
  CHECK(out.height == 256);
  for (float v : out.rgb) CHECK(v == doctest::Approx(77.0f));
}

TEST_CASE("center crop geometry") {
  ImageF src;
  src.width = 8;
  src.height = 8;
  src.rgb.resize(8 * 8 * 3);
  for (int64_t y = 0; y < 8; ++y)
    for (int64_t x = 0; x < 8; ++x)
      for (int64_t c = 0; c < 3; ++c) src.at(y, x, c) = float(y * 8 + x);
  ImageF out = center_crop(src, 4);
  CHECK(out.width == 4);
  CHECK(out.at(0, 0, 0) == float(2 * 8 + 2));  // offset (8-4)/2 = 2
  CHECK_THROWS_AS((void)center_crop(out, 10), Error);
}

TEST_CASE("horizontal flip is an involution") {
  Image8 img = noise_image(15, 9, 6);
  ImageF a = resize_bilinear(img, 15, 9);
  ImageF b = a;
  hflip_inplace(b);
  for (int64_t y = 0; y < 9; ++y)
    for (int64_t x = 0; x < 15; ++x)
      for (int64_t c = 0; c < 3; ++c) CHECK(b.at(y, x, c) == a.at(y, 14 - x, c));
  hflip_inplace(b);
  CHECK(b.rgb == a.rgb);
}

TEST_CASE("jitter identity at unit factors and brightness scaling") {
  Image8 img = noise_image(10, 10, 8);
  ImageF a = resize_bilinear(img, 10, 10);
  ImageF b = a;
  apply_jitter(b, 1.0f, 1.0f, 1.0f);
  CHECK(b.rgb == a.rgb);

  ImageF c = a;
  apply_jitter(c, 0.5f, 1.0f, 1.0f);
  for (size_t i = 0; i < c.rgb.size(); ++i) CHECK(c.rgb[i] == doctest::Approx(a.rgb[i] * 0.5f));
}

TEST_CASE("degenerate frames are image errors") {
  Image8 bad;
  bad.width = 0;
  bad.height = 4;
  CHECK_THROWS_AS((void)resize_bilinear(bad, 8, 8), Error);
}
