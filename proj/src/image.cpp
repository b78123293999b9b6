#include "vlab/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "vlab/serialize.hpp"

namespace vlab {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

Image8 decode_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) fail(ErrorKind::Io, "cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(ErrorKind::Image, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorKind::Image, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Image, "png decode failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w, h;
  int bit_depth, color_type;
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

  // normalize everything to 8-bit RGB
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image8 img;
  img.width = int64_t(w);
  img.height = int64_t(h);
  img.rgb.resize(size_t(img.width * img.height * 3));
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.rgb.data() + size_t(y) * size_t(w) * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void encode_png(const std::filesystem::path& path, const Image8& img) {
  if (img.width < 1 || img.height < 1) fail(ErrorKind::Image, "cannot encode empty image");
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(tmp.string().c_str(), "wb"));
    if (!fp) fail(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(ErrorKind::Image, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      fail(ErrorKind::Image, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      fail(ErrorKind::Image, "png encode failed for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_const_bytep> rows(size_t(img.height));
    for (int64_t y = 0; y < img.height; ++y)
      rows[size_t(y)] = img.rgb.data() + size_t(y) * size_t(img.width) * 3;
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::filesystem::rename(tmp, path);
}

ImageF resize_bilinear(const Image8& src, int64_t out_w, int64_t out_h) {
  if (src.width < 1 || src.height < 1) fail(ErrorKind::Image, "cannot resize degenerate frame");
  if (out_w < 1 || out_h < 1) fail(ErrorKind::Image, "resize target must be positive");
  ImageF out;
  out.width = out_w;
  out.height = out_h;
  out.rgb.resize(size_t(out_w * out_h * 3));
  const double sx = double(src.width) / double(out_w);
  const double sy = double(src.height) / double(out_h);
  for (int64_t y = 0; y < out_h; ++y) {
    const double fy = (double(y) + 0.5) * sy - 0.5;
    int64_t y0 = int64_t(std::floor(fy));
    const double wy = fy - double(y0);
    int64_t y1 = std::min(y0 + 1, src.height - 1);
    y0 = std::clamp<int64_t>(y0, 0, src.height - 1);
    for (int64_t x = 0; x < out_w; ++x) {
      const double fx = (double(x) + 0.5) * sx - 0.5;
      int64_t x0 = int64_t(std::floor(fx));
      const double wx = fx - double(x0);
      int64_t x1 = std::min(x0 + 1, src.width - 1);
      x0 = std::clamp<int64_t>(x0, 0, src.width - 1);
      for (int64_t c = 0; c < 3; ++c) {
        const double top = double(src.at(y0, x0, c)) * (1.0 - wx) + double(src.at(y0, x1, c)) * wx;
        const double bot = double(src.at(y1, x0, c)) * (1.0 - wx) + double(src.at(y1, x1, c)) * wx;
        out.at(y, x, c) = float(top * (1.0 - wy) + bot * wy);
      }
    }
  }
  return out;
}

ImageF center_crop(const ImageF& src, int64_t side) {
  if (side > src.width || side > src.height)
    fail(ErrorKind::Image, "crop side exceeds frame size");
  const int64_t ox = (src.width - side) / 2;
  const int64_t oy = (src.height - side) / 2;
  ImageF out;
  out.width = side;
  out.height = side;
  out.rgb.resize(size_t(side * side * 3));
  for (int64_t y = 0; y < side; ++y)
    std::memcpy(out.rgb.data() + size_t(y * side * 3), src.rgb.data() + size_t(((y + oy) * src.width + ox) * 3),
                size_t(side * 3) * sizeof(float));
  return out;
}

void hflip_inplace(ImageF& img) {
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width / 2; ++x)
      for (int64_t c = 0; c < 3; ++c)
        std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

void apply_jitter(ImageF& img, float brightness, float contrast, float saturation) {
  const size_t n = img.rgb.size() / 3;
  float* p = img.rgb.data();

  if (brightness != 1.0f)
    for (size_t i = 0; i < n * 3; ++i) p[i] *= brightness;

  if (contrast != 1.0f) {
    double mean_gray = 0.0;
    for (size_t i = 0; i < n; ++i)
      mean_gray += 0.299 * double(p[i * 3]) + 0.587 * double(p[i * 3 + 1]) + 0.114 * double(p[i * 3 + 2]);
    const float g = float(mean_gray / double(n));
    for (size_t i = 0; i < n * 3; ++i) p[i] = contrast * p[i] + (1.0f - contrast) * g;
  }

  if (saturation != 1.0f) {
    for (size_t i = 0; i < n; ++i) {
      const float luma =
          0.299f * p[i * 3] + 0.587f * p[i * 3 + 1] + 0.114f * p[i * 3 + 2];
      for (int c = 0; c < 3; ++c)
        p[i * 3 + size_t(c)] = saturation * p[i * 3 + size_t(c)] + (1.0f - saturation) * luma;
    }
  }

  for (size_t i = 0; i < n * 3; ++i) p[i] = std::clamp(p[i], 0.0f, 255.0f);
}

}  // namespace vlab
