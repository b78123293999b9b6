#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vlab/error.hpp"

namespace vlab {

/// Interleaved 8-bit RGB image.
struct Image8 {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> rgb;  // height * width * 3

  uint8_t& at(int64_t y, int64_t x, int64_t c) { return rgb[size_t((y * width + x) * 3 + c)]; }
  uint8_t at(int64_t y, int64_t x, int64_t c) const { return rgb[size_t((y * width + x) * 3 + c)]; }
};

/// Interleaved float RGB image, values in the 0..255 domain until normalization.
struct ImageF {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<float> rgb;

  float& at(int64_t y, int64_t x, int64_t c) { return rgb[size_t((y * width + x) * 3 + c)]; }
  float at(int64_t y, int64_t x, int64_t c) const { return rgb[size_t((y * width + x) * 3 + c)]; }
};

Image8 decode_png(const std::filesystem::path& path);
void encode_png(const std::filesystem::path& path, const Image8& img);

/// Bilinear resample with half-pixel centers; identity when sizes match.
ImageF resize_bilinear(const Image8& src, int64_t out_w, int64_t out_h);

ImageF center_crop(const ImageF& src, int64_t side);
void hflip_inplace(ImageF& img);

/// Photometric jitter, torchvision-style blends, applied in fixed order
/// (brightness, contrast, saturation) and clamped back to [0,255].
void apply_jitter(ImageF& img, float brightness, float contrast, float saturation);

}  // namespace vlab
