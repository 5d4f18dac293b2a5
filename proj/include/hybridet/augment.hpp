#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "hybridet/rng.hpp"

namespace hybridet {

// RGB image, values in [0, 1], row-major with interleaved channels.
struct ImageBuffer {
  int h = 0;
  int w = 0;
  std::vector<double> pix;  // h*w*3

  ImageBuffer() = default;
  ImageBuffer(int height, int width)
      : h(height), w(width), pix(static_cast<std::size_t>(height) * width * 3, 0.0) {}

  double& at(int y, int x, int c) {
    return pix[(static_cast<std::size_t>(y) * w + x) * 3 + c];
  }
  double at(int y, int x, int c) const {
    return pix[(static_cast<std::size_t>(y) * w + x) * 3 + c];
  }
};

struct JitterFactors {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue_shift = 0.0;  // fraction of the hue circle, in [-0.5, 0.5]
};

struct AugmentConfig {
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
  std::pair<double, double> crop_scale{0.6, 1.0};
  std::pair<double, double> crop_ratio{0.75, 4.0 / 3.0};
  double affine_degrees = 15.0;
  double affine_translate = 0.1;  // fraction of output width/height
  std::pair<double, double> affine_scale{0.9, 1.1};
  int out_h = 224;
  int out_w = 224;
  std::uint64_t seed = 0;

  void validate() const;
};

// Applies brightness, contrast, saturation, then hue rotation, clamping to
// [0, 1] after each step. A factor of exactly 1 (or hue shift 0) skips its
// step, so unit factors are a bitwise identity.
ImageBuffer color_jitter(const ImageBuffer& img, const JitterFactors& f);

// brightness/contrast/saturation ~ U[max(0, 1-range), 1+range],
// hue_shift ~ U[-hue, hue]. Four draws in that order.
JitterFactors sample_jitter_factors(const AugmentConfig& cfg, Rng& rng);

// Samples target area U[crop_scale]*(h*w) and aspect ratio
// exp(U[ln crop_ratio]); after 10 failed attempts falls back to the maximal
// centered crop with the aspect clamped into crop_ratio. The crop is resized
// to (out_h, out_w) with bilinear interpolation.
ImageBuffer random_resized_crop(const ImageBuffer& img, const AugmentConfig& cfg, Rng& rng);

// Inverse-warps with the forward matrix m (row-major 2x3, pixel-center
// coordinates, x = column). Samples outside the input contribute 0.
ImageBuffer affine(const ImageBuffer& img, const std::array<double, 6>& m);

ImageBuffer resize_bilinear(const ImageBuffer& img, int out_h, int out_w);

// Crop -> random affine about the image center -> color jitter.
ImageBuffer augment_pipeline(const ImageBuffer& img, const AugmentConfig& cfg, Rng& rng);

}  // namespace hybridet
