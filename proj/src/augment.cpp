#include "hybridet/augment.hpp"

#include <algorithm>
#include <cmath>

#include "hybridet/error.hpp"
#include "hybridet/kernels.hpp"

namespace hybridet {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double luma(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

// Hexagonal HSV model, h in [0, 1).
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  v = mx;
  s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = (g - b) / delta;
  else if (mx == g)
    h = (b - r) / delta + 2.0;
  else
    h = (r - g) / delta + 4.0;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double h6 = h * 6.0;
  const int i = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

bool parallel() { return kernels::mode() == kernels::Mode::Parallel; }

}  // namespace

void AugmentConfig::validate() const {
  auto finite_nonneg = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0)
      throw ConfigError(std::string("augment: ") + name + " must be finite and >= 0");
  };
  finite_nonneg(brightness, "brightness");
  finite_nonneg(contrast, "contrast");
  finite_nonneg(saturation, "saturation");
  if (!std::isfinite(hue) || hue < 0.0 || hue > 0.5)
    throw ConfigError("augment: hue must be in [0, 0.5]");
  auto ordered = [](std::pair<double, double> r, const char* name) {
    if (!std::isfinite(r.first) || !std::isfinite(r.second) || r.first > r.second)
      throw ConfigError(std::string("augment: ") + name + " range must satisfy lo <= hi");
  };
  ordered(crop_scale, "crop_scale");
  ordered(crop_ratio, "crop_ratio");
  ordered(affine_scale, "affine_scale");
  if (crop_scale.first <= 0.0 || crop_scale.second > 1.0)
    throw ConfigError("augment: crop_scale must be within (0, 1]");
  if (crop_ratio.first <= 0.0) throw ConfigError("augment: crop_ratio must be positive");
  if (!std::isfinite(affine_degrees))
    throw ConfigError("augment: affine_degrees must be finite");
  if (!(affine_translate >= 0.0 && affine_translate < 1.0))
    throw ConfigError("augment: affine_translate must be in [0, 1)");
  if (affine_scale.first <= 0.0) throw ConfigError("augment: affine_scale must be positive");
  if (out_h < 1 || out_w < 1) throw ConfigError("augment: out_size must be positive");
}

ImageBuffer color_jitter(const ImageBuffer& img, const JitterFactors& f) {
  for (double v : {f.brightness, f.contrast, f.saturation, f.hue_shift})
    if (!std::isfinite(v)) throw ConfigError("color_jitter: non-finite factor");
  if (f.brightness < 0.0 || f.contrast < 0.0 || f.saturation < 0.0)
    throw ConfigError("color_jitter: factors must be non-negative");
  if (f.hue_shift < -0.5 || f.hue_shift > 0.5)
    throw ConfigError("color_jitter: hue shift must be in [-0.5, 0.5]");

  ImageBuffer out = img;
  const std::size_t n_px = static_cast<std::size_t>(img.h) * img.w;

  if (f.brightness != 1.0) {
    for (double& v : out.pix) v = clamp01(v * f.brightness);
  }
  if (f.contrast != 1.0) {
    // Mean luma is a serial reduction so results do not depend on threads.
    double mean = 0.0;
    for (std::size_t i = 0; i < n_px; ++i)
      mean += luma(out.pix[i * 3], out.pix[i * 3 + 1], out.pix[i * 3 + 2]);
    mean /= static_cast<double>(n_px);
    for (double& v : out.pix) v = clamp01(mean + (v - mean) * f.contrast);
  }
  if (f.saturation != 1.0) {
    for (std::size_t i = 0; i < n_px; ++i) {
      const double g = luma(out.pix[i * 3], out.pix[i * 3 + 1], out.pix[i * 3 + 2]);
      for (int c = 0; c < 3; ++c)
        out.pix[i * 3 + c] = clamp01(g + (out.pix[i * 3 + c] - g) * f.saturation);
    }
  }
  if (f.hue_shift != 0.0) {
    const long total = static_cast<long>(n_px);
#pragma omp parallel for schedule(static) if (parallel())
    for (long i = 0; i < total; ++i) {
      double h, s, v;
      rgb_to_hsv(out.pix[i * 3], out.pix[i * 3 + 1], out.pix[i * 3 + 2], h, s, v);
      h += f.hue_shift;
      h -= std::floor(h);
      double r, g, b;
      hsv_to_rgb(h, s, v, r, g, b);
      out.pix[i * 3] = clamp01(r);
      out.pix[i * 3 + 1] = clamp01(g);
      out.pix[i * 3 + 2] = clamp01(b);
    }
  }
  return out;
}

JitterFactors sample_jitter_factors(const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  JitterFactors f;
  f.brightness = rng.uniform(std::max(0.0, 1.0 - cfg.brightness), 1.0 + cfg.brightness);
  f.contrast = rng.uniform(std::max(0.0, 1.0 - cfg.contrast), 1.0 + cfg.contrast);
  f.saturation = rng.uniform(std::max(0.0, 1.0 - cfg.saturation), 1.0 + cfg.saturation);
  f.hue_shift = rng.uniform(-cfg.hue, cfg.hue);
  return f;
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int out_h, int out_w) {
  if (img.h < 1 || img.w < 1) throw ConfigError("resize: empty input image");
  if (out_h < 1 || out_w < 1) throw ConfigError("resize: output size must be positive");
  ImageBuffer out(out_h, out_w);
  const double sy = static_cast<double>(img.h) / out_h;
  const double sx = static_cast<double>(img.w) / out_w;
#pragma omp parallel for schedule(static) if (parallel())
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      // Half-pixel-center mapping, neighbors clamped to the edge.
      const double src_y = (y + 0.5) * sy - 0.5;
      const double src_x = (x + 0.5) * sx - 0.5;
      const int y1 = static_cast<int>(std::floor(src_y));
      const int x1 = static_cast<int>(std::floor(src_x));
      const double fy = src_y - y1;
      const double fx = src_x - x1;
      const int y1c = std::clamp(y1, 0, img.h - 1);
      const int y2c = std::clamp(y1 + 1, 0, img.h - 1);
      const int x1c = std::clamp(x1, 0, img.w - 1);
      const int x2c = std::clamp(x1 + 1, 0, img.w - 1);
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - fy) * ((1.0 - fx) * img.at(y1c, x1c, c) + fx * img.at(y1c, x2c, c)) +
                         fy * ((1.0 - fx) * img.at(y2c, x1c, c) + fx * img.at(y2c, x2c, c));
        out.at(y, x, c) = v;
      }
    }
  }
  return out;
}

ImageBuffer random_resized_crop(const ImageBuffer& img, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (img.h < 2 || img.w < 2) throw ConfigError("crop: input image must be at least 2x2");

  const double area = static_cast<double>(img.h) * img.w;
  int crop_w = -1, crop_h = -1, x0 = 0, y0 = 0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target_area = rng.uniform(cfg.crop_scale.first, cfg.crop_scale.second) * area;
    const double aspect =
        std::exp(rng.uniform(std::log(cfg.crop_ratio.first), std::log(cfg.crop_ratio.second)));
    const int cw = static_cast<int>(std::llround(std::sqrt(target_area * aspect)));
    const int ch = static_cast<int>(std::llround(std::sqrt(target_area / aspect)));
    if (cw >= 1 && ch >= 1 && cw <= img.w && ch <= img.h) {
      crop_w = cw;
      crop_h = ch;
      x0 = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(img.w - cw + 1)));
      y0 = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(img.h - ch + 1)));
      break;
    }
  }
  if (crop_w < 0) {
    // Center-crop the maximal region whose aspect fits the configured range.
    const double in_ratio = static_cast<double>(img.w) / img.h;
    if (in_ratio < cfg.crop_ratio.first) {
      crop_w = img.w;
      crop_h = std::max(1, static_cast<int>(std::llround(img.w / cfg.crop_ratio.first)));
    } else if (in_ratio > cfg.crop_ratio.second) {
      crop_h = img.h;
      crop_w = std::max(1, static_cast<int>(std::llround(img.h * cfg.crop_ratio.second)));
    } else {
      crop_w = img.w;
      crop_h = img.h;
    }
    x0 = (img.w - crop_w) / 2;
    y0 = (img.h - crop_h) / 2;
  }

  ImageBuffer crop(crop_h, crop_w);
  for (int y = 0; y < crop_h; ++y)
    for (int x = 0; x < crop_w; ++x)
      for (int c = 0; c < 3; ++c) crop.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return resize_bilinear(crop, cfg.out_h, cfg.out_w);
}

ImageBuffer affine(const ImageBuffer& img, const std::array<double, 6>& m) {
  const double det = m[0] * m[4] - m[1] * m[3];
  if (std::abs(det) <= 1e-12) throw ConfigError("degenerate affine matrix");
  const double ia = m[4] / det;
  const double ib = -m[1] / det;
  const double id = -m[3] / det;
  const double ie = m[0] / det;

  ImageBuffer out(img.h, img.w);
#pragma omp parallel for schedule(static) if (parallel())
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const double dx = x - m[2];
      const double dy = y - m[5];
      const double sx = ia * dx + ib * dy;
      const double sy = id * dx + ie * dy;
      const int x1 = static_cast<int>(std::floor(sx));
      const int y1 = static_cast<int>(std::floor(sy));
      const double fx = sx - x1;
      const double fy = sy - y1;
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        const double w11 = (1.0 - fx) * (1.0 - fy);
        const double w21 = fx * (1.0 - fy);
        const double w12 = (1.0 - fx) * fy;
        const double w22 = fx * fy;
        if (y1 >= 0 && y1 < img.h) {
          if (x1 >= 0 && x1 < img.w) acc += w11 * img.at(y1, x1, c);
          if (x1 + 1 >= 0 && x1 + 1 < img.w) acc += w21 * img.at(y1, x1 + 1, c);
        }
        if (y1 + 1 >= 0 && y1 + 1 < img.h) {
          if (x1 >= 0 && x1 < img.w) acc += w12 * img.at(y1 + 1, x1, c);
          if (x1 + 1 >= 0 && x1 + 1 < img.w) acc += w22 * img.at(y1 + 1, x1 + 1, c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

ImageBuffer augment_pipeline(const ImageBuffer& img, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  ImageBuffer cur = random_resized_crop(img, cfg, rng);

  const double deg = rng.uniform(-cfg.affine_degrees, cfg.affine_degrees);
  const double tx = rng.uniform(-cfg.affine_translate, cfg.affine_translate) * cfg.out_w;
  const double ty = rng.uniform(-cfg.affine_translate, cfg.affine_translate) * cfg.out_h;
  const double scale = rng.uniform(cfg.affine_scale.first, cfg.affine_scale.second);

  if (deg != 0.0 || tx != 0.0 || ty != 0.0 || scale != 1.0) {
    const double theta = deg * M_PI / 180.0;
    const double cs = std::cos(theta) * scale;
    const double sn = std::sin(theta) * scale;
    const double cx = (cfg.out_w - 1) * 0.5;
    const double cy = (cfg.out_h - 1) * 0.5;
    // Rotate+scale about the center, then translate.
    const std::array<double, 6> m = {cs, -sn, cx + tx - cs * cx + sn * cy,
                                     sn, cs,  cy + ty - sn * cx - cs * cy};
    cur = affine(cur, m);
  }

  const JitterFactors f = sample_jitter_factors(cfg, rng);
  return color_jitter(cur, f);
}

}  // namespace hybridet
