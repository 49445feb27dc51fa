// SPDX-License-Identifier: Apache-2.0
#include "sigclr/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sigclr/errors.hpp"

namespace sigclr {

void AugmentationConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument(std::string("augmentation: ") + name + " must be in [0,1]");
  };
  prob(flip_prob, "flip_prob");
  prob(jitter_prob, "jitter_prob");
  prob(grayscale_prob, "grayscale_prob");
  prob(blur_prob_a, "blur_prob_a");
  prob(blur_prob_b, "blur_prob_b");
  if (!(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0))
    throw InvalidArgument("augmentation: crop scale range must satisfy 0 < min <= max <= 1");
  if (!(crop_ratio_min > 0.0 && crop_ratio_min <= crop_ratio_max))
    throw InvalidArgument("augmentation: crop ratio range must satisfy 0 < min <= max");
  if (!(brightness >= 0.0 && contrast >= 0.0 && saturation >= 0.0 && hue >= 0.0 && hue <= 0.5))
    throw InvalidArgument("augmentation: jitter strengths must be >= 0 (hue <= 0.5)");
  if (!(blur_sigma_min > 0.0 && blur_sigma_min <= blur_sigma_max))
    throw InvalidArgument("augmentation: blur sigma range must satisfy 0 < min <= max");
}

AugmentationConfig AugmentationConfig::identity(std::size_t output_size) {
  AugmentationConfig c;
  c.crop_scale_min = c.crop_scale_max = 1.0;
  c.crop_ratio_min = c.crop_ratio_max = 1.0;
  c.flip_prob = c.jitter_prob = c.grayscale_prob = c.blur_prob_a = c.blur_prob_b = 0.0;
  c.output_size = output_size;
  return c;
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Half-sample symmetric reflection into [0, n); valid while |overshoot| <= n.
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto sn = static_cast<std::ptrdiff_t>(n);
  if (i < 0) i = -i - 1;
  if (i >= sn) i = 2 * sn - i - 1;
  return static_cast<std::size_t>(i);
}

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0.0) {
    if (mx == r) {
      h = std::fmod((g - b) / delta, 6.0);
      if (h < 0.0) h += 6.0;
    } else if (mx == g) {
      h = (b - r) / delta + 2.0;
    } else {
      h = (r - g) / delta + 4.0;
    }
  }
  return {h / 6.0, mx > 0.0 ? delta / mx : 0.0, mx};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double h6 = h * 6.0;
  const double fl = std::floor(h6);
  const double f = h6 - fl;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (static_cast<int>(fl) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

}  // namespace

Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == img.height && out_w == img.width) return img;
  Image out(img.channels, out_h, out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(img.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(img.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = img.at(c, y0, x0) * (1.0 - wx) + img.at(c, y0, x1) * wx;
        const double bot = img.at(c, y1, x0) * (1.0 - wx) + img.at(c, y1, x1) * wx;
        out.at(c, y, x) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0 || top + h > img.height || left + w > img.width)
    throw std::logic_error("crop window exceeds image bounds");
  Image out(img.channels, h, w);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, top + y, left + x);
  return out;
}

Image center_crop(const Image& img, std::size_t h, std::size_t w) {
  if (h > img.height || w > img.width) throw ShapeError("center crop larger than image");
  return crop(img, (img.height - h) / 2, (img.width - w) / 2, h, w);
}

Image hflip(const Image& img) {
  Image out = img;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

Image to_grayscale(const Image& img) {
  if (img.channels != 3) return img;
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double g = clamp01(luma(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)));
      for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = g;
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_blur: sigma must be positive");
  const std::size_t side = std::min(img.height, img.width);
  const auto radius = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(3.0 * sigma)), side - 1);
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(radius);
    kernel[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    total += kernel[i];
  }
  for (double& k : kernel) k /= total;

  const auto r = static_cast<std::ptrdiff_t>(radius);
  Image tmp(img.channels, img.height, img.width);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -r; k <= r; ++k)
          acc += kernel[static_cast<std::size_t>(k + r)] *
                 img.at(c, y, reflect(static_cast<std::ptrdiff_t>(x) + k, img.width));
        tmp.at(c, y, x) = acc;
      }
  Image out(img.channels, img.height, img.width);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -r; k <= r; ++k)
          acc += kernel[static_cast<std::size_t>(k + r)] *
                 tmp.at(c, reflect(static_cast<std::ptrdiff_t>(y) + k, img.height), x);
        out.at(c, y, x) = clamp01(acc);
      }
  return out;
}

Image adjust_brightness(const Image& img, double factor) {
  Image out = img;
  for (double& v : out.pixels) v = clamp01(v * factor);
  return out;
}

Image adjust_contrast(const Image& img, double factor) {
  double mean = 0.0;
  const std::size_t plane = img.height * img.width;
  if (img.channels == 3) {
    for (std::size_t p = 0; p < plane; ++p)
      mean += luma(img.pixels[p], img.pixels[plane + p], img.pixels[2 * plane + p]);
    mean /= static_cast<double>(plane);
  } else {
    for (double v : img.pixels) mean += v;
    mean /= static_cast<double>(img.size());
  }
  Image out = img;
  for (double& v : out.pixels) v = clamp01((v - mean) * factor + mean);
  return out;
}

Image adjust_saturation(const Image& img, double factor) {
  if (img.channels != 3) return img;
  const Image gray = to_grayscale(img);
  Image out = img;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.pixels[i] = clamp01((img.pixels[i] - gray.pixels[i]) * factor + gray.pixels[i]);
  return out;
}

Image adjust_hue(const Image& img, double shift) {
  if (img.channels != 3) return img;
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      auto [h, s, v] = rgb_to_hsv(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x));
      h = h + shift;
      h -= std::floor(h);
      const auto rgb = hsv_to_rgb(h, s, v);
      for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = clamp01(rgb[c]);
    }
  }
  return out;
}

Image random_resized_crop(const Image& img, const AugmentationConfig& config, std::size_t out,
                          Rng& rng) {
  const double area = static_cast<double>(img.height * img.width);
  const double log_lo = std::log(config.crop_ratio_min);
  const double log_hi = std::log(config.crop_ratio_max);
  std::size_t h = img.height, w = img.width, top = 0, left = 0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(config.crop_scale_min, config.crop_scale_max);
    const double ratio = std::exp(rng.uniform(log_lo, log_hi));
    const auto cw = static_cast<std::size_t>(std::lround(std::sqrt(target * ratio)));
    const auto ch = static_cast<std::size_t>(std::lround(std::sqrt(target / ratio)));
    if (cw >= 1 && ch >= 1 && cw <= img.width && ch <= img.height) {
      h = ch;
      w = cw;
      top = static_cast<std::size_t>(rng.below(img.height - ch + 1));
      left = static_cast<std::size_t>(rng.below(img.width - cw + 1));
      break;
    }
  }
  return resize_bilinear(crop(img, top, left, h, w), out, out);
}

Image augment(const Image& img, const AugmentationConfig& config, ViewSlot slot, Rng& rng) {
  const std::size_t out = config.output_size == 0 ? img.height : config.output_size;
  Image v = random_resized_crop(img, config, out, rng);
  if (rng.bernoulli(config.flip_prob)) v = hflip(v);
  if (rng.bernoulli(config.jitter_prob)) {
    v = adjust_brightness(v, rng.uniform(1.0 - config.brightness, 1.0 + config.brightness));
    v = adjust_contrast(v, rng.uniform(1.0 - config.contrast, 1.0 + config.contrast));
    v = adjust_saturation(v, rng.uniform(1.0 - config.saturation, 1.0 + config.saturation));
    v = adjust_hue(v, rng.uniform(-config.hue, config.hue));
  }
  if (rng.bernoulli(config.grayscale_prob)) v = to_grayscale(v);
  const double blur_prob = slot == ViewSlot::A ? config.blur_prob_a : config.blur_prob_b;
  if (rng.bernoulli(blur_prob)) v = gaussian_blur(v, rng.uniform(config.blur_sigma_min, config.blur_sigma_max));
  return v;
}

std::pair<Matrix, Matrix> two_views(const ImageRecord& record, const AugmentationConfig& config,
                                    Rng& rng) {
  config.validate();
  Image a = augment(record.image, config, ViewSlot::A, rng);
  Image b = augment(record.image, config, ViewSlot::B, rng);
  return {a.flatten(), b.flatten()};
}

Matrix eval_transform(const ImageRecord& record, bool train_phase, const AugmentationConfig& config,
                      Rng* rng) {
  const Image& img = record.image;
  const std::size_t out = config.output_size == 0 ? img.height : config.output_size;
  if (train_phase) {
    if (!rng) throw InvalidArgument("eval_transform: train phase needs an rng");
    Image v = random_resized_crop(img, config, out, *rng);
    if (rng->bernoulli(0.5)) v = hflip(v);
    return v.flatten();
  }
  const std::size_t shorter = std::min(img.height, img.width);
  const auto scale = static_cast<double>(out) / static_cast<double>(shorter);
  const auto rh = static_cast<std::size_t>(std::lround(static_cast<double>(img.height) * scale));
  const auto rw = static_cast<std::size_t>(std::lround(static_cast<double>(img.width) * scale));
  return center_crop(resize_bilinear(img, rh, rw), out, out).flatten();
}

}  // namespace sigclr
