// SPDX-License-Identifier: Apache-2.0
//
// Two-view stochastic augmentation. Chain order per view: random resized crop
// (bilinear), horizontal flip, color jitter (brightness, contrast,
// saturation, hue, in that order), grayscale, Gaussian blur. All randomness
// comes from the caller's Rng, so a seeded stream reproduces views exactly.
#pragma once

#include <cstddef>
#include <utility>

#include "sigclr/data.hpp"
#include "sigclr/rng.hpp"

namespace sigclr {

struct AugmentationConfig {
  double crop_scale_min = 0.2;
  double crop_scale_max = 1.0;
  double crop_ratio_min = 3.0 / 4.0;
  double crop_ratio_max = 4.0 / 3.0;
  double flip_prob = 0.5;
  double jitter_prob = 0.8;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
  double grayscale_prob = 0.2;
  double blur_prob_a = 0.5;
  double blur_prob_b = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  /// Side of the square output; 0 keeps the input height.
  std::size_t output_size = 0;

  /// Throws InvalidArgument for probabilities outside [0,1] or scales outside (0,1].
  void validate() const;
  /// Every random operation disabled and crops fixed to the full image.
  static AugmentationConfig identity(std::size_t output_size = 0);
};

enum class ViewSlot { A, B };

Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w);
Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w);
Image center_crop(const Image& img, std::size_t h, std::size_t w);
Image hflip(const Image& img);
Image to_grayscale(const Image& img);
/// Separable Gaussian, kernel radius ceil(3 sigma) capped below the image side,
/// half-sample symmetric padding (so the image mean is preserved).
Image gaussian_blur(const Image& img, double sigma);
Image adjust_brightness(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);
/// Rotates hue by `shift` of a full turn via HSV.
Image adjust_hue(const Image& img, double shift);
Image random_resized_crop(const Image& img, const AugmentationConfig& config, std::size_t out,
                          Rng& rng);

/// One augmented view from the full chain.
Image augment(const Image& img, const AugmentationConfig& config, ViewSlot slot, Rng& rng);

/// Two independently sampled chains over the same image, each flattened to 1 x (C*H*W).
std::pair<Matrix, Matrix> two_views(const ImageRecord& record, const AugmentationConfig& config,
                                    Rng& rng);

/// Linear-evaluation transform. Train: random resized crop + flip (needs rng).
/// Test: resize the shorter side to the output size then center crop; deterministic.
Matrix eval_transform(const ImageRecord& record, bool train_phase, const AugmentationConfig& config,
                      Rng* rng = nullptr);

}  // namespace sigclr
