// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sigclr/matrix.hpp"

namespace sigclr {

/// Planar (channel-major) image with values in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return pixels[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return pixels[(c * height + y) * width + x];
  }
  std::size_t size() const noexcept { return pixels.size(); }
  /// 1 x (C*H*W) row in planar order.
  Matrix flatten() const;
  friend bool operator==(const Image&, const Image&) = default;
};

struct ImageRecord {
  std::size_t label = 0;
  Image image;
};

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

/// Parses CIFAR-10 binary records: 1 label byte then 1024 R, 1024 G, 1024 B
/// bytes, row-major within each plane. Throws ParseError (with the offending
/// byte offset) on a partial trailing record or a label above 9.
std::vector<ImageRecord> parse_cifar10(std::span<const std::uint8_t> bytes);
std::vector<ImageRecord> read_cifar10(const std::filesystem::path& path);
/// Concatenates data_batch_1..5.bin (train) or reads test_batch.bin from `dir`.
std::vector<ImageRecord> read_cifar10_split(const std::filesystem::path& dir, bool train);

struct SynthSpec {
  std::size_t classes = 4;
  std::size_t per_class = 256;
  std::size_t channels = 3;
  std::size_t height = 8;
  std::size_t width = 8;
  /// Distance between any two class centroids, in units of noise_sigma.
  double separation = 8.0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
};

/// Gaussian clusters in pixel space, clipped to [0, 1]. Centroids depend only on
/// spec.seed; `split` selects an independent sample draw around the same
/// centroids (0 = train, 1 = held-out, ...). Records are class-interleaved.
/// Throws InvalidArgument for fewer than 2 classes, more classes than pixels,
/// or negative separation.
std::vector<ImageRecord> synth_clusters(const SynthSpec& spec, std::uint64_t split = 0);

/// Class centroids used by synth_clusters, one row per class.
Matrix synth_centroids(const SynthSpec& spec);

}  // namespace sigclr
