// SPDX-License-Identifier: Apache-2.0
#include "sigclr/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>
#include <tuple>

#include "sigclr/errors.hpp"
#include "sigclr/rng.hpp"

namespace sigclr {

Matrix Image::flatten() const { return Matrix(1, pixels.size(), pixels); }

std::vector<ImageRecord> parse_cifar10(std::span<const std::uint8_t> bytes) {
  const std::size_t whole = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw ParseError("truncated CIFAR-10 record: " + std::to_string(bytes.size()) +
                         " bytes is not a multiple of 3073",
                     whole * kCifarRecordBytes);
  }
  std::vector<ImageRecord> out;
  out.reserve(whole);
  for (std::size_t r = 0; r < whole; ++r) {
    const std::size_t offset = r * kCifarRecordBytes;
    const std::uint8_t label = bytes[offset];
    if (label > 9) {
      throw ParseError("CIFAR-10 label " + std::to_string(label) + " out of range 0..9", offset);
    }
    ImageRecord rec{label, Image(3, kCifarSide, kCifarSide)};
    for (std::size_t i = 0; i < rec.image.size(); ++i)
      rec.image.pixels[i] = static_cast<double>(bytes[offset + 1 + i]) / 255.0;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<ImageRecord> read_cifar10(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open CIFAR-10 file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), {});
  return parse_cifar10(bytes);
}

std::vector<ImageRecord> read_cifar10_split(const std::filesystem::path& dir, bool train) {
  if (!train) return read_cifar10(dir / "test_batch.bin");
  std::vector<ImageRecord> out;
  for (int i = 1; i <= 5; ++i) {
    auto part = read_cifar10(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

namespace {

void validate(const SynthSpec& spec) {
  const std::size_t dim = spec.channels * spec.height * spec.width;
  if (spec.classes < 2) throw InvalidArgument("synth_clusters: need at least 2 classes");
  if (dim < spec.classes) throw InvalidArgument("synth_clusters: more classes than pixel dimensions");
  if (!(spec.separation >= 0.0)) throw InvalidArgument("synth_clusters: separation must be >= 0");
  if (!(spec.noise_sigma >= 0.0)) throw InvalidArgument("synth_clusters: noise_sigma must be >= 0");
}

// Orthonormal separable DCT-II atoms over (channel, row, col), ordered by
// (odd horizontal frequency, total frequency, channel).
Matrix smooth_atoms(const SynthSpec& spec) {
  struct Key {
    std::size_t odd_u, total, c, v, u;
  };
  std::vector<Key> keys;
  for (std::size_t c = 0; c < spec.channels; ++c)
    for (std::size_t v = 0; v < spec.height; ++v)
      for (std::size_t u = 0; u < spec.width; ++u) keys.push_back({u % 2, u + v, c, v, u});
  std::stable_sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    return std::tie(a.odd_u, a.total, a.c, a.v) < std::tie(b.odd_u, b.total, b.c, b.v);
  });
  auto basis = [](std::size_t k, std::size_t i, std::size_t n) {
    const double alpha = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    return alpha * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
  };
  const std::size_t plane = spec.height * spec.width;
  Matrix atoms(keys.size(), spec.channels * plane);
  for (std::size_t a = 0; a < keys.size(); ++a) {
    const Key& k = keys[a];
    for (std::size_t y = 0; y < spec.height; ++y)
      for (std::size_t x = 0; x < spec.width; ++x)
        atoms(a, k.c * plane + y * spec.width + x) = basis(k.v, y, spec.height) * basis(k.u, x, spec.width);
  }
  return atoms;
}

}  // namespace

Matrix synth_centroids(const SynthSpec& spec) {
  validate(spec);
  const std::size_t dim = spec.channels * spec.height * spec.width;
  // Directions live in the span of the lowest-frequency orthonormal cosine
  // atoms, horizontally symmetric ones first, so class identity survives
  // crops, resizes and flips. Gram-Schmidt on Gaussian coefficients keeps
  // them orthonormal, and every pair of centroids is separation * sigma apart.
  const auto atoms = smooth_atoms(spec);
  const std::size_t pool = std::min(dim, std::max(spec.classes, 2 * spec.channels));
  Rng rng(derive_seed(spec.seed, 0xC3E7));
  Matrix coeffs(spec.classes, pool);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    auto row = coeffs.row(k);
    for (double& v : row) v = rng.normal();
    for (std::size_t p = 0; p < k; ++p) {
      const double proj = dot(row, coeffs.row(p));
      auto prev = coeffs.row(p);
      for (std::size_t c = 0; c < pool; ++c) row[c] -= proj * prev[c];
    }
    const double norm = l2_norm(row);
    for (double& v : row) v /= norm;
  }
  const double radius = spec.separation * spec.noise_sigma / std::sqrt(2.0);
  Matrix centroids(spec.classes, dim, 0.5);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    for (std::size_t a = 0; a < pool; ++a) {
      const double w = radius * coeffs(k, a);
      const auto atom = atoms.row(a);
      for (std::size_t p = 0; p < dim; ++p) centroids(k, p) += w * atom[p];
    }
  }
  return centroids;
}

std::vector<ImageRecord> synth_clusters(const SynthSpec& spec, std::uint64_t split) {
  const Matrix centroids = synth_centroids(spec);
  Rng rng(derive_seed(spec.seed, 0x5A3F, split + 1));
  std::vector<ImageRecord> out;
  out.reserve(spec.classes * spec.per_class);
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    for (std::size_t k = 0; k < spec.classes; ++k) {
      ImageRecord rec{k, Image(spec.channels, spec.height, spec.width)};
      const auto c = centroids.row(k);
      for (std::size_t p = 0; p < rec.image.size(); ++p)
        rec.image.pixels[p] = std::clamp(c[p] + spec.noise_sigma * rng.normal(), 0.0, 1.0);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace sigclr
