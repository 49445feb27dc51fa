// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sigclr/data.hpp"
#include "sigclr/errors.hpp"

using namespace sigclr;

namespace {

std::vector<std::uint8_t> record(std::uint8_t label, std::uint8_t fill) {
  std::vector<std::uint8_t> r(kCifarRecordBytes, fill);
  r[0] = label;
  return r;
}

std::size_t parse_error_offset(std::span<const std::uint8_t> bytes) {
  try {
    parse_cifar10(bytes);
  } catch (const ParseError& e) {
    return e.offset();
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace

TEST_CASE("crafted CIFAR-10 record") {
  auto bytes = record(7, 0);
  bytes[1] = 255;                          // R plane, row 0, col 0
  bytes[1 + 1024 + 32 * 2 + 5] = 51;       // G plane, row 2, col 5
  bytes[1 + 2048 + 32 * 31 + 31] = 128;    // B plane, last pixel
  const auto recs = parse_cifar10(bytes);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].label == 7);
  const Image& img = recs[0].image;
  CHECK(img.channels == 3);
  CHECK(img.height == 32);
  CHECK(img.width == 32);
  CHECK(img.at(0, 0, 0) == 1.0);
  CHECK(img.at(1, 2, 5) == 51.0 / 255.0);
  CHECK(img.at(2, 31, 31) == 128.0 / 255.0);
  CHECK(img.at(0, 0, 1) == 0.0);
}

TEST_CASE("multiple records keep order") {
  auto bytes = record(3, 10);
  const auto second = record(9, 20);
  bytes.insert(bytes.end(), second.begin(), second.end());
  const auto recs = parse_cifar10(bytes);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].label == 3);
  CHECK(recs[1].label == 9);
  CHECK(recs[1].image.at(2, 4, 4) == 20.0 / 255.0);
}

TEST_CASE("truncated files and bad labels") {
  auto bytes = record(1, 0);
  const auto bad = record(12, 0);
  std::vector<std::uint8_t> two = bytes;
  two.insert(two.end(), bad.begin(), bad.end());
  CHECK_THROWS_AS(parse_cifar10(two), ParseError);
  CHECK(parse_error_offset(two) == kCifarRecordBytes);

  std::vector<std::uint8_t> truncated = bytes;
  truncated.insert(truncated.end(), bytes.begin(), bytes.begin() + 100);
  CHECK_THROWS_AS(parse_cifar10(truncated), ParseError);
  CHECK(parse_error_offset(truncated) == kCifarRecordBytes);
  bytes.pop_back();
  CHECK(parse_error_offset(bytes) == 0);
  CHECK(parse_cifar10({}).empty());
}

TEST_CASE("reading from disk") {
  const std::filesystem::path dir = std::filesystem::path(SIGCLR_TEST_TMP) / "cifar";
  std::filesystem::create_directories(dir);
  for (int i = 1; i <= 5; ++i) {
    const auto r = record(static_cast<std::uint8_t>(i), 0);
    std::ofstream(dir / ("data_batch_" + std::to_string(i) + ".bin"), std::ios::binary)
        .write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(r.size()));
  }
  const auto t = record(0, 255);
  std::ofstream(dir / "test_batch.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size()));
  const auto train = read_cifar10_split(dir, true);
  REQUIRE(train.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(train[i].label == i + 1);
  const auto test = read_cifar10_split(dir, false);
  REQUIRE(test.size() == 1);
  CHECK(test[0].image.at(1, 1, 1) == 1.0);
  CHECK_THROWS(read_cifar10(dir / "absent.bin"));
}

TEST_CASE("synthetic clusters are seeded and labeled") {
  SynthSpec spec;
  spec.per_class = 16;
  spec.seed = 5;
  const auto a = synth_clusters(spec), b = synth_clusters(spec);
  REQUIRE(a.size() == 64);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == i % 4);
    CHECK(a[i].image == b[i].image);
    for (double p : a[i].image.pixels) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
  CHECK_FALSE(synth_clusters(spec, 1)[0].image == a[0].image);
  spec.seed = 6;
  CHECK_FALSE(synth_clusters(spec)[0].image == a[0].image);
}

TEST_CASE("centroids are equidistant at separation times sigma") {
  SynthSpec spec;
  spec.classes = 5;
  spec.separation = 6.0;
  const Matrix c = synth_centroids(spec);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) {
      double d2 = 0.0;
      for (std::size_t p = 0; p < c.cols(); ++p) d2 += (c(i, p) - c(j, p)) * (c(i, p) - c(j, p));
      CHECK(std::sqrt(d2) == doctest::Approx(0.6).epsilon(1e-12));
    }
  spec.separation = 0.0;
  const Matrix z = synth_centroids(spec);
  for (std::size_t i = 1; i < 5; ++i) CHECK(max_abs_diff(z.slice_rows(i, 1), z.slice_rows(0, 1)) == 0.0);
}

TEST_CASE("nearest centroid separates clusters at six sigma") {
  SynthSpec spec;
  spec.separation = 6.0;
  spec.per_class = 500;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    spec.seed = seed;
    const Matrix c = synth_centroids(spec);
    const auto recs = synth_clusters(spec, 1);
    std::size_t correct = 0;
    for (const auto& r : recs) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t k = 0; k < spec.classes; ++k) {
        double d = 0.0;
        for (std::size_t p = 0; p < c.cols(); ++p) d += (r.image.pixels[p] - c(k, p)) * (r.image.pixels[p] - c(k, p));
        if (d < best_d) best_d = d, best = k;
      }
      correct += best == r.label;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(recs.size()) >= 0.99);
  }
}

TEST_CASE("invalid synthetic specs") {
  SynthSpec spec;
  spec.classes = 1;
  CHECK_THROWS_AS(synth_clusters(spec), InvalidArgument);
  spec.classes = 4;
  spec.channels = spec.height = spec.width = 1;
  CHECK_THROWS_AS(synth_clusters(spec), InvalidArgument);
}
