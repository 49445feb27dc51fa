// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint file layout (all integers little-endian):
//
//   "SGCL"                     4 bytes magic
//   version                    1 byte (currently 1)
//   tensor_count               u32
//   per tensor:
//     name_length              u32, then name_length bytes of UTF-8
//     rows, cols               u32, u32
//     values                   rows * cols IEEE-754 binary32, row-major
//
// Tensors are stored as 32-bit floats, so a write / read / write cycle is
// byte-identical and read values equal the float-rounded originals.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sigclr/matrix.hpp"
#include "sigclr/tensor_ref.hpp"

namespace sigclr {

inline constexpr std::uint8_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix value;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const ConstTensorRef> tensors);
/// Throws ParseError on bad magic, unknown version, or truncation.
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, std::span<const ConstTensorRef> tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

/// Copies tensors into matching names of `targets`. Throws ShapeError on a
/// shape mismatch and InvalidArgument if a target has no stored tensor.
void load_into(std::span<const TensorRef> targets, const std::vector<NamedTensor>& stored);

}  // namespace sigclr
