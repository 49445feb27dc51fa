// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "sigclr/matrix.hpp"

namespace sigclr {

/// A named trainable tensor and its gradient buffer, owned elsewhere.
struct TensorRef {
  std::string name;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;
};

struct ConstTensorRef {
  std::string name;
  const Matrix* value = nullptr;
};

}  // namespace sigclr
