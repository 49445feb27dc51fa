// SPDX-License-Identifier: Apache-2.0
//
// Self-check suites behind `sigclr check`: gradients against central finite
// differences, chunked loss against the monolithic loss, mask structure, and
// closed-form loss values.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sigclr/matrix.hpp"

namespace sigclr {

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckReport {
  std::string kind;
  std::vector<CheckLine> lines;
  bool passed() const;
};

/// max |analytic - numeric| / max(max |numeric|, 1e-12): error relative to the
/// largest gradient entry of the tensor.
double relative_error(const Matrix& analytic, const Matrix& numeric);
double relative_error(double analytic, double numeric);

/// kind is one of grad, chunk, masks, loss-values. Throws InvalidArgument otherwise.
CheckReport run_check(std::string_view kind);
std::vector<std::string> check_kinds();

}  // namespace sigclr
