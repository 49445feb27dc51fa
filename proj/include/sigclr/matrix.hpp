// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrix and the scalar / linear-algebra kernels the rest of
// the library is built from. Every reduction runs in ascending index order so
// results are bit-reproducible.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace sigclr {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double v);
  /// Copy of rows [begin, begin + count).
  Matrix slice_rows(std::size_t begin, std::size_t count) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Linear algebra. All throw ShapeError on mismatched operands.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a · bᵀ without materializing the transpose.
Matrix matmul_bt(const Matrix& a, const Matrix& b);
/// aᵀ · b without materializing the transpose.
Matrix matmul_at(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

/// Each row divided by max(‖row‖₂, eps). Zero rows stay zero.
Matrix l2_normalize_rows(const Matrix& m, double eps = 1e-12);
std::vector<double> row_norms(const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
double max_abs(std::span<const double> v);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(std::span<const double> v);

// Stable scalar nonlinearities.
double sigmoid(double x);
/// log σ(x) = min(x, 0) − log1p(e^{−|x|}).
double log_sigmoid(double x);
/// Max-shifted log Σ exp(v_i). Throws ShapeError on empty input.
double logsumexp(std::span<const double> v);

/// Central-difference gradient of a scalar function, one entry at a time.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& at,
                        double h = 1e-5);

}  // namespace sigclr
