#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace ally {

/// Dense row-major matrix of doubles.
///
/// Vectors of samples are stored one sample per row, so a batch of N
/// D-dimensional inputs is an N x D matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

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
  const std::vector<double>& values() const noexcept { return data_; }

  bool all_finite() const noexcept;
  void fill(double v);

  Matrix select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& m);

/// a * b. Throws a shape error unless a.cols() == b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);

/// a * b^T.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// a^T * b.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// Stacks rows of b under a. Column counts must agree (or one side empty).
Matrix vstack(const Matrix& a, const Matrix& b);

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace ally
