#include "ally/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ally/error.hpp"

namespace ally {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows * cols, ErrorKind::shape,
          "matrix data length " + std::to_string(data_.size()) + " != " +
              std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, ErrorKind::shape, "ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < rows_, ErrorKind::input,
            "row index " + std::to_string(indices[i]) + " out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorKind::shape,
          "matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " * " +
              std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  Matrix c(n, m);
  // i-k-j order keeps the innermost loop a contiguous axpy.
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c.row(i).data();
    const double* arow = a.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorKind::shape, "matmul_nt: inner dimensions differ");
  return matmul(a, transpose(b));
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorKind::shape, "matmul_tn: inner dimensions differ");
  return matmul(transpose(a), b);
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  require(a.cols() == b.cols(), ErrorKind::shape, "vstack: column counts differ");
  std::vector<double> data(a.values());
  data.insert(data.end(), b.values().begin(), b.values().end());
  return Matrix(a.rows() + b.rows(), a.cols(), std::move(data));
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace ally
