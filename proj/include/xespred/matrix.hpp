#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace xespred {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  void fill(double value);
  bool all_finite() const noexcept;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Row-major matrix of category ids.
struct IndexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> data;

  IndexMatrix() = default;
  IndexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  std::int32_t& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::int32_t operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const IndexMatrix&) const = default;
};

// out = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// out += a * b
void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out);
// out += a^T * b
void matmul_at_accumulate(const Matrix& a, const Matrix& b, Matrix& out);
// out += a * b^T
void matmul_bt_accumulate(const Matrix& a, const Matrix& b, Matrix& out);
// adds a 1 x cols bias row to every row
void add_row_bias(Matrix& m, const Matrix& bias);
// out(0, c) += sum over rows of m(r, c)
void sum_rows_accumulate(const Matrix& m, Matrix& out);
void add_inplace(Matrix& a, const Matrix& b);
void scale_inplace(Matrix& a, double factor);

}  // namespace xespred
