#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace diffpool {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // Rows listed in `indices`, in that order.
  Matrix gather_rows(std::span<const std::size_t> indices) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out[n,j] = sum_i x[n,i] * w[i,j] + b[j]
Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b);

// Gradients of affine_forward given dL/dout.
struct AffineGrads {
  Matrix grad_x;
  Matrix grad_w;
  Vector grad_b;
};
AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& grad_out);

bool all_finite(std::span<const double> values);

}  // namespace diffpool
