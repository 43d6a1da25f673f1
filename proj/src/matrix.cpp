#include "diffpool/matrix.hpp"

#include <cmath>
#include <string>

#include "diffpool/errors.hpp"

namespace diffpool {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " != " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t n = 0; n < indices.size(); ++n) {
    if (indices[n] >= rows_) throw IndexError("row index out of range");
    auto src = row(indices[n]);
    std::copy(src.begin(), src.end(), out.row(n).begin());
  }
  return out;
}

Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b) {
  if (x.cols() != w.rows() || w.cols() != b.size()) {
    throw DimensionError("affine_forward: x is " + std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()) + ", W is " + std::to_string(w.rows()) + "x" +
                         std::to_string(w.cols()) + ", b has " + std::to_string(b.size()));
  }
  Matrix out(x.rows(), w.cols());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    auto o = out.row(n);
    std::copy(b.begin(), b.end(), o.begin());
    for (std::size_t i = 0; i < x.cols(); ++i) {
      const double xi = x(n, i);
      if (xi == 0.0) continue;
      auto wr = w.row(i);
      for (std::size_t j = 0; j < w.cols(); ++j) o[j] += xi * wr[j];
    }
  }
  return out;
}

AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& grad_out) {
  if (grad_out.rows() != x.rows() || grad_out.cols() != w.cols() || x.cols() != w.rows()) {
    throw DimensionError("affine_backward: shape mismatch");
  }
  AffineGrads g{Matrix(x.rows(), x.cols()), Matrix(w.rows(), w.cols()), Vector(w.cols(), 0.0)};
  for (std::size_t n = 0; n < x.rows(); ++n) {
    auto go = grad_out.row(n);
    for (std::size_t j = 0; j < w.cols(); ++j) g.grad_b[j] += go[j];
    for (std::size_t i = 0; i < x.cols(); ++i) {
      auto wr = w.row(i);
      auto gw = g.grad_w.row(i);
      const double xi = x(n, i);
      double acc = 0.0;
      for (std::size_t j = 0; j < w.cols(); ++j) {
        acc += wr[j] * go[j];
        gw[j] += xi * go[j];
      }
      g.grad_x(n, i) = acc;
    }
  }
  return g;
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace diffpool
