#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "dbcf/errors.hpp"

namespace dbcf {

/// Dense row-major 2-D array. Indexing is (row, col); width == cols,
/// height == rows everywhere in this library.
template <typename T>
class Array2D {
 public:
  Array2D() = default;

  Array2D(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
    if (rows <= 0 || cols <= 0)
      throw DimensionError("Array2D: dimensions must be positive, got " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    data_.assign(static_cast<std::size_t>(rows) * cols, fill);
  }

  Array2D(int rows, int cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows <= 0 || cols <= 0 ||
        data_.size() != static_cast<std::size_t>(rows) * cols)
      throw DimensionError("Array2D: data size does not match dimensions");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int height() const { return rows_; }
  int width() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool same_shape(const Array2D& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

/// Real-valued image or response plane.
using Plane = Array2D<double>;

/// 2-D DFT coefficients in standard ordering (bin (0,0) is DC).
using Spectrum2D = Array2D<std::complex<double>>;

/// Linear index of the largest element; ties break to the smallest index.
template <typename T>
inline std::size_t argmax(const Array2D<T>& a) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < a.size(); ++i)
    if (a[i] > a[best]) best = i;
  return best;
}

}  // namespace dbcf
