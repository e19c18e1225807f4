#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace randlab {

// Dense row-major tensor of 64-bit reals. Everything in this project is
// rank 1 or 2; scalars are stored as 1x1.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int rows, int cols) : shape{rows, cols}, data(static_cast<size_t>(rows) * cols, 0.0) {}

  static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
  static Tensor identity(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }
  size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }
  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols(); }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  bool all_finite() const;
  std::string shape_str() const;
};

// Structured error for numeric modules; carries the offending op context.
struct TensorError : std::runtime_error {
  explicit TensorError(const std::string& what) : std::runtime_error(what) {}
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace randlab
