#pragma once

#include <initializer_list>
#include <vector>

namespace erc {

// Dense row-major 2-D tensor of 64-bit floats. Row vectors are [1, n].
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(size_t(r) * c, 0.0) {}
  Tensor(int r, int c, std::vector<double> d);
  Tensor(std::initializer_list<std::initializer_list<double>> rows_init);

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, double v);
  static Tensor row_vector(std::vector<double> d);

  double& at(int r, int c) { return data[size_t(r) * cols + c]; }
  double at(int r, int c) const { return data[size_t(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v);
  void zero() { fill(0.0); }

  bool all_finite() const;
};

bool operator==(const Tensor& a, const Tensor& b);

}  // namespace erc
