#include "erckit/tensor.hpp"

#include <cmath>

#include "erckit/common.hpp"

namespace erc {

Tensor::Tensor(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != size_t(r) * c) throw DataError("tensor data size does not match shape");
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows_init) {
  rows = int(rows_init.size());
  cols = rows ? int(rows_init.begin()->size()) : 0;
  data.reserve(size_t(rows) * cols);
  for (const auto& r : rows_init) {
    if (int(r.size()) != cols) throw DataError("ragged tensor initializer");
    data.insert(data.end(), r.begin(), r.end());
  }
}

Tensor Tensor::full(int r, int c, double v) {
  Tensor t(r, c);
  t.fill(v);
  return t;
}

Tensor Tensor::row_vector(std::vector<double> d) {
  int n = int(d.size());
  return Tensor(1, n, std::move(d));
}

void Tensor::fill(double v) {
  for (double& x : data) x = v;
}

bool Tensor::all_finite() const {
  for (double x : data)
    if (!std::isfinite(x)) return false;
  return true;
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

}  // namespace erc
