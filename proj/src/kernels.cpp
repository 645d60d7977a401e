#include "erckit/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include "erckit/common.hpp"

namespace erc::kernels {

namespace {
Precision g_precision = Precision::f64;
int g_threads = 1;

// Every output element is an ascending-k dot product in a local accumulator,
// so the parallel and serial paths produce bit-identical results: `parallel`
// only changes which thread owns a row. AccT selects the accumulation
// precision (float under the f32 compute mode; storage stays 64-bit).

template <typename RowFn>
void run_rows(int m, bool parallel, RowFn fill_row) {
#ifdef _OPENMP
  if (parallel && g_threads > 1 && m > 1) {
#pragma omp parallel for schedule(static) num_threads(g_threads)
    for (int i = 0; i < m; ++i) fill_row(i);
    return;
  }
#else
  (void)parallel;
#endif
  for (int i = 0; i < m; ++i) fill_row(i);
}

inline void store(double* slot, double v, bool accumulate) {
  if (accumulate)
    *slot += v;
  else
    *slot = v;
}

template <typename AccT>
void nn_impl(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate, bool parallel) {
  int m = a.rows, k = a.cols, n = b.cols;
  if (b.rows != k) throw DataError("matmul_nn: inner dimension mismatch");
  if (c.rows != m || c.cols != n) throw DataError("matmul_nn: output shape mismatch");
  const double *ad = a.data.data(), *bd = b.data.data();
  double* cd = c.data.data();
  run_rows(m, parallel, [=](int i) {
    const double* arow = ad + size_t(i) * k;
    for (int j = 0; j < n; ++j) {
      AccT acc = 0;
      for (int kk = 0; kk < k; ++kk) acc += AccT(arow[kk]) * AccT(bd[size_t(kk) * n + j]);
      store(cd + size_t(i) * n + j, double(acc), accumulate);
    }
  });
}

template <typename AccT>
void nt_impl(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate, bool parallel) {
  int m = a.rows, k = a.cols, n = b.rows;
  if (b.cols != k) throw DataError("matmul_nt: inner dimension mismatch");
  if (c.rows != m || c.cols != n) throw DataError("matmul_nt: output shape mismatch");
  const double *ad = a.data.data(), *bd = b.data.data();
  double* cd = c.data.data();
  run_rows(m, parallel, [=](int i) {
    const double* arow = ad + size_t(i) * k;
    for (int j = 0; j < n; ++j) {
      const double* brow = bd + size_t(j) * k;
      AccT acc = 0;
      for (int kk = 0; kk < k; ++kk) acc += AccT(arow[kk]) * AccT(brow[kk]);
      store(cd + size_t(i) * n + j, double(acc), accumulate);
    }
  });
}

template <typename AccT>
void tn_impl(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate, bool parallel) {
  int m = a.cols, k = a.rows, n = b.cols;
  if (b.rows != k) throw DataError("matmul_tn: inner dimension mismatch");
  if (c.rows != m || c.cols != n) throw DataError("matmul_tn: output shape mismatch");
  const double *ad = a.data.data(), *bd = b.data.data();
  double* cd = c.data.data();
  run_rows(m, parallel, [=](int i) {
    for (int j = 0; j < n; ++j) {
      AccT acc = 0;
      for (int kk = 0; kk < k; ++kk)
        acc += AccT(ad[size_t(kk) * m + i]) * AccT(bd[size_t(kk) * n + j]);
      store(cd + size_t(i) * n + j, double(acc), accumulate);
    }
  });
}

template <void (*F32)(const Tensor&, const Tensor&, Tensor&, bool, bool),
          void (*F64)(const Tensor&, const Tensor&, Tensor&, bool, bool)>
void dispatch(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate, bool parallel) {
  if (g_precision == Precision::f32)
    F32(a, b, c, accumulate, parallel);
  else
    F64(a, b, c, accumulate, parallel);
}
}  // namespace

void set_compute_precision(Precision p) { g_precision = p; }
Precision compute_precision() { return g_precision; }

void set_threads(int n) { g_threads = n < 1 ? 1 : n; }
int threads() { return g_threads; }

void matmul_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  dispatch<nn_impl<float>, nn_impl<double>>(a, b, c, accumulate, true);
}
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  dispatch<nt_impl<float>, nt_impl<double>>(a, b, c, accumulate, true);
}
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  dispatch<tn_impl<float>, tn_impl<double>>(a, b, c, accumulate, true);
}

void matmul_nn_serial(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  dispatch<nn_impl<float>, nn_impl<double>>(a, b, c, accumulate, false);
}
void matmul_nt_serial(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  dispatch<nt_impl<float>, nt_impl<double>>(a, b, c, accumulate, false);
}
void matmul_tn_serial(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  dispatch<tn_impl<float>, tn_impl<double>>(a, b, c, accumulate, false);
}

}  // namespace erc::kernels
