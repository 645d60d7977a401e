#pragma once

#include "erckit/tensor.hpp"

namespace erc::kernels {

// Dense matmul kernels. Each output element is a dot product accumulated in
// ascending-k order inside a local accumulator, in the serial and the OpenMP
// versions alike, so results are bit-identical regardless of thread count.
// The *_serial variants are the reference implementations kept for testing
// and benchmarking; the unsuffixed entry points dispatch to OpenMP when more
// than one thread is configured.

enum class Precision { f64, f32 };

void set_compute_precision(Precision p);
Precision compute_precision();

void set_threads(int n);  // 1 = serial path
int threads();

// C = A[m,k] * B[k,n] (accumulate: C += ...)
void matmul_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
// C = A[m,k] * B[n,k]^T
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
// C = A[k,m]^T * B[k,n]
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);

void matmul_nn_serial(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
void matmul_nt_serial(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
void matmul_tn_serial(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);

}  // namespace erc::kernels
