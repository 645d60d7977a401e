#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "erckit/common.hpp"
#include "erckit/kernels.hpp"

using erc::Rng;
using erc::Tensor;
namespace kernels = erc::kernels;

namespace {

Tensor random_tensor(int r, int c, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.data) v = rng.uniform(-2.0, 2.0);
  return t;
}

// Straight-line reference, no blocking, no dispatch.
Tensor naive_nn(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0;
      for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
  return c;
}

struct ThreadGuard {
  int saved;
  explicit ThreadGuard(int n) : saved(kernels::threads()) { kernels::set_threads(n); }
  ~ThreadGuard() { kernels::set_threads(saved); }
};

struct PrecisionGuard {
  kernels::Precision saved;
  explicit PrecisionGuard(kernels::Precision p) : saved(kernels::compute_precision()) {
    kernels::set_compute_precision(p);
  }
  ~PrecisionGuard() { kernels::set_compute_precision(saved); }
};

}  // namespace

TEST_CASE("nn layout matches naive reference") {
  Rng rng(41);
  Tensor a = random_tensor(7, 5, rng), b = random_tensor(5, 9, rng);
  Tensor c(7, 9);
  kernels::matmul_nn(a, b, c);
  Tensor ref = naive_nn(a, b);
  for (int i = 0; i < c.rows; ++i)
    for (int j = 0; j < c.cols; ++j) CHECK(c.at(i, j) == doctest::Approx(ref.at(i, j)).epsilon(1e-12));
}

TEST_CASE("nt layout equals nn against transposed operand") {
  Rng rng(42);
  Tensor a = random_tensor(4, 6, rng), bt = random_tensor(3, 6, rng);
  Tensor b(6, 3);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 6; ++k) b.at(k, i) = bt.at(i, k);
  Tensor c1(4, 3), c2(4, 3);
  kernels::matmul_nt(a, bt, c1);
  kernels::matmul_nn(a, b, c2);
  CHECK(c1 == c2);
}

TEST_CASE("tn layout equals nn against transposed operand") {
  Rng rng(43);
  Tensor at = random_tensor(6, 4, rng), b = random_tensor(6, 5, rng);
  Tensor a(4, 6);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 6; ++k) a.at(i, k) = at.at(k, i);
  Tensor c1(4, 5), c2(4, 5);
  kernels::matmul_tn(at, b, c1);
  kernels::matmul_nn(a, b, c2);
  CHECK(c1 == c2);
}

TEST_CASE("accumulate adds onto existing values") {
  Rng rng(44);
  Tensor a = random_tensor(3, 3, rng), b = random_tensor(3, 3, rng);
  Tensor c = Tensor::full(3, 3, 10.0);
  Tensor prod(3, 3);
  kernels::matmul_nn(a, b, prod);
  kernels::matmul_nn(a, b, c, true);
  for (int i = 0; i < 9; ++i) CHECK(c.data[size_t(i)] == 10.0 + prod.data[size_t(i)]);
}

TEST_CASE("shape mismatch is rejected") {
  Tensor a(2, 3), b(4, 5), c(2, 5);
  CHECK_THROWS_AS(kernels::matmul_nn(a, b, c), erc::DataError);
  Tensor c_bad(3, 3), b_ok(3, 5);
  CHECK_THROWS_AS(kernels::matmul_nn(a, b_ok, c_bad), erc::DataError);
}

TEST_CASE("parallel results are bit-identical to serial for every layout") {
  Rng rng(45);
  for (int trial = 0; trial < 4; ++trial) {
    int m = 1 + int(rng.uniform_int(40));
    int k = 1 + int(rng.uniform_int(40));
    int n = 1 + int(rng.uniform_int(40));
    Tensor a = random_tensor(m, k, rng), b = random_tensor(k, n, rng);
    Tensor bt = random_tensor(n, k, rng), at = random_tensor(k, m, rng);
    for (int threads : {2, 3, 8}) {
      ThreadGuard tg(threads);
      Tensor cp(m, n), cs(m, n);
      kernels::matmul_nn(a, b, cp);
      kernels::matmul_nn_serial(a, b, cs);
      CHECK(cp == cs);
      kernels::matmul_nt(a, bt, cp);
      kernels::matmul_nt_serial(a, bt, cs);
      CHECK(cp == cs);
      kernels::matmul_tn(at, b, cp);
      kernels::matmul_tn_serial(at, b, cs);
      CHECK(cp == cs);
    }
  }
}

TEST_CASE("f32 compute mode rounds through float but stays close") {
  Rng rng(46);
  Tensor a = random_tensor(8, 8, rng), b = random_tensor(8, 8, rng);
  Tensor c64(8, 8), c32(8, 8);
  kernels::matmul_nn(a, b, c64);
  {
    PrecisionGuard pg(kernels::Precision::f32);
    CHECK(kernels::compute_precision() == kernels::Precision::f32);
    kernels::matmul_nn(a, b, c32);
  }
  CHECK(kernels::compute_precision() == kernels::Precision::f64);
  bool any_diff = false;
  for (int i = 0; i < 64; ++i) {
    CHECK(std::abs(c64.data[size_t(i)] - c32.data[size_t(i)]) < 1e-4);
    if (c64.data[size_t(i)] != c32.data[size_t(i)]) any_diff = true;
  }
  CHECK(any_diff);  // float accumulation really happened
}

TEST_CASE("f32 mode is also thread-count independent") {
  PrecisionGuard pg(kernels::Precision::f32);
  Rng rng(47);
  Tensor a = random_tensor(13, 17, rng), b = random_tensor(17, 11, rng);
  Tensor cs(13, 11);
  kernels::matmul_nn_serial(a, b, cs);
  for (int threads : {2, 5}) {
    ThreadGuard tg(threads);
    Tensor cp(13, 11);
    kernels::matmul_nn(a, b, cp);
    CHECK(cp == cs);
  }
}
