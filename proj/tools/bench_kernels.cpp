// Benchmark of the OpenMP matmul kernels against the serial reference.
// Also rechecks that both paths produce bit-identical output, which is the
// property the autodiff tests rely on. Exits nonzero on any mismatch.

#include <chrono>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "erckit/kernels.hpp"
#include "erckit/common.hpp"
#include "erckit/tensor.hpp"

using erc::Rng;
using erc::Tensor;
namespace kernels = erc::kernels;

namespace {

Tensor random_tensor(long rows, long cols, Rng& rng) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--quick") quick = true;

  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 2) hw = 2;

  std::vector<long> sizes = quick ? std::vector<long>{32, 64, 128}
                                  : std::vector<long>{64, 128, 256, 512};
  int reps = quick ? 3 : 10;

  Rng rng(42);
  bool all_equal = true;

  std::cout << "matmul kernels, serial reference vs OpenMP (" << hw << " threads)\n\n";
  std::cout << std::left << std::setw(8) << "size" << std::right << std::setw(12)
            << "serial ms" << std::setw(12) << "omp ms" << std::setw(10) << "speedup"
            << std::setw(8) << "equal" << "\n";

  for (long n : sizes) {
    Tensor a = random_tensor(n, n, rng);
    Tensor b = random_tensor(n, n, rng);
    Tensor c_serial = Tensor::zeros(n, n);
    Tensor c_omp = Tensor::zeros(n, n);

    kernels::set_threads(1);
    double ms_serial =
        time_ms([&] { kernels::matmul_nn_serial(a, b, c_serial, false); }, reps);

    kernels::set_threads(hw);
    double ms_omp = time_ms([&] { kernels::matmul_nn(a, b, c_omp, false); }, reps);

    bool eq = bitwise_equal(c_serial, c_omp);

    // the transposed variants share the dispatch, check them at each size too
    Tensor d_serial = Tensor::zeros(n, n);
    Tensor d_omp = Tensor::zeros(n, n);
    kernels::set_threads(1);
    kernels::matmul_nt_serial(a, b, d_serial, false);
    kernels::set_threads(hw);
    kernels::matmul_nt(a, b, d_omp, false);
    eq = eq && bitwise_equal(d_serial, d_omp);

    Tensor e_serial = Tensor::zeros(n, n);
    Tensor e_omp = Tensor::zeros(n, n);
    kernels::set_threads(1);
    kernels::matmul_tn_serial(a, b, e_serial, false);
    kernels::set_threads(hw);
    kernels::matmul_tn(a, b, e_omp, false);
    eq = eq && bitwise_equal(e_serial, e_omp);

    all_equal = all_equal && eq;

    std::cout << std::left << std::setw(8) << n << std::right << std::fixed
              << std::setprecision(3) << std::setw(12) << ms_serial << std::setw(12)
              << ms_omp << std::setw(10) << std::setprecision(2) << (ms_serial / ms_omp)
              << std::setw(8) << (eq ? "yes" : "NO") << "\n";
  }

  kernels::set_threads(1);
  if (!all_equal) {
    std::cerr << "\nserial and OpenMP kernels disagree\n";
    return 1;
  }
  std::cout << "\nall kernel pairs bit-identical\n";
  return 0;
}
