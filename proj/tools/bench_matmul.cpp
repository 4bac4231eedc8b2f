// Quick single-thread throughput probe for the matmul kernel; used to size
// the desk-scale experiment configurations.
#include <array>
#include <chrono>
#include <cstdio>

#include "drcn/random.hpp"
#include "drcn/tensor.hpp"

using namespace drcn;

int main() {
  Rng rng(1);
  for (auto [n, k, p] : {std::array<std::size_t, 3>{256, 256, 256},
                         std::array<std::size_t, 3>{1024, 128, 512},
                         std::array<std::size_t, 3>{4608, 2500, 100},
                         std::array<std::size_t, 3>{2048, 3750, 150}}) {
    Tensor a = rand_normal(rng, {n, k}, 0, 1);
    Tensor b = rand_normal(rng, {k, p}, 0, 1);
    Tensor warm = matmul(a, b);
    auto t0 = std::chrono::steady_clock::now();
    int reps = 3;
    double sink = 0;
    for (int r = 0; r < reps; ++r) {
      Tensor c = matmul(a, b);
      sink += c[0];
    }
    auto t1 = std::chrono::steady_clock::now();
    double secs = std::chrono::duration<double>(t1 - t0).count() / reps;
    double gflops = 2.0 * n * k * p / secs / 1e9;
    std::printf("%4zu x %4zu x %4zu: %8.3f ms  %6.2f GFLOP/s  (sink %g)\n", n, k, p,
                secs * 1e3, gflops, sink + warm[0]);
  }
  return 0;
}
