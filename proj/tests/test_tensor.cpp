#include <array>
#include <catch2/catch_amalgamated.hpp>

#include "drcn/random.hpp"
#include "drcn/tensor.hpp"

using namespace drcn;

namespace {

// Reference matmul: the plainest possible triple loop, kept independent of the
// library kernel so the two can disagree.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), k = a.dim(1), p = b.dim(1);
  Tensor c({n, p});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0;
      for (std::size_t t = 0; t < k; ++t) acc += a(i, t) * b(t, j);
      c(i, j) = acc;
    }
  return c;
}

Tensor random_matrix(Rng& rng, std::size_t n, std::size_t m) {
  Tensor t({n, m});
  for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("matmul matches the naive triple-loop oracle", "[tensor]") {
  Rng rng(7);
  for (auto [n, k, p] : {std::array<std::size_t, 3>{16, 16, 16},
                         std::array<std::size_t, 3>{7, 5, 9},
                         std::array<std::size_t, 3>{1, 31, 4},
                         std::array<std::size_t, 3>{4, 1, 4}}) {
    Tensor a = random_matrix(rng, n, k);
    Tensor b = random_matrix(rng, k, p);
    CHECK(max_abs_diff(matmul(a, b), matmul_oracle(a, b)) < 1e-12);
  }
}

TEST_CASE("matmul is associative to float tolerance", "[tensor]") {
  Rng rng(11);
  Tensor a = random_matrix(rng, 16, 16);
  Tensor b = random_matrix(rng, 16, 16);
  Tensor c = random_matrix(rng, 16, 16);
  CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-9);
}

TEST_CASE("matmul rejects mismatched shapes", "[tensor]") {
  Tensor a({2, 3});
  Tensor b({4, 2});
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
  Tensor v({6});
  CHECK_THROWS_AS(matmul(a, v), DimensionError);
}

TEST_CASE("row-major layout: multi-index agrees with flat order", "[tensor]") {
  Tensor t({2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  std::size_t flat = 0;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t c = 0; c < 4; ++c) CHECK(t(a, b, c) == static_cast<double>(flat++));
}

TEST_CASE("reshape preserves flat order and checks volume", "[tensor]") {
  Tensor t({2, 6});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  Tensor r = t.reshaped({3, 2, 2});
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == t[i]);
  CHECK_THROWS_AS(t.reshaped({5, 2}), DimensionError);
}

TEST_CASE("construction rejects zero axes and wrong data lengths", "[tensor]") {
  CHECK_THROWS_AS(Tensor({3, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST_CASE("transpose2d is its own inverse", "[tensor]") {
  Rng rng(3);
  Tensor a = random_matrix(rng, 5, 8);
  CHECK(max_abs_diff(transpose2d(transpose2d(a)), a) == 0.0);
  CHECK(transpose2d(a).dim(0) == 8);
}

TEST_CASE("add is elementwise and shape-checked", "[tensor]") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 2}, {10, 20, 30, 40});
  Tensor c = add(a, b);
  CHECK(c(1, 1) == 44.0);
  CHECK_THROWS_AS(add(a, Tensor({4})), DimensionError);
}

TEST_CASE("indexing with wrong rank throws", "[tensor]") {
  Tensor t({2, 2});
  CHECK_THROWS_AS(t(1, 1, 1), DimensionError);
}
