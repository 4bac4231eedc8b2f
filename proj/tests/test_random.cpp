#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "drcn/random.hpp"

using namespace drcn;

TEST_CASE("identical seeds give identical streams", "[random]") {
  Rng a(42), b(42);
  for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("substreams depend on name, not on parent draw position", "[random]") {
  Rng parent(123);
  Rng early = parent.substream("augment");
  for (int i = 0; i < 10; ++i) parent.next_u64();
  Rng late = parent.substream("augment");
  for (int i = 0; i < 16; ++i) CHECK(early.next_u64() == late.next_u64());

  Rng other = parent.substream("dropout");
  bool all_equal = true;
  Rng again = parent.substream("augment");
  for (int i = 0; i < 16; ++i) all_equal = all_equal && (other.next_u64() == again.next_u64());
  CHECK_FALSE(all_equal);
}

TEST_CASE("uniform stays in [0,1) and respects custom ranges", "[random]") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(rng.uniform(0.0, 0.0) == 0.0);
  CHECK(rng.uniform(1.0, 1.0) == 1.0);
  CHECK_THROWS_AS(rng.uniform(1.0, 0.0), ArgumentError);
}

TEST_CASE("normal draws obey the law of large numbers", "[random]") {
  Rng rng(2024);
  const int n = 100000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal(0.0, 1.0);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("zero stddev returns the mean exactly; negative stddev throws", "[random]") {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) CHECK(rng.normal(3.5, 0.0) == 3.5);
  CHECK_THROWS_AS(rng.normal(0.0, -1.0), ArgumentError);
}

TEST_CASE("rand_normal fills the requested shape deterministically", "[random]") {
  Rng a(77), b(77);
  Tensor t1 = rand_normal(a, {4, 5}, 0.0, 2.0);
  Tensor t2 = rand_normal(b, {4, 5}, 0.0, 2.0);
  CHECK(t1.same_shape(t2));
  CHECK(max_abs_diff(t1, t2) == 0.0);
}

TEST_CASE("uniform_int covers its inclusive range and nothing else", "[random]") {
  Rng rng(31);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    std::int64_t v = rng.uniform_int(-2, 2);
    CHECK(v >= -2);
    CHECK(v <= 2);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
  CHECK(rng.uniform_int(3, 3) == 3);
}

TEST_CASE("shuffle permutes deterministically", "[random]") {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> v2 = v1;
  Rng a(8), b(8);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::set<int> elems(v1.begin(), v1.end());
  CHECK(elems.size() == 8);
}
