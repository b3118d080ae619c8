#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mihash/rng.hpp"

using namespace mihash;

TEST_CASE("equal seeds produce equal streams") {
  Rng a(12345);
  Rng b(12345);
  for (int i = 0; i < 10000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("different seeds diverge") {
  Rng a(1);
  Rng b(2);
  bool differs = false;
  for (int i = 0; i < 16 && !differs; ++i) {
    differs = a.next_u64() != b.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("uniform stays inside its interval") {
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
}

TEST_CASE("below covers its range without escapes") {
  Rng rng(10);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.below(7);
    REQUIRE(v < 7);
    ++seen[v];
  }
  for (int count : seen) {
    CHECK(count > 700);  // crude uniformity, expectation 1000
  }
}

TEST_CASE("normal draws have plausible moments") {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("fork gives reproducible independent streams") {
  const Rng base(42);
  Rng f1 = base.fork(3);
  Rng f2 = base.fork(3);
  Rng f3 = base.fork(4);
  CHECK(f1.next_u64() == f2.next_u64());
  CHECK(f1.next_u64() != f3.next_u64());
}

TEST_CASE("shuffle is a permutation and seed-stable") {
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  Rng a(5);
  Rng b(5);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}
