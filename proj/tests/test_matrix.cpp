#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mihash/matrix.hpp"
#include "mihash/rng.hpp"

using namespace mihash;

namespace {

// Independent triple-loop product used as the matmul oracle.
Matrix matmul_naive(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) {
        s += a(i, k) * b(k, j);
      }
      out(i, j) = s;
    }
  }
  return out;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("matmul identity leaves the operand unchanged") {
  Rng rng(7);
  const Matrix m = random_matrix(rng, 2, 5);
  const Matrix out = matmul(Matrix::identity(2), m);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    CHECK(out.data[i] == doctest::Approx(m.data[i]).epsilon(1e-15));
  }
}

TEST_CASE("matmul hand-checked 2x2 times column") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{1}, {1}});
  const Matrix out = matmul(a, b);
  CHECK(out.rows == 2);
  CHECK(out.cols == 1);
  CHECK(out(0, 0) == 3.0);
  CHECK(out(1, 0) == 7.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(11);
  const Matrix a = random_matrix(rng, 5, 7);
  const Matrix b = random_matrix(rng, 7, 3);
  const Matrix got = matmul(a, b);
  const Matrix want = matmul_naive(a, b);
  for (std::size_t i = 0; i < want.data.size(); ++i) {
    CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("matmul agrees with the oracle across random shapes") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(16);
    const std::size_t k = 1 + rng.below(16);
    const std::size_t n = 1 + rng.below(16);
    const Matrix a = random_matrix(rng, m, k);
    const Matrix b = random_matrix(rng, k, n);
    const Matrix got = matmul(a, b);
    const Matrix want = matmul_naive(a, b);
    for (std::size_t i = 0; i < want.data.size(); ++i) {
      const double denom = std::max(std::abs(want.data[i]), 1.0);
      CHECK(std::abs(got.data[i] - want.data[i]) / denom <= 1e-12);
    }
  }
}

TEST_CASE("matmul rejects mismatched shapes with a shape report") {
  const Matrix a(2, 3);
  const Matrix b(4, 2);
  CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: shape mismatch 2x3 * 4x2",
                       std::invalid_argument);
}

TEST_CASE("map_elementwise applies tanh and sgn") {
  const Matrix zeros(3, 2, 0.0);
  const Matrix t = map_elementwise(zeros, [](double v) { return std::tanh(v); });
  for (double v : t.data) CHECK(v == 0.0);

  const Matrix m = Matrix::from_rows({{0.3, -0.7}});
  const Matrix s = map_elementwise(m, sgn);
  CHECK(s(0, 0) == 1.0);
  CHECK(s(0, 1) == -1.0);
}

TEST_CASE("sgn of zero is +1") {
  CHECK(sgn(0.0) == 1.0);
  CHECK(sgn(-0.0) == 1.0);
}

TEST_CASE("reduce max over rows") {
  const Matrix m = Matrix::from_rows({{1, 3}, {2, 0}});
  const Matrix out = reduce(m, Axis::Rows, ReduceOp::Max);
  CHECK(out.rows == 1);
  CHECK(out.cols == 2);
  CHECK(out(0, 0) == 2.0);
  CHECK(out(0, 1) == 3.0);
}

TEST_CASE("reduce mean over rows") {
  const Matrix m = Matrix::from_rows({{1, 3}, {2, 0}});
  const Matrix out = reduce(m, Axis::Rows, ReduceOp::Mean);
  CHECK(out(0, 0) == 1.5);
  CHECK(out(0, 1) == 1.5);
}

TEST_CASE("median of odd-length sample") {
  const Matrix m = Matrix::from_rows({{1, 2, 3, 4, 100}});
  CHECK(reduce_all(m, ReduceOp::Median) == 3.0);
  CHECK(median({1, 2, 3, 4}) == 2.5);
}

TEST_CASE("reduce rejects empty input") {
  const Matrix empty;
  CHECK_THROWS_AS(reduce(empty, Axis::All, ReduceOp::Sum), std::invalid_argument);
  CHECK_THROWS_AS(reduce_max_argmax(empty, Axis::Rows), std::invalid_argument);
}

TEST_CASE("reduce max argmax points at its value") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix m = random_matrix(rng, 1 + rng.below(8), 1 + rng.below(8));
    const MaxReduce over_rows = reduce_max_argmax(m, Axis::Rows);
    for (std::size_t j = 0; j < m.cols; ++j) {
      CHECK(over_rows.values(0, j) == m(over_rows.argmax[j], j));
      for (std::size_t i = 0; i < m.rows; ++i) {
        CHECK(over_rows.values(0, j) >= m(i, j));
      }
    }
    const MaxReduce over_cols = reduce_max_argmax(m, Axis::Cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
      CHECK(over_cols.values(i, 0) == m(i, over_cols.argmax[i]));
    }
  }
}

TEST_CASE("public operations keep finite inputs finite") {
  Rng rng(31);
  const Matrix a = random_matrix(rng, 6, 6);
  const Matrix b = random_matrix(rng, 6, 6);
  CHECK(all_finite(matmul(a, b)));
  CHECK(all_finite(map_elementwise(a, [](double v) { return std::tanh(v); })));
  CHECK(all_finite(reduce(a, Axis::Rows, ReduceOp::Median)));
}
