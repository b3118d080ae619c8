#ifndef MIHASH_MATRIX_HPP
#define MIHASH_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

namespace mihash {

// Dense row-major matrix of doubles. This is the only numeric container in
// the project; embeddings, hash activations and weight blocks are all plain
// 2-D arrays at desk scale.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, length rows*cols

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  std::vector<double> row_vec(std::size_t i) const;
  std::string shape() const;  // "RxC", used in error reports

  bool operator==(const Matrix& other) const = default;
};

// Standard product; throws std::invalid_argument with a shape report when
// a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

template <class F>
Matrix map_elementwise(const Matrix& m, F&& f) {
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    out.data[i] = f(m.data[i]);
  }
  return out;
}

// Sign with the tie broken upward: sgn(0) = +1. Hash codes stay
// deterministic under this rule.
inline double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }

bool all_finite(const Matrix& m);

enum class Axis { Rows, Cols, All };
enum class ReduceOp { Sum, Max, Mean, Median };

// Reduction along an axis. Axis::Rows collapses the row dimension (result is
// 1 x cols), Axis::Cols collapses columns (rows x 1), Axis::All yields a
// 1 x 1 matrix. Rejects empty input.
Matrix reduce(const Matrix& m, Axis axis, ReduceOp op);
double reduce_all(const Matrix& m, ReduceOp op);

struct MaxReduce {
  Matrix values;
  std::vector<std::size_t> argmax;  // index along the collapsed axis
};

// Max reduction that also reports where each maximum came from. Ties go to
// the lowest index.
MaxReduce reduce_max_argmax(const Matrix& m, Axis axis);

// Median of an arbitrary sample; even lengths average the two middle values.
double median(std::vector<double> values);

}  // namespace mihash

#endif  // MIHASH_MATRIX_HPP
