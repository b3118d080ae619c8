#include "mihash/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mihash {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> init) {
  Matrix m;
  m.rows = init.size();
  m.cols = init.size() ? init.begin()->size() : 0;
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : init) {
    if (r.size() != m.cols) {
      throw std::invalid_argument("Matrix::from_rows: ragged rows");
    }
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
  }
  return m;
}

std::vector<double> Matrix::row_vec(std::size_t i) const {
  return std::vector<double>(row(i), row(i) + cols);
}

std::string Matrix::shape() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: shape mismatch " + a.shape() + " * " + b.shape());
  }
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) {
        orow[j] += aik * brow[j];
      }
    }
  }
  return out;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data.begin(), m.data.end(),
                     [](double v) { return std::isfinite(v); });
}

double median(std::vector<double> values) {
  if (values.empty()) {
    throw std::invalid_argument("median: empty sample");
  }
  const std::size_t n = values.size();
  auto mid = values.begin() + n / 2;
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) {
    return *mid;
  }
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

namespace {

double reduce_span(const double* v, std::size_t n, std::size_t stride, ReduceOp op) {
  switch (op) {
    case ReduceOp::Sum:
    case ReduceOp::Mean: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += v[i * stride];
      return op == ReduceOp::Sum ? s : s / static_cast<double>(n);
    }
    case ReduceOp::Max: {
      double best = v[0];
      for (std::size_t i = 1; i < n; ++i) best = std::max(best, v[i * stride]);
      return best;
    }
    case ReduceOp::Median: {
      std::vector<double> copy(n);
      for (std::size_t i = 0; i < n; ++i) copy[i] = v[i * stride];
      return median(std::move(copy));
    }
  }
  throw std::logic_error("reduce: unknown op");
}

}  // namespace

Matrix reduce(const Matrix& m, Axis axis, ReduceOp op) {
  if (m.empty()) {
    throw std::invalid_argument("reduce: empty matrix");
  }
  switch (axis) {
    case Axis::Rows: {
      Matrix out(1, m.cols);
      for (std::size_t j = 0; j < m.cols; ++j) {
        out(0, j) = reduce_span(m.data.data() + j, m.rows, m.cols, op);
      }
      return out;
    }
    case Axis::Cols: {
      Matrix out(m.rows, 1);
      for (std::size_t i = 0; i < m.rows; ++i) {
        out(i, 0) = reduce_span(m.row(i), m.cols, 1, op);
      }
      return out;
    }
    case Axis::All: {
      Matrix out(1, 1);
      out(0, 0) = reduce_span(m.data.data(), m.data.size(), 1, op);
      return out;
    }
  }
  throw std::logic_error("reduce: unknown axis");
}

double reduce_all(const Matrix& m, ReduceOp op) {
  return reduce(m, Axis::All, op)(0, 0);
}

MaxReduce reduce_max_argmax(const Matrix& m, Axis axis) {
  if (m.empty()) {
    throw std::invalid_argument("reduce_max_argmax: empty matrix");
  }
  MaxReduce out;
  auto scan = [](const double* v, std::size_t n, std::size_t stride) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (v[i * stride] > v[best * stride]) best = i;
    }
    return best;
  };
  switch (axis) {
    case Axis::Rows: {
      out.values = Matrix(1, m.cols);
      out.argmax.resize(m.cols);
      for (std::size_t j = 0; j < m.cols; ++j) {
        const std::size_t i = scan(m.data.data() + j, m.rows, m.cols);
        out.argmax[j] = i;
        out.values(0, j) = m(i, j);
      }
      return out;
    }
    case Axis::Cols: {
      out.values = Matrix(m.rows, 1);
      out.argmax.resize(m.rows);
      for (std::size_t i = 0; i < m.rows; ++i) {
        const std::size_t j = scan(m.row(i), m.cols, 1);
        out.argmax[i] = j;
        out.values(i, 0) = m(i, j);
      }
      return out;
    }
    case Axis::All: {
      out.values = Matrix(1, 1);
      out.argmax.resize(1);
      const std::size_t i = scan(m.data.data(), m.data.size(), 1);
      out.argmax[0] = i;
      out.values(0, 0) = m.data[i];
      return out;
    }
  }
  throw std::logic_error("reduce_max_argmax: unknown axis");
}

}  // namespace mihash
