#include "mihash/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mihash {

namespace {

constexpr double kSigmaFloor = 1e-6;
constexpr double kMadToSigma = 1.485;
constexpr double kHuberTuning = 1.345;
constexpr double kWarmupFactor = 7.0;

double log_cosh(double x) {
  // log cosh x = |x| + log1p(exp(-2|x|)) - log 2, safe for any magnitude.
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::numbers::ln2;
}

}  // namespace

HuberScale HuberScale::unbounded(std::size_t bits) {
  return HuberScale{std::vector<double>(bits, std::numeric_limits<double>::infinity())};
}

double huber_rho(double r, double c) {
  if (!(c > 0.0)) {
    throw std::invalid_argument("huber_rho: threshold must be positive");
  }
  const double ar = std::abs(r);
  if (ar <= c) {
    return 0.5 * r * r;
  }
  return c * ar - 0.5 * c * c;
}

double huber_rho_grad(double r, double c) {
  if (!(c > 0.0)) {
    throw std::invalid_argument("huber_rho_grad: threshold must be positive");
  }
  if (std::abs(r) <= c) {
    return r;
  }
  return c * sgn(r);
}

double huber_c_from_residuals(std::vector<double> residuals, std::size_t epoch) {
  if (residuals.empty()) {
    throw std::invalid_argument("huber_c_from_residuals: empty residual sample");
  }
  const double center = median(residuals);
  for (auto& r : residuals) {
    r = std::abs(r - center);
  }
  const double sigma = kMadToSigma * median(std::move(residuals));
  double c = kHuberTuning * std::max(sigma, kSigmaFloor);
  if (epoch == 1) {
    c *= kWarmupFactor;
  }
  return c;
}

HuberScale estimate_scale(const Matrix& codes, std::size_t epoch) {
  const std::size_t n = codes.rows;
  if (n < 2) {
    throw std::invalid_argument("estimate_scale: need at least 2 codes");
  }
  HuberScale scale;
  scale.c.resize(codes.cols);
  std::vector<double> residuals;
  residuals.reserve(n * (n - 1) / 2);
  for (std::size_t k = 0; k < codes.cols; ++k) {
    residuals.clear();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        residuals.push_back(codes(i, k) - codes(j, k));
      }
    }
    scale.c[k] = huber_c_from_residuals(residuals, epoch);
  }
  return scale;
}

Matrix pairwise_huber(const Matrix& codes, const HuberScale& scale) {
  if (scale.bits() != codes.cols) {
    throw std::invalid_argument("pairwise_huber: scale has " +
                                std::to_string(scale.bits()) + " bits, codes " +
                                std::to_string(codes.cols));
  }
  const std::size_t n = codes.rows;
  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < codes.cols; ++k) {
        sum += huber_rho(codes(i, k) - codes(j, k), scale.c[k]);
      }
      dist(i, j) = sum;
      dist(j, i) = sum;
    }
  }
  return dist;
}

Matrix neighbor_probs(const Matrix& dist) {
  const std::size_t n = dist.rows;
  if (n < 2 || dist.cols != n) {
    throw std::invalid_argument("neighbor_probs: need a square matrix of order >= 2");
  }
  Matrix probs(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < n; ++l) {
      if (l != i) lowest = std::min(lowest, dist(i, l));
    }
    double norm = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      if (l == i) continue;
      const double e = std::exp(lowest - dist(i, l));
      probs(i, l) = e;
      norm += e;
    }
    for (std::size_t l = 0; l < n; ++l) {
      if (l != i) probs(i, l) /= norm;
    }
  }
  return probs;
}

double nca_loss(const Matrix& probs, const SimilarityMatrix& similar) {
  const std::size_t n = probs.rows;
  if (similar.size() != n) {
    throw std::invalid_argument("nca_loss: similarity size mismatch");
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && similar.similar(i, j)) {
        mass += probs(i, j);
      }
    }
  }
  return 1.0 - mass / static_cast<double>(n * n);
}

Matrix nca_grad(const Matrix& codes, const SimilarityMatrix& similar,
                const Matrix& probs, const HuberScale& scale) {
  const std::size_t n = codes.rows;
  const std::size_t bits = codes.cols;
  if (similar.size() != n || probs.rows != n || probs.cols != n) {
    throw std::invalid_argument("nca_grad: shape mismatch");
  }
  if (scale.bits() != bits) {
    throw std::invalid_argument("nca_grad: scale width mismatch");
  }

  // Similar-neighbor mass per row: w[i] = sum_q s_iq p_iq.
  std::vector<double> mass(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < n; ++q) {
      if (q != i && similar.similar(i, q)) {
        mass[i] += probs(i, q);
      }
    }
  }

  const double inv_n2 = 1.0 / static_cast<double>(n * n);
  Matrix grad(n, bits);
  std::vector<double> residual_grad(bits);
  std::vector<double> row_pull(bits);
  for (std::size_t a = 0; a < n; ++a) {
    // row_pull = sum_z p_az * rho'(h_a - h_z), the softmax shift term.
    std::fill(row_pull.begin(), row_pull.end(), 0.0);
    std::fill(grad.row(a), grad.row(a) + bits, 0.0);
    for (std::size_t z = 0; z < n; ++z) {
      if (z == a) continue;
      const double paz = probs(a, z);
      for (std::size_t k = 0; k < bits; ++k) {
        row_pull[k] += paz * huber_rho_grad(codes(a, k) - codes(z, k), scale.c[k]);
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const double s_aj = similar.similar(a, j) ? 1.0 : 0.0;
      // Forward pull of pair (a, j) plus the reverse pull of row j through
      // its own softmax normalization.
      const double coeff = s_aj * (probs(a, j) + probs(j, a)) - probs(j, a) * mass[j];
      if (coeff == 0.0) continue;
      for (std::size_t k = 0; k < bits; ++k) {
        residual_grad[k] = huber_rho_grad(codes(a, k) - codes(j, k), scale.c[k]);
        grad(a, k) += coeff * residual_grad[k];
      }
    }
    for (std::size_t k = 0; k < bits; ++k) {
      grad(a, k) = inv_n2 * (grad(a, k) - mass[a] * row_pull[k]);
    }
  }
  return grad;
}

double quant_loss(const Matrix& codes) {
  double sum = 0.0;
  for (double h : codes.data) {
    sum += log_cosh(std::abs(h) - 1.0);
  }
  return sum;
}

Matrix quant_grad(const Matrix& codes) {
  return map_elementwise(codes, [](double h) {
    return std::tanh(std::abs(h) - 1.0) * sgn(h);
  });
}

TradeoffWeights tradeoff_schedule(double t, double t_max) {
  if (!(t_max >= 1.0)) {
    throw std::invalid_argument("tradeoff_schedule: t_max must be >= 1");
  }
  const double clamped = std::clamp(t, 0.0, t_max);
  const double remain = 1.0 - clamped / t_max;
  TradeoffWeights w;
  w.mi = 1.0 - 0.5 * remain * remain;
  w.si = 1.0 - w.mi;
  return w;
}

CompositeResult composite_loss(const ForwardTrace& trace, const SimilarityMatrix& s_mi,
                               const SimilarityMatrix& s_si, const HuberScale& mi_scale,
                               const HuberScale& si_scale, const LossWeights& weights,
                               const ModelParams& params) {
  CompositeResult out;

  const Matrix p_mi = neighbor_probs(pairwise_huber(trace.h_mi, mi_scale));
  out.retrieval_mi = nca_loss(p_mi, s_mi);
  const Matrix g_mi = nca_grad(trace.h_mi, s_mi, p_mi, mi_scale);

  const Matrix p_si = neighbor_probs(pairwise_huber(trace.h_si, si_scale));
  out.retrieval_si = nca_loss(p_si, s_si);
  const Matrix g_si = nca_grad(trace.h_si, s_si, p_si, si_scale);

  // The retrieval terms are normalized to O(1) by their 1/N^2 factor, so the
  // quantization penalty enters as its per-entry mean; the raw sum would
  // outweigh the retrieval gradients by orders of magnitude and freeze the
  // codes at their initial signs.
  const double quant_norm = static_cast<double>(trace.h_mi.data.size());
  out.quantization = quant_loss(trace.h_mi) / quant_norm;
  const Matrix g_q = quant_grad(trace.h_mi);
  out.weight_decay = weight_decay_term(params);

  out.total = weights.lambda_mi * out.retrieval_mi + weights.lambda_si * out.retrieval_si +
              weights.lambda_q * out.quantization + weights.lambda_w * out.weight_decay;

  const double q_coef = weights.lambda_q / quant_norm;
  out.d_h_mi = Matrix(trace.h_mi.rows, trace.h_mi.cols);
  for (std::size_t i = 0; i < out.d_h_mi.data.size(); ++i) {
    out.d_h_mi.data[i] = weights.lambda_mi * g_mi.data[i] + q_coef * g_q.data[i];
  }
  out.d_h_si = Matrix(trace.h_si.rows, trace.h_si.cols);
  for (std::size_t i = 0; i < out.d_h_si.data.size(); ++i) {
    out.d_h_si.data[i] = weights.lambda_si * g_si.data[i];
  }
  return out;
}

}  // namespace mihash
