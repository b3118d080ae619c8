#ifndef MIHASH_LOSS_HPP
#define MIHASH_LOSS_HPP

#include <cstddef>
#include <vector>

#include "mihash/data.hpp"
#include "mihash/matrix.hpp"
#include "mihash/net.hpp"

namespace mihash {

// Per-bit Huber thresholds c_k, estimated from the data. An unbounded scale
// (c_k = +inf) degenerates every Huber expression to plain L2.
struct HuberScale {
  std::vector<double> c;

  static HuberScale unbounded(std::size_t bits);
  std::size_t bits() const { return c.size(); }
};

// Quadratic inside the threshold, linear outside: 0.5 r^2 for |r| <= c,
// c|r| - 0.5 c^2 beyond. Continuous with continuous first derivative at the
// branch boundary.
double huber_rho(double r, double c);

// r inside the threshold, c*sgn(r) outside; the clipped branch is what gives
// outliers a bounded pull on the gradient.
double huber_rho_grad(double r, double c);

// Threshold for one bit from its residual sample: 1.345 times a robust sigma
// (1.485 x median absolute deviation, floored at 1e-6). The first training
// epoch scales the result by 7 to ride out the initially wild residuals.
double huber_c_from_residuals(std::vector<double> residuals, std::size_t epoch);

// Per-bit thresholds from a code matrix; the residual population per bit is
// every unordered row pair. Needs at least two rows.
HuberScale estimate_scale(const Matrix& codes, std::size_t epoch);

// L[i][j] = sum_k huber_rho(codes(i,k) - codes(j,k), c_k); symmetric, zero
// diagonal.
Matrix pairwise_huber(const Matrix& codes, const HuberScale& scale);

// Softmax neighbor probabilities per row: p(i,j) = exp(-L(i,j)) normalized
// over j != i, computed with max subtraction. Diagonal is zero; each row of
// off-diagonal entries sums to one.
Matrix neighbor_probs(const Matrix& dist);

// Retrieval loss: 1 - (1/N^2) * sum over distinct pairs of s_ij * p_ij.
// Perfect same-label neighbor mass drives the sum up and the loss down.
double nca_loss(const Matrix& probs, const SimilarityMatrix& similar);

// d(nca_loss)/d codes, row a holds the gradient for code a. Carries the same
// 1/N^2 normalization as the loss; verified against central differences.
Matrix nca_grad(const Matrix& codes, const SimilarityMatrix& similar,
                const Matrix& probs, const HuberScale& scale);

// Quantization penalty sum(log cosh(|h| - 1)): zero exactly on +-1 entries.
double quant_loss(const Matrix& codes);

// Entrywise tanh(|h| - 1) * sgn(h), with sgn(0) = +1.
Matrix quant_grad(const Matrix& codes);

struct TradeoffWeights {
  double mi = 0.0;
  double si = 0.0;
};

// Epoch-indexed trade-off between the bag-level and instance-level losses:
// mi(t) = 1 - 0.5 (1 - t/t_max)^2, si = 1 - mi. Starts at (0.5, 0.5) and
// ends at (1, 0); t is clamped into [0, t_max].
TradeoffWeights tradeoff_schedule(double t, double t_max);

struct LossWeights {
  double lambda_mi = 1.0;
  double lambda_si = 0.0;
  double lambda_q = 0.0;
  double lambda_w = 0.0;
};

struct CompositeResult {
  double total = 0.0;
  double retrieval_mi = 0.0;   // NCA loss on bag codes
  double retrieval_si = 0.0;   // NCA loss on instance codes
  double quantization = 0.0;   // per-entry mean log-cosh penalty on bag codes
  double weight_decay = 0.0;   // sum of squared parameters
  Matrix d_h_mi;               // dJ/d(bag codes)
  Matrix d_h_si;               // dJ/d(instance codes)
};

// Weighted composite objective over one forward trace. The quantization term
// enters as its per-entry mean so all weighted terms share O(1) scale; head
// gradients cover the retrieval and quantization terms, while the
// weight-decay gradient is applied inside backward() where the parameters
// live.
CompositeResult composite_loss(const ForwardTrace& trace, const SimilarityMatrix& s_mi,
                               const SimilarityMatrix& s_si, const HuberScale& mi_scale,
                               const HuberScale& si_scale, const LossWeights& weights,
                               const ModelParams& params);

}  // namespace mihash

#endif  // MIHASH_LOSS_HPP
