#ifndef MIHASH_NET_HPP
#define MIHASH_NET_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mihash/data.hpp"
#include "mihash/hashcode.hpp"
#include "mihash/matrix.hpp"
#include "mihash/rng.hpp"

namespace mihash {

enum class PoolMode { Max, Mean };
enum class Activation { ReLU, Linear };

std::string to_string(PoolMode m);
PoolMode pool_mode_from_string(const std::string& s);
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// out = act(weight * in + bias); weight is out_dim x in_dim.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;
  Activation activation = Activation::ReLU;
};

// tanh(weight * in + bias); weight is K x embed_dim.
struct HashHead {
  Matrix weight;
  std::vector<double> bias;
};

// Instance encoder (hidden ReLU layers, linear embedding layer) plus the two
// tanh hashing heads. The bag head consumes pooled embeddings, the instance
// head consumes raw per-instance embeddings.
struct ModelParams {
  std::vector<DenseLayer> encoder;
  HashHead mi_head;
  HashHead si_head;
  std::size_t code_bits = 0;

  std::size_t input_dim() const { return encoder.front().weight.cols; }
  std::size_t embed_dim() const { return encoder.back().weight.rows; }
};

// Same shapes as ModelParams; entries hold partial derivatives.
using Gradients = ModelParams;

// Glorot-uniform weights, zero biases. Hidden layers are ReLU, the final
// encoder layer is linear.
ModelParams init_params(Rng& rng, std::size_t input_dim,
                        const std::vector<std::size_t>& hidden_dims,
                        std::size_t embed_dim, std::size_t code_bits);

Gradients zeros_like(const ModelParams& params);

// Visits every trainable block as (name, flat array). Blocks appear in a
// fixed order so two shape-congruent models can be walked in lockstep.
void visit_params(ModelParams& p,
                  const std::function<void(const std::string&, std::vector<double>&)>& fn);
void visit_params(const ModelParams& p,
                  const std::function<void(const std::string&, const std::vector<double>&)>& fn);

std::size_t param_count(const ModelParams& p);

// Sum of squared entries over all weights and biases.
double weight_decay_term(const ModelParams& p);

// Everything backward needs: per-layer pre-activations and activations for
// each instance in the batch, bag boundaries, the pooled embedding with the
// max-pool routing, and both heads' tanh outputs.
struct ForwardTrace {
  PoolMode pool = PoolMode::Max;
  Matrix inputs;                          // M x d, all instances in batch order
  std::vector<Matrix> pre;                // per layer, M x layer_dim
  std::vector<Matrix> act;                // per layer, M x layer_dim
  std::vector<std::size_t> bag_offsets;   // N+1 cumulative instance counts
  Matrix pooled;                          // N x embed_dim
  std::vector<std::size_t> routing;       // N*embed_dim flat instance rows (max pool)
  Matrix h_mi;                            // N x K
  Matrix h_si;                            // M x K

  std::size_t bag_count() const { return bag_offsets.size() - 1; }
  std::size_t instance_count() const { return inputs.rows; }
};

ForwardTrace forward(const ModelParams& params, const std::vector<const Bag*>& batch,
                     PoolMode pool);
ForwardTrace forward(const ModelParams& params, const BagDataset& ds, PoolMode pool);

std::vector<const Bag*> bag_pointers(const BagDataset& ds);

HashCode quantize(std::span<const double> h);
std::vector<HashCode> quantize_rows(const Matrix& h);

// Chain rule from the two head gradients down to every parameter. Max pool
// routes each pooled dimension's gradient to the recorded argmax instance;
// mean pool divides it equally. lambda_w adds 2*lambda_w*theta to every
// weight and bias slot.
Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                   const Matrix& d_h_mi, const Matrix& d_h_si, double lambda_w);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_block;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::vector<std::pair<std::string, double>> block_errors;

  bool pass(double tolerance) const { return max_rel_error <= tolerance; }
};

// Central-difference verification of an analytic gradient against a scalar
// loss. Checks every coordinate unless max_coords_per_block is positive, in
// which case a seeded random subset of that size is probed per block.
// Relative error is |a - f| / max(|a|, |f|, 1e-8).
GradCheckReport finite_diff_check(const ModelParams& params,
                                  const std::function<double(const ModelParams&)>& loss,
                                  const Gradients& analytic, double eps,
                                  std::size_t max_coords_per_block = 0,
                                  Rng* subsample = nullptr);

}  // namespace mihash

#endif  // MIHASH_NET_HPP
