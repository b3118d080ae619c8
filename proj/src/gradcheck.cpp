#include "mihash/gradcheck.hpp"

#include "mihash/loss.hpp"

namespace mihash {

GradCheckReport run_gradcheck(const GradCheckSpec& spec) {
  SyntheticSpec data_spec;
  data_spec.classes = spec.classes;
  data_spec.bags_per_class = spec.bags_per_class;
  data_spec.dim = spec.input_dim;
  data_spec.bag_min = spec.bag_min;
  data_spec.bag_max = spec.bag_max;

  Rng data_rng = Rng(spec.seed).fork(100);
  const BagDataset batch = generate_synthetic(data_rng, data_spec);
  const SimilarityMatrix s_mi = similarity_from_labels(batch.labels());
  const SimilarityMatrix s_si = instance_similarity(bag_pointers(batch));

  Rng init_rng = Rng(spec.seed).fork(0);
  const ModelParams params = init_params(init_rng, spec.input_dim, spec.hidden_dims,
                                         spec.embed_dim, spec.code_bits);

  LossWeights weights;
  weights.lambda_mi = spec.lambda_mi;
  weights.lambda_si = spec.lambda_si;
  weights.lambda_q = spec.lambda_q;
  weights.lambda_w = spec.lambda_w;

  // Thresholds come from the unperturbed codes and stay frozen across every
  // probe, exactly as one optimizer step treats them.
  const ForwardTrace base = forward(params, batch, spec.pool);
  HuberScale mi_scale = HuberScale::unbounded(spec.code_bits);
  HuberScale si_scale = HuberScale::unbounded(spec.code_bits);
  if (spec.robust == RobustKind::Huber) {
    mi_scale = estimate_scale(base.h_mi, 2);
    si_scale = estimate_scale(base.h_si, 2);
  }

  const auto loss_at = [&](const ModelParams& theta) {
    const ForwardTrace trace = forward(theta, batch, spec.pool);
    return composite_loss(trace, s_mi, s_si, mi_scale, si_scale, weights, theta).total;
  };

  const CompositeResult comp =
      composite_loss(base, s_mi, s_si, mi_scale, si_scale, weights, params);
  Gradients analytic = backward(params, base, comp.d_h_mi, comp.d_h_si, spec.lambda_w);
  if (spec.corrupt) {
    analytic.encoder.front().weight.data.front() += 1.0;
  }

  return finite_diff_check(params, loss_at, analytic, spec.eps);
}

}  // namespace mihash
