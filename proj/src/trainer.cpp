#include "mihash/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mihash/checkpoint.hpp"

namespace mihash {

std::string to_string(RobustKind k) {
  return k == RobustKind::Huber ? "huber" : "l2";
}

RobustKind robust_from_string(const std::string& s) {
  if (s == "huber") return RobustKind::Huber;
  if (s == "l2") return RobustKind::L2;
  throw std::invalid_argument("unknown robust mode '" + s + "'");
}

std::string to_string(TradeoffKind k) {
  switch (k) {
    case TradeoffKind::Decay: return "decay";
    case TradeoffKind::Equal: return "equal";
    case TradeoffKind::NoSi: return "no_si";
  }
  throw std::logic_error("unknown tradeoff kind");
}

TradeoffKind tradeoff_from_string(const std::string& s) {
  if (s == "decay") return TradeoffKind::Decay;
  if (s == "equal") return TradeoffKind::Equal;
  if (s == "no_si") return TradeoffKind::NoSi;
  throw std::invalid_argument("unknown tradeoff mode '" + s + "'");
}

std::string to_string(ScaleRefresh k) {
  return k == ScaleRefresh::Batch ? "batch" : "epoch";
}

ScaleRefresh scale_refresh_from_string(const std::string& s) {
  if (s == "batch") return ScaleRefresh::Batch;
  if (s == "epoch") return ScaleRefresh::Epoch;
  throw std::invalid_argument("unknown scale_refresh mode '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("TrainConfig: lr0 must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw std::invalid_argument("TrainConfig: lr_decay must lie in (0,1]");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("TrainConfig: momentum must lie in [0,1)");
  }
  if (batch_size < 2) {
    throw std::invalid_argument("TrainConfig: batch_size must be >= 2 (pairwise loss)");
  }
  if (lambda_q < 0.0 || lambda_w < 0.0) {
    throw std::invalid_argument("TrainConfig: loss weights must be nonnegative");
  }
  if (embed_dim < 1 || code_bits < 1) {
    throw std::invalid_argument("TrainConfig: net dims must be positive");
  }
}

OptimizerState make_optimizer(const ModelParams& params) {
  return OptimizerState{zeros_like(params)};
}

double lr_at(std::size_t t, const TrainConfig& cfg) {
  if (t < 1) throw std::invalid_argument("lr_at: epochs are 1-based");
  return cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(t - 1));
}

LossWeights weights_for_epoch(const TrainConfig& cfg, std::size_t t) {
  LossWeights w;
  w.lambda_q = cfg.lambda_q;
  w.lambda_w = cfg.lambda_w;
  switch (cfg.tradeoff) {
    case TradeoffKind::Decay: {
      const auto sched = tradeoff_schedule(static_cast<double>(t),
                                           static_cast<double>(cfg.t_max));
      w.lambda_mi = sched.mi;
      w.lambda_si = sched.si;
      break;
    }
    case TradeoffKind::Equal:
      w.lambda_mi = 0.5;
      w.lambda_si = 0.5;
      break;
    case TradeoffKind::NoSi:
      w.lambda_mi = 1.0;
      w.lambda_si = 0.0;
      break;
  }
  return w;
}

void sgd_step(ModelParams& params, const Gradients& grads, OptimizerState& state,
              double lr, double momentum) {
  std::vector<std::pair<std::string, const std::vector<double>*>> grad_blocks;
  visit_params(grads, [&](const std::string& name, const std::vector<double>& v) {
    grad_blocks.emplace_back(name, &v);
  });
  std::vector<std::vector<double>*> vel_blocks;
  visit_params(state.velocity, [&](const std::string&, std::vector<double>& v) {
    vel_blocks.push_back(&v);
  });

  std::size_t slot = 0;
  visit_params(params, [&](const std::string& name, std::vector<double>& theta) {
    const auto& [gname, gptr] = grad_blocks[slot];
    std::vector<double>& vel = *vel_blocks[slot];
    ++slot;
    if (gptr->size() != theta.size() || vel.size() != theta.size()) {
      throw std::invalid_argument("sgd_step: shape mismatch in " + name);
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = (*gptr)[i];
      if (!std::isfinite(g)) {
        throw std::runtime_error("sgd_step: non-finite gradient in " + gname +
                                 "[" + std::to_string(i) + "]");
      }
      vel[i] = momentum * vel[i] - lr * g;
      theta[i] += vel[i];
    }
  });
}

namespace {

struct ScalePair {
  HuberScale mi;
  HuberScale si;
};

ScalePair epoch_scales(const ModelParams& params, const BagDataset& ds,
                       const TrainConfig& cfg, std::size_t t) {
  const ForwardTrace trace = forward(params, ds, cfg.pool);
  return {estimate_scale(trace.h_mi, t), estimate_scale(trace.h_si, t)};
}

}  // namespace

EpochRecord train_epoch(ModelParams& params, OptimizerState& state,
                        const BagDataset& ds, const TrainConfig& cfg, std::size_t t) {
  if (ds.bags.empty()) {
    throw std::invalid_argument("train_epoch: empty dataset");
  }

  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng = Rng(cfg.seed).fork(t);
  shuffle_rng.shuffle(order);

  const LossWeights weights = weights_for_epoch(cfg, t);
  const double lr = lr_at(t, cfg);
  const bool l2 = cfg.robust == RobustKind::L2;

  ScalePair fixed_scales;
  if (!l2 && cfg.scale_refresh == ScaleRefresh::Epoch) {
    fixed_scales = epoch_scales(params, ds, cfg, t);
  }

  EpochRecord rec;
  rec.epoch = t;
  rec.lambda_mi = weights.lambda_mi;
  rec.lambda_si = weights.lambda_si;
  rec.lr = lr;

  std::size_t batches = 0;
  double quant_abs_sum = 0.0;
  std::size_t quant_entries = 0;

  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
    if (stop - start < 2) break;  // pairwise loss needs at least two bags

    std::vector<const Bag*> batch;
    batch.reserve(stop - start);
    std::vector<std::string> labels;
    for (std::size_t i = start; i < stop; ++i) {
      batch.push_back(&ds.bags[order[i]]);
      labels.push_back(ds.bags[order[i]].label);
    }

    const ForwardTrace trace = forward(params, batch, cfg.pool);

    ScalePair scales;
    if (l2) {
      scales = {HuberScale::unbounded(cfg.code_bits), HuberScale::unbounded(cfg.code_bits)};
    } else if (cfg.scale_refresh == ScaleRefresh::Epoch) {
      scales = fixed_scales;
    } else {
      scales = {estimate_scale(trace.h_mi, t), estimate_scale(trace.h_si, t)};
    }

    const SimilarityMatrix s_mi = similarity_from_labels(labels);
    const SimilarityMatrix s_si = instance_similarity(batch);
    const CompositeResult comp =
        composite_loss(trace, s_mi, s_si, scales.mi, scales.si, weights, params);

    const Gradients grads = backward(params, trace, comp.d_h_mi, comp.d_h_si, cfg.lambda_w);
    sgd_step(params, grads, state, lr, cfg.momentum);

    rec.loss += comp.total;
    rec.retrieval_mi += comp.retrieval_mi;
    rec.retrieval_si += comp.retrieval_si;
    rec.quantization += comp.quantization;
    rec.weight_decay += comp.weight_decay;
    for (double h : trace.h_mi.data) {
      quant_abs_sum += std::abs(std::abs(h) - 1.0);
    }
    quant_entries += trace.h_mi.data.size();
    ++batches;
  }

  if (batches == 0) {
    throw std::invalid_argument("train_epoch: no batch with >= 2 bags");
  }
  const double inv = 1.0 / static_cast<double>(batches);
  rec.loss *= inv;
  rec.retrieval_mi *= inv;
  rec.retrieval_si *= inv;
  rec.quantization *= inv;
  rec.weight_decay *= inv;
  rec.quant_error = quant_abs_sum / static_cast<double>(quant_entries);
  return rec;
}

namespace {

void maybe_checkpoint(const ModelParams& params, const OptimizerState& state,
                      const TrainConfig& cfg, std::size_t t) {
  if (cfg.checkpoint_dir.empty()) return;
  const bool at_interval =
      cfg.checkpoint_interval > 0 && t % cfg.checkpoint_interval == 0;
  if (!at_interval && t != cfg.t_max) return;
  std::filesystem::create_directories(cfg.checkpoint_dir);
  Checkpoint ckpt;
  ckpt.params = params;
  ckpt.config = cfg;
  ckpt.epoch = t;
  ckpt.has_optimizer = true;
  ckpt.optimizer = state;
  save_checkpoint((std::filesystem::path(cfg.checkpoint_dir) /
                   ("ckpt-epoch-" + std::to_string(t)))
                      .string(),
                  ckpt);
}

}  // namespace

TrainResult resume_train(const BagDataset& ds, const TrainConfig& cfg,
                         ModelParams params, OptimizerState optimizer,
                         std::size_t first_epoch, TrainLog log) {
  cfg.validate();
  TrainResult result{std::move(params), std::move(optimizer), std::move(log)};
  for (std::size_t t = first_epoch; t <= cfg.t_max; ++t) {
    result.log.push_back(train_epoch(result.params, result.optimizer, ds, cfg, t));
    maybe_checkpoint(result.params, result.optimizer, cfg, t);
  }
  return result;
}

TrainResult train(const BagDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.bags.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }
  Rng init_rng = Rng(cfg.seed).fork(0);
  ModelParams params =
      init_params(init_rng, ds.dim, cfg.hidden_dims, cfg.embed_dim, cfg.code_bits);
  OptimizerState opt = make_optimizer(params);
  return resume_train(ds, cfg, std::move(params), std::move(opt), 1);
}

void write_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("write_train_log: cannot open " + path);
  }
  f << "epoch,loss,retrieval_mi,retrieval_si,quantization,weight_decay,"
       "lambda_mi,lambda_si,quant_error,lr\n";
  f.precision(17);
  for (const auto& r : log) {
    f << r.epoch << ',' << r.loss << ',' << r.retrieval_mi << ',' << r.retrieval_si
      << ',' << r.quantization << ',' << r.weight_decay << ',' << r.lambda_mi << ','
      << r.lambda_si << ',' << r.quant_error << ',' << r.lr << '\n';
  }
}

}  // namespace mihash
