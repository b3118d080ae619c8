#ifndef MIHASH_TRAINER_HPP
#define MIHASH_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mihash/data.hpp"
#include "mihash/loss.hpp"
#include "mihash/net.hpp"

namespace mihash {

enum class RobustKind { Huber, L2 };
enum class TradeoffKind { Decay, Equal, NoSi };
enum class ScaleRefresh { Batch, Epoch };

std::string to_string(RobustKind k);
RobustKind robust_from_string(const std::string& s);
std::string to_string(TradeoffKind k);
TradeoffKind tradeoff_from_string(const std::string& s);
std::string to_string(ScaleRefresh k);
ScaleRefresh scale_refresh_from_string(const std::string& s);

struct TrainConfig {
  std::size_t t_max = 150;
  std::size_t batch_size = 8;
  double lr0 = 0.01;
  double lr_decay = 0.98;   // per-epoch multiplicative factor
  double momentum = 0.9;
  double lambda_q = 0.05;
  double lambda_w = 0.001;
  PoolMode pool = PoolMode::Max;
  RobustKind robust = RobustKind::Huber;
  TradeoffKind tradeoff = TradeoffKind::Decay;
  ScaleRefresh scale_refresh = ScaleRefresh::Batch;
  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden_dims{64};
  std::size_t embed_dim = 32;
  std::size_t code_bits = 16;
  std::size_t checkpoint_interval = 0;  // 0: checkpoint only at the end
  std::string checkpoint_dir;           // empty: no checkpoints written

  void validate() const;  // throws std::invalid_argument
};

// Momentum velocity buffers, shape-congruent with the parameters.
struct OptimizerState {
  Gradients velocity;
};

OptimizerState make_optimizer(const ModelParams& params);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double retrieval_mi = 0.0;
  double retrieval_si = 0.0;
  double quantization = 0.0;
  double weight_decay = 0.0;
  double lambda_mi = 0.0;
  double lambda_si = 0.0;
  double quant_error = 0.0;  // mean | |h_mi| - 1 | over the epoch's bag codes
  double lr = 0.0;
};

using TrainLog = std::vector<EpochRecord>;

// lr0 * lr_decay^(t-1); epochs are 1-based.
double lr_at(std::size_t t, const TrainConfig& cfg);

// Trade-off weights for epoch t under the configured policy, combined with
// the fixed quantization and weight-decay multipliers.
LossWeights weights_for_epoch(const TrainConfig& cfg, std::size_t t);

// Classical momentum: v <- momentum*v - lr*g; theta <- theta + v.
// A non-finite gradient entry aborts with a diagnostic naming the block.
void sgd_step(ModelParams& params, const Gradients& grads, OptimizerState& state,
              double lr, double momentum);

// One pass over the shuffled dataset: per batch, scale estimation, forward,
// composite loss, backward, update. The shuffle is derived from (seed, t)
// alone so a resumed run replays the identical order.
EpochRecord train_epoch(ModelParams& params, OptimizerState& state,
                        const BagDataset& ds, const TrainConfig& cfg, std::size_t t);

struct TrainResult {
  ModelParams params;
  OptimizerState optimizer;
  TrainLog log;
};

TrainResult train(const BagDataset& ds, const TrainConfig& cfg);

// Continue from already-trained state; first_epoch is the next epoch to run
// (pass completed_epoch + 1).
TrainResult resume_train(const BagDataset& ds, const TrainConfig& cfg,
                         ModelParams params, OptimizerState optimizer,
                         std::size_t first_epoch, TrainLog log = {});

// One CSV row per epoch, header included. No timestamps; identical runs
// produce identical files.
void write_train_log(const TrainLog& log, const std::string& path);

}  // namespace mihash

#endif  // MIHASH_TRAINER_HPP
