#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mihash/checkpoint.hpp"
#include "mihash/data.hpp"
#include "mihash/loss.hpp"
#include "mihash/trainer.hpp"

using namespace mihash;

namespace {

BagDataset small_dataset(std::uint64_t seed = 101, std::size_t bags_per_class = 8) {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.bags_per_class = bags_per_class;
  spec.dim = 6;
  spec.bag_min = 1;
  spec.bag_max = 3;
  Rng rng(seed);
  return generate_synthetic(rng, spec);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.t_max = 4;
  cfg.batch_size = 4;
  cfg.hidden_dims = {8};
  cfg.embed_dim = 6;
  cfg.code_bits = 8;
  cfg.seed = 11;
  return cfg;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  bool equal = true;
  std::vector<const std::vector<double>*> blocks;
  visit_params(a, [&blocks](const std::string&, const std::vector<double>& v) {
    blocks.push_back(&v);
  });
  std::size_t i = 0;
  visit_params(b, [&](const std::string&, const std::vector<double>& v) {
    if (v != *blocks[i++]) equal = false;
  });
  return equal;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainConfig cfg;
  CHECK(lr_at(1, cfg) == 0.01);
  CHECK(lr_at(3, cfg) == doctest::Approx(0.01 * 0.98 * 0.98).epsilon(1e-15));
  cfg.lr0 = 0.01;
  cfg.lr_decay = 0.98;
  CHECK(lr_at(3, cfg) == doctest::Approx(0.009604).epsilon(1e-12));
  cfg.lr_decay = 1.0;
  CHECK(lr_at(50, cfg) == cfg.lr0);
  CHECK_THROWS_AS(lr_at(0, cfg), std::invalid_argument);
}

TEST_CASE("sgd_step with zero momentum is plain descent") {
  Rng rng(1);
  ModelParams p = init_params(rng, 2, {}, 2, 2);
  const std::vector<double> before = p.encoder[0].weight.data;
  Gradients g = zeros_like(p);
  for (auto& v : g.encoder[0].weight.data) v = 1.0;
  OptimizerState state = make_optimizer(p);
  sgd_step(p, g, state, 0.1, 0.0);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(p.encoder[0].weight.data[i] == doctest::Approx(before[i] - 0.1).epsilon(1e-15));
  }
}

TEST_CASE("momentum accumulates across steps") {
  // Two steps at g=1, lr=0.1, momentum=0.9: deltas -0.1 then -0.19.
  Rng rng(2);
  ModelParams p = init_params(rng, 2, {}, 2, 2);
  const double start = p.encoder[0].weight.data[0];
  Gradients g = zeros_like(p);
  g.encoder[0].weight.data[0] = 1.0;
  OptimizerState state = make_optimizer(p);
  sgd_step(p, g, state, 0.1, 0.9);
  CHECK(p.encoder[0].weight.data[0] == doctest::Approx(start - 0.1).epsilon(1e-15));
  sgd_step(p, g, state, 0.1, 0.9);
  CHECK(p.encoder[0].weight.data[0] == doctest::Approx(start - 0.29).epsilon(1e-15));
}

TEST_CASE("zero gradients never move parameters") {
  Rng rng(3);
  ModelParams p = init_params(rng, 3, {4}, 3, 2);
  const ModelParams before = p;
  const Gradients g = zeros_like(p);
  OptimizerState state = make_optimizer(p);
  for (int step = 0; step < 5; ++step) {
    sgd_step(p, g, state, 0.1, 0.9);
  }
  CHECK(params_equal(p, before));
}

TEST_CASE("non-finite gradients abort with a diagnostic") {
  Rng rng(4);
  ModelParams p = init_params(rng, 2, {}, 2, 2);
  Gradients g = zeros_like(p);
  g.mi_head.weight.data[0] = std::numeric_limits<double>::quiet_NaN();
  OptimizerState state = make_optimizer(p);
  CHECK_THROWS_WITH_AS(sgd_step(p, g, state, 0.1, 0.9),
                       doctest::Contains("mi_head.weight"), std::runtime_error);
}

TEST_CASE("trade-off weights per policy") {
  TrainConfig cfg = small_config();
  cfg.t_max = 150;

  cfg.tradeoff = TradeoffKind::Equal;
  auto w = weights_for_epoch(cfg, 37);
  CHECK(w.lambda_mi == 0.5);
  CHECK(w.lambda_si == 0.5);

  cfg.tradeoff = TradeoffKind::NoSi;
  w = weights_for_epoch(cfg, 37);
  CHECK(w.lambda_mi == 1.0);
  CHECK(w.lambda_si == 0.0);

  cfg.tradeoff = TradeoffKind::Decay;
  w = weights_for_epoch(cfg, 1);
  const auto sched = tradeoff_schedule(1.0, 150.0);
  CHECK(w.lambda_mi == sched.mi);
  w = weights_for_epoch(cfg, 150);
  CHECK(w.lambda_mi == 1.0);
  CHECK(w.lambda_si == 0.0);
}

TEST_CASE("t_max zero returns initialized parameters and an empty log") {
  const BagDataset ds = small_dataset();
  TrainConfig cfg = small_config();
  cfg.t_max = 0;
  const TrainResult result = train(ds, cfg);
  CHECK(result.log.empty());

  Rng init_rng = Rng(cfg.seed).fork(0);
  const ModelParams fresh =
      init_params(init_rng, ds.dim, cfg.hidden_dims, cfg.embed_dim, cfg.code_bits);
  CHECK(params_equal(result.params, fresh));
}

TEST_CASE("training is bit-deterministic in seed and config") {
  const BagDataset ds = small_dataset();
  const TrainConfig cfg = small_config();
  const TrainResult a = train(ds, cfg);
  const TrainResult b = train(ds, cfg);
  CHECK(params_equal(a.params, b.params));
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.log[i].quant_error == b.log[i].quant_error);
  }
}

TEST_CASE("logged lambdas equal the schedule at both ends") {
  const BagDataset ds = small_dataset();
  TrainConfig cfg = small_config();
  cfg.t_max = 5;
  cfg.tradeoff = TradeoffKind::Decay;
  const TrainResult result = train(ds, cfg);
  REQUIRE(result.log.size() == 5);
  const auto first = tradeoff_schedule(1.0, 5.0);
  CHECK(result.log.front().lambda_mi == first.mi);
  CHECK(result.log.front().lambda_si == first.si);
  CHECK(result.log.back().lambda_mi == 1.0);
  CHECK(result.log.back().lambda_si == 0.0);
}

TEST_CASE("no_si leaves the instance head at its initial values without decay") {
  const BagDataset ds = small_dataset();
  TrainConfig cfg = small_config();
  cfg.tradeoff = TradeoffKind::NoSi;
  cfg.lambda_w = 0.0;  // isolate the SI path: only weight decay touches it
  cfg.lambda_q = 0.05;
  const TrainResult result = train(ds, cfg);

  Rng init_rng = Rng(cfg.seed).fork(0);
  const ModelParams fresh =
      init_params(init_rng, ds.dim, cfg.hidden_dims, cfg.embed_dim, cfg.code_bits);
  CHECK(result.params.si_head.weight.data == fresh.si_head.weight.data);
  CHECK(result.params.si_head.bias == fresh.si_head.bias);
  // The bag head must have moved.
  CHECK(result.params.mi_head.weight.data != fresh.mi_head.weight.data);
}

TEST_CASE("equal trade-off logs constant halves") {
  const BagDataset ds = small_dataset();
  TrainConfig cfg = small_config();
  cfg.tradeoff = TradeoffKind::Equal;
  const TrainResult result = train(ds, cfg);
  for (const auto& rec : result.log) {
    CHECK(rec.lambda_mi == 0.5);
    CHECK(rec.lambda_si == 0.5);
  }
}

TEST_CASE("retrieval loss decreases over a short run on separable data") {
  SyntheticSpec spec;  // defaults: 4 classes, 50 bags/class, separable
  spec.bags_per_class = 12;
  std::size_t improved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const BagDataset ds = generate_synthetic(rng, spec);
    TrainConfig cfg;
    cfg.t_max = 20;
    cfg.batch_size = 8;
    cfg.code_bits = 16;
    cfg.seed = seed;
    const TrainResult result = train(ds, cfg);
    improved += result.log.back().retrieval_mi < result.log.front().retrieval_mi;
  }
  CHECK(improved >= 3);  // median over 5 seeds improves
}

TEST_CASE("scale refresh per epoch is supported and deterministic") {
  const BagDataset ds = small_dataset();
  TrainConfig cfg = small_config();
  cfg.scale_refresh = ScaleRefresh::Epoch;
  const TrainResult a = train(ds, cfg);
  const TrainResult b = train(ds, cfg);
  CHECK(params_equal(a.params, b.params));
  // Distinct from the per-batch policy.
  TrainConfig batch_cfg = small_config();
  const TrainResult c = train(ds, batch_cfg);
  CHECK_FALSE(params_equal(a.params, c.params));
}

TEST_CASE("train log file has one named row per epoch") {
  const BagDataset ds = small_dataset();
  const TrainConfig cfg = small_config();
  const TrainResult result = train(ds, cfg);
  const std::string path =
      (std::filesystem::temp_directory_path() / "mihash_trainlog.csv").string();
  write_train_log(result.log, path);
  std::ifstream f(path);
  std::string line;
  REQUIRE(std::getline(f, line));
  CHECK(line ==
        "epoch,loss,retrieval_mi,retrieval_si,quantization,weight_decay,"
        "lambda_mi,lambda_si,quant_error,lr");
  std::size_t rows = 0;
  while (std::getline(f, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == cfg.t_max);
  std::remove(path.c_str());
}

TEST_CASE("config json round-trips") {
  TrainConfig cfg = small_config();
  cfg.pool = PoolMode::Mean;
  cfg.robust = RobustKind::L2;
  cfg.tradeoff = TradeoffKind::Equal;
  cfg.scale_refresh = ScaleRefresh::Epoch;
  cfg.hidden_dims = {10, 7};
  const TrainConfig back = config_from_json(config_to_json(cfg));
  CHECK(back.t_max == cfg.t_max);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.lr0 == cfg.lr0);
  CHECK(back.lr_decay == cfg.lr_decay);
  CHECK(back.momentum == cfg.momentum);
  CHECK(back.lambda_q == cfg.lambda_q);
  CHECK(back.lambda_w == cfg.lambda_w);
  CHECK(back.pool == cfg.pool);
  CHECK(back.robust == cfg.robust);
  CHECK(back.tradeoff == cfg.tradeoff);
  CHECK(back.scale_refresh == cfg.scale_refresh);
  CHECK(back.seed == cfg.seed);
  CHECK(back.hidden_dims == cfg.hidden_dims);
  CHECK(back.embed_dim == cfg.embed_dim);
  CHECK(back.code_bits == cfg.code_bits);
}

TEST_CASE("checkpoint round-trip is value-exact") {
  const BagDataset ds = small_dataset();
  const TrainConfig cfg = small_config();
  const TrainResult result = train(ds, cfg);

  Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.config = cfg;
  ckpt.epoch = cfg.t_max;
  ckpt.has_optimizer = true;
  ckpt.optimizer = result.optimizer;

  const std::string path =
      (std::filesystem::temp_directory_path() / "mihash_ckpt.json").string();
  save_checkpoint(path, ckpt);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(params_equal(loaded.params, result.params));
  CHECK(loaded.epoch == cfg.t_max);
  CHECK(loaded.has_optimizer);
  CHECK(params_equal(loaded.optimizer.velocity, result.optimizer.velocity));
  CHECK(loaded.config.seed == cfg.seed);
  CHECK(loaded.params.code_bits == cfg.code_bits);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint resume continues training bit-for-bit") {
  const BagDataset ds = small_dataset();
  TrainConfig cfg = small_config();
  cfg.t_max = 6;
  const auto dir = std::filesystem::temp_directory_path() / "mihash_resume_ckpts";
  std::filesystem::remove_all(dir);
  cfg.checkpoint_dir = dir.string();
  cfg.checkpoint_interval = 3;

  const TrainResult full = train(ds, cfg);
  const Checkpoint middle = load_checkpoint((dir / "ckpt-epoch-3").string());
  REQUIRE(middle.epoch == 3);
  REQUIRE(middle.has_optimizer);

  // Resuming must not rewrite checkpoints into the same dir to keep the
  // comparison clean.
  TrainConfig resume_cfg = cfg;
  resume_cfg.checkpoint_dir.clear();
  const TrainResult resumed =
      resume_train(ds, resume_cfg, middle.params, middle.optimizer, middle.epoch + 1);

  CHECK(params_equal(resumed.params, full.params));
  std::filesystem::remove_all(dir);
}
