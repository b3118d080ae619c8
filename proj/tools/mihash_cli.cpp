// Command-line front end: data synthesis, training, gradient verification,
// indexing, querying, evaluation and the ablation sweep.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mihash/checkpoint.hpp"
#include "mihash/data.hpp"
#include "mihash/encode.hpp"
#include "mihash/gradcheck.hpp"
#include "mihash/index.hpp"
#include "mihash/trainer.hpp"

namespace {

using nlohmann::json;
using namespace mihash;

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailure = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FNV-1a over the file bytes; stable fingerprint for manifests.
std::string file_fingerprint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw UsageError("cannot read '" + path + "' for fingerprinting");
  }
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 14];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Every command drops a manifest beside its primary artifact: resolved
// config, input fingerprints, produced paths and wall-clock timings. Timing
// and timestamps live here, never in the artifacts themselves.
struct Manifest {
  std::string command;
  json config;
  json inputs = json::object();
  std::vector<std::string> artifacts;
  json timings = json::object();
  json extra = json::object();

  void add_input(const std::string& name, const std::string& path) {
    inputs[name] = {{"path", path}, {"fingerprint", file_fingerprint(path)}};
  }

  void write(const std::string& path) const {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["inputs"] = inputs;
    j["artifacts"] = artifacts;
    j["timings"] = timings;
    if (!extra.empty()) j["details"] = extra;
    std::ofstream f(path, std::ios::binary);
    if (!f) {
      throw UsageError("cannot write manifest '" + path + "'");
    }
    f << j.dump(2) << "\n";
  }
};

std::string default_manifest_path(const std::string& artifact) {
  return artifact + ".manifest.json";
}

BagDataset load_dataset_or_usage(const std::string& path) {
  try {
    return load_bags(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

Checkpoint load_checkpoint_or_usage(const std::string& path) {
  try {
    return load_checkpoint(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataArgs {
  SyntheticSpec spec;
  std::uint64_t seed = 1;
  double noise = 0.0;
  double train_fraction = 0.8;
  std::string out;
  std::string test_out;  // optional split companion
  std::string manifest;
};

int run_gen_data(const GenDataArgs& args) {
  Stopwatch watch;
  Rng gen_rng = Rng(args.seed).fork(1);
  BagDataset ds = generate_synthetic(gen_rng, args.spec);
  if (args.noise > 0.0) {
    Rng noise_rng = Rng(args.seed).fork(2);
    ds = inject_label_noise(ds, noise_rng, args.noise);
  }

  Manifest manifest;
  manifest.command = "gen-data";
  manifest.config = {{"classes", args.spec.classes},
                     {"bags_per_class", args.spec.bags_per_class},
                     {"dim", args.spec.dim},
                     {"bag_min", args.spec.bag_min},
                     {"bag_max", args.spec.bag_max},
                     {"witness_rate", args.spec.witness_rate},
                     {"background_spread", args.spec.background_spread},
                     {"concept_radius", args.spec.concept_radius},
                     {"witness_spread", args.spec.witness_spread},
                     {"noise", args.noise},
                     {"seed", args.seed}};

  if (args.test_out.empty()) {
    save_bags(ds, args.out);
    manifest.artifacts.push_back(args.out);
  } else {
    Rng split_rng = Rng(args.seed).fork(3);
    const Split sp = split(ds, split_rng, args.train_fraction);
    save_bags(sp.train, args.out);
    save_bags(sp.test, args.test_out);
    manifest.config["train_fraction"] = args.train_fraction;
    manifest.artifacts.push_back(args.out);
    manifest.artifacts.push_back(args.test_out);
  }

  manifest.timings["total_seconds"] = watch.seconds();
  for (const auto& artifact : manifest.artifacts) {
    manifest.extra["fingerprints"][artifact] = file_fingerprint(artifact);
  }
  manifest.write(args.manifest.empty() ? default_manifest_path(args.out)
                                       : args.manifest);
  if (args.test_out.empty()) {
    std::cout << "wrote " << ds.size() << " bags to " << args.out << "\n";
  } else {
    std::cout << "wrote " << ds.size() << " bags split across " << args.out << " and "
              << args.test_out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string log;
  std::string manifest;
  std::string config_file;
  TrainConfig cfg;
};

int run_train(const TrainArgs& args) {
  Stopwatch watch;
  const BagDataset ds = load_dataset_or_usage(args.data);

  TrainConfig cfg = args.cfg;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  const TrainResult result = train(ds, cfg);

  Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.config = cfg;
  ckpt.epoch = cfg.t_max;
  ckpt.has_optimizer = true;
  ckpt.optimizer = result.optimizer;
  save_checkpoint(args.out, ckpt);

  Manifest manifest;
  manifest.command = "train";
  manifest.config = config_to_json(cfg);
  manifest.add_input("data", args.data);
  manifest.artifacts.push_back(args.out);
  if (!args.log.empty()) {
    write_train_log(result.log, args.log);
    manifest.artifacts.push_back(args.log);
  }
  manifest.timings["total_seconds"] = watch.seconds();
  if (!result.log.empty()) {
    manifest.extra["final_loss"] = result.log.back().loss;
    manifest.extra["final_quant_error"] = result.log.back().quant_error;
  }
  manifest.write(args.manifest.empty() ? default_manifest_path(args.out)
                                       : args.manifest);
  std::cout << "trained " << cfg.t_max << " epochs; checkpoint at " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradCheckArgs {
  double eps = 1e-4;
  double tolerance = 1e-4;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 6};
  bool corrupt = false;
};

int run_gradcheck_cmd(const GradCheckArgs& args) {
  std::map<std::string, double> block_worst;
  double worst = 0.0;
  std::string worst_where;

  for (const PoolMode pool : {PoolMode::Max, PoolMode::Mean}) {
    for (const RobustKind robust : {RobustKind::Huber, RobustKind::L2}) {
      for (const std::uint64_t seed : args.seeds) {
        GradCheckSpec spec;
        spec.pool = pool;
        spec.robust = robust;
        spec.seed = seed;
        spec.eps = args.eps;
        spec.tolerance = args.tolerance;
        spec.corrupt = args.corrupt;
        const GradCheckReport report = run_gradcheck(spec);
        for (const auto& [block, err] : report.block_errors) {
          block_worst[block] = std::max(block_worst[block], err);
        }
        if (report.max_rel_error > worst) {
          worst = report.max_rel_error;
          worst_where = "pool=" + to_string(pool) + " robust=" + to_string(robust) +
                        " seed=" + std::to_string(seed) + " block=" +
                        report.worst_block + "[" + std::to_string(report.worst_index) +
                        "]";
        }
      }
    }
  }

  for (const auto& [block, err] : block_worst) {
    std::printf("block %-16s max_rel_error %.3e\n", block.c_str(), err);
  }
  const bool pass = worst <= args.tolerance;
  std::printf("gradcheck: max relative error %.3e at %s (tolerance %.1e): %s\n", worst,
              worst_where.c_str(), args.tolerance, pass ? "PASS" : "FAIL");
  return pass ? kExitOk : kExitVerificationFailure;
}

// ---------------------------------------------------------------------------
// index / query / eval
// ---------------------------------------------------------------------------

struct IndexArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string mode = "bag_code";
  std::string manifest;
};

int run_index(const IndexArgs& args) {
  Stopwatch watch;
  const Checkpoint ckpt = load_checkpoint_or_usage(args.checkpoint);
  const BagDataset ds = load_dataset_or_usage(args.data);
  if (ds.dim != ckpt.params.input_dim()) {
    throw UsageError("dataset dimension " + std::to_string(ds.dim) +
                     " does not match checkpoint input dimension " +
                     std::to_string(ckpt.params.input_dim()));
  }
  const IndexMode mode = index_mode_from_string(args.mode);
  const auto entries = encode_bags(ckpt.params, ds, ckpt.config.pool, mode);
  const RetrievalIndex index = build_index(entries, mode);
  save_index(index, args.out);

  Manifest manifest;
  manifest.command = "index";
  manifest.config = {{"mode", args.mode}, {"K", index.code_bits()}};
  manifest.add_input("checkpoint", args.checkpoint);
  manifest.add_input("data", args.data);
  manifest.artifacts.push_back(args.out);
  manifest.timings["total_seconds"] = watch.seconds();
  manifest.write(args.manifest.empty() ? default_manifest_path(args.out)
                                       : args.manifest);
  std::cout << "indexed " << index.size() << " bags (" << args.mode << ", K="
            << index.code_bits() << ") to " << args.out << "\n";
  return kExitOk;
}

void check_code_bits(const Checkpoint& ckpt, const RetrievalIndex& index) {
  if (ckpt.params.code_bits != index.code_bits()) {
    throw UsageError("checkpoint produces " + std::to_string(ckpt.params.code_bits) +
                     "-bit codes but the index stores " +
                     std::to_string(index.code_bits()) + "-bit codes");
  }
}

struct QueryArgs {
  std::string index_path;
  std::string checkpoint;
  std::string data;
  std::string bag_id;
  std::size_t k = 5;
};

int run_query(const QueryArgs& args) {
  const Checkpoint ckpt = load_checkpoint_or_usage(args.checkpoint);
  const RetrievalIndex index = [&] {
    try {
      return load_index(args.index_path);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }();
  check_code_bits(ckpt, index);
  const BagDataset ds = load_dataset_or_usage(args.data);

  auto queries = encode_queries(ckpt.params, ds, ckpt.config.pool, index.mode());
  bool found = args.bag_id.empty();
  for (const auto& q : queries) {
    if (!args.bag_id.empty() && q.id != args.bag_id) continue;
    found = true;
    const auto hits = query_topk(index, q.codes, args.k, &q.id);
    for (std::size_t r = 0; r < hits.size(); ++r) {
      std::cout << q.id << '\t' << (r + 1) << '\t' << hits[r].id << '\t'
                << hits[r].distance << '\n';
    }
  }
  if (!found) {
    throw UsageError("bag id '" + args.bag_id + "' not present in " + args.data);
  }
  return kExitOk;
}

struct EvalArgs {
  std::string index_path;
  std::string checkpoint;
  std::string data;
  std::string report = "eval-report.csv";
  std::string pr = "eval-pr.csv";
  std::string manifest;
};

int run_eval(const EvalArgs& args) {
  Stopwatch watch;
  const Checkpoint ckpt = load_checkpoint_or_usage(args.checkpoint);
  const RetrievalIndex index = [&] {
    try {
      return load_index(args.index_path);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }();
  check_code_bits(ckpt, index);
  const BagDataset ds = load_dataset_or_usage(args.data);

  const auto queries = encode_queries(ckpt.params, ds, ckpt.config.pool, index.mode());
  const EvalReport report = evaluate(index, queries);
  write_eval_report(report, args.report);
  write_pr_points(report.pr_points, args.pr);

  Manifest manifest;
  manifest.command = "eval";
  manifest.config = {{"mode", to_string(index.mode())}, {"K", index.code_bits()}};
  manifest.add_input("checkpoint", args.checkpoint);
  manifest.add_input("index", args.index_path);
  manifest.add_input("data", args.data);
  manifest.artifacts.push_back(args.report);
  manifest.artifacts.push_back(args.pr);
  manifest.timings["total_seconds"] = watch.seconds();
  manifest.write(args.manifest.empty() ? default_manifest_path(args.report)
                                       : args.manifest);

  std::printf("nnca %.4f map %.4f latency_p50 %.1fus\n", report.nnca,
              report.mean_average_precision, report.latency_p50_us);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateVariant {
  std::string name;
  RobustKind robust = RobustKind::Huber;
  TradeoffKind tradeoff = TradeoffKind::Decay;
  PoolMode pool = PoolMode::Max;
  bool zero_quant = false;
  bool binarized = true;
};

const std::vector<AblateVariant>& all_variants() {
  static const std::vector<AblateVariant> variants{
      {"l2_equal", RobustKind::L2, TradeoffKind::Equal, PoolMode::Max, false, true},
      {"l2_decay", RobustKind::L2, TradeoffKind::Decay, PoolMode::Max, false, true},
      {"huber_equal", RobustKind::Huber, TradeoffKind::Equal, PoolMode::Max, false, true},
      {"l2_no_si", RobustKind::L2, TradeoffKind::NoSi, PoolMode::Max, false, true},
      {"huber_no_si", RobustKind::Huber, TradeoffKind::NoSi, PoolMode::Max, false, true},
      {"huber_decay_mean", RobustKind::Huber, TradeoffKind::Decay, PoolMode::Mean, false,
       true},
      {"huber_decay_max", RobustKind::Huber, TradeoffKind::Decay, PoolMode::Max, false,
       true},
      {"no_quant", RobustKind::Huber, TradeoffKind::Decay, PoolMode::Max, true, true},
      {"non_binarized", RobustKind::Huber, TradeoffKind::Decay, PoolMode::Max, false,
       false},
  };
  return variants;
}

struct AblateArgs {
  std::string data;
  std::string out;
  std::string manifest;
  std::vector<std::string> variant_names;  // empty: full grid
  std::size_t seeds = 3;
  double train_fraction = 0.8;
  TrainConfig cfg;  // template (epochs, K, lr, ...), per-variant fields overridden
};

double median_of(std::vector<double> v) {
  return median(std::move(v));
}

int run_ablate(const AblateArgs& args) {
  Stopwatch watch;
  const BagDataset ds = load_dataset_or_usage(args.data);

  std::vector<AblateVariant> variants;
  if (args.variant_names.empty()) {
    variants = all_variants();
  } else {
    for (const auto& name : args.variant_names) {
      bool known = false;
      for (const auto& v : all_variants()) {
        if (v.name == name) {
          variants.push_back(v);
          known = true;
          break;
        }
      }
      if (!known) {
        throw UsageError("unknown ablation variant '" + name + "'");
      }
    }
  }

  Manifest manifest;
  manifest.command = "ablate";
  manifest.config = config_to_json(args.cfg);
  manifest.config["seeds"] = args.seeds;
  manifest.config["train_fraction"] = args.train_fraction;
  manifest.add_input("data", args.data);
  auto& runs = manifest.extra["runs"] = json::array();

  std::ofstream table(args.out, std::ios::binary);
  if (!table) {
    throw UsageError("cannot write '" + args.out + "'");
  }
  table << "variant,robust,tradeoff,pool,lambda_q,binarized,seeds,nnca_median\n";

  for (const auto& variant : variants) {
    std::vector<double> scores;
    for (std::size_t s = 0; s < args.seeds; ++s) {
      const std::uint64_t run_seed = args.cfg.seed + s;
      TrainConfig cfg = args.cfg;
      cfg.seed = run_seed;
      cfg.robust = variant.robust;
      cfg.tradeoff = variant.tradeoff;
      cfg.pool = variant.pool;
      if (variant.zero_quant) cfg.lambda_q = 0.0;

      Rng split_rng = Rng(run_seed).fork(7);
      const Split sp = split(ds, split_rng, args.train_fraction);
      const TrainResult result = train(sp.train, cfg);

      double score = 0.0;
      if (variant.binarized) {
        const auto entries =
            encode_bags(result.params, sp.train, cfg.pool, IndexMode::BagCode);
        const RetrievalIndex index = build_index(entries, IndexMode::BagCode);
        const auto queries =
            encode_queries(result.params, sp.test, cfg.pool, IndexMode::BagCode);
        score = nnca(index, queries);
      } else {
        const auto db = encode_dense(result.params, sp.train, cfg.pool);
        const auto queries = encode_dense(result.params, sp.test, cfg.pool);
        score = nnca_dense(db, queries);
      }
      scores.push_back(score);
      runs.push_back({{"variant", variant.name}, {"seed", run_seed}, {"nnca", score}});
    }
    table << variant.name << ',' << to_string(variant.robust) << ','
          << to_string(variant.tradeoff) << ',' << to_string(variant.pool) << ','
          << (variant.zero_quant ? 0.0 : args.cfg.lambda_q) << ','
          << (variant.binarized ? "yes" : "no") << ',' << args.seeds << ','
          << median_of(scores) << '\n';
    std::printf("%-18s nnca_median %.4f\n", variant.name.c_str(), median_of(scores));
  }
  table.close();

  manifest.artifacts.push_back(args.out);
  manifest.timings["total_seconds"] = watch.seconds();
  manifest.write(args.manifest.empty() ? default_manifest_path(args.out)
                                       : args.manifest);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

// Flags beat the config file, which beats the built-in defaults.
void overlay_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw UsageError("cannot read config file '" + path + "'");
  }
  json j;
  try {
    f >> j;
    cfg = config_from_json(j);
  } catch (const std::exception& e) {
    throw UsageError("config file '" + path + "': " + e.what());
  }
}

void add_train_config_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--epochs", cfg.t_max, "training epochs (t_max)");
  cmd->add_option("--batch-size", cfg.batch_size, "bags per mini-batch");
  cmd->add_option("--lr0", cfg.lr0, "initial learning rate");
  cmd->add_option("--lr-decay", cfg.lr_decay, "per-epoch learning rate factor");
  cmd->add_option("--momentum", cfg.momentum, "SGD momentum");
  cmd->add_option("--lambda-q", cfg.lambda_q, "quantization loss weight");
  cmd->add_option("--lambda-w", cfg.lambda_w, "weight decay");
  cmd->add_option_function<std::string>(
         "--pool", [&cfg](const std::string& s) { cfg.pool = pool_mode_from_string(s); },
         "instance pooling: max|mean")
      ->check(CLI::IsMember({"max", "mean"}));
  cmd->add_option_function<std::string>(
         "--robust",
         [&cfg](const std::string& s) { cfg.robust = robust_from_string(s); },
         "residual norm: huber|l2")
      ->check(CLI::IsMember({"huber", "l2"}));
  cmd->add_option_function<std::string>(
         "--tradeoff",
         [&cfg](const std::string& s) { cfg.tradeoff = tradeoff_from_string(s); },
         "loss trade-off policy: decay|equal|no_si")
      ->check(CLI::IsMember({"decay", "equal", "no_si"}));
  cmd->add_option_function<std::string>(
         "--scale-refresh",
         [&cfg](const std::string& s) { cfg.scale_refresh = scale_refresh_from_string(s); },
         "threshold re-estimation: batch|epoch")
      ->check(CLI::IsMember({"batch", "epoch"}));
  cmd->add_option("--seed", cfg.seed, "random seed");
  cmd->add_option("--hidden", cfg.hidden_dims, "encoder hidden widths");
  cmd->add_option("--dz", cfg.embed_dim, "embedding width");
  cmd->add_option("-K,--code-bits", cfg.code_bits, "hash code length in bits");
  cmd->add_option("--checkpoint-interval", cfg.checkpoint_interval,
                  "checkpoint every n epochs (0: only final)");
  cmd->add_option("--checkpoint-dir", cfg.checkpoint_dir,
                  "directory for periodic checkpoints");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bag-level hash learning and retrieval"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "synthesize a weakly labeled bag dataset");
  gen->add_option("--out", gen_args.out, "output bag file")->required();
  gen->add_option("--classes", gen_args.spec.classes, "number of classes");
  gen->add_option("--bags-per-class", gen_args.spec.bags_per_class, "bags per class");
  gen->add_option("--dim", gen_args.spec.dim, "feature dimension");
  gen->add_option("--bag-min", gen_args.spec.bag_min, "minimum bag size");
  gen->add_option("--bag-max", gen_args.spec.bag_max, "maximum bag size");
  gen->add_option("--witness-rate", gen_args.spec.witness_rate,
                  "probability an extra instance carries the concept");
  gen->add_option("--background-spread", gen_args.spec.background_spread,
                  "background distribution spread");
  gen->add_option("--concept-radius", gen_args.spec.concept_radius,
                  "distance of concept means from the origin");
  gen->add_option("--witness-spread", gen_args.spec.witness_spread,
                  "witness noise around the concept mean");
  gen->add_option("--noise", gen_args.noise, "fraction of bag labels to flip");
  gen->add_option("--seed", gen_args.seed, "random seed");
  gen->add_option("--test-out", gen_args.test_out,
                  "also write a stratified held-out split to this file");
  gen->add_option("--train-fraction", gen_args.train_fraction,
                  "train fraction when --test-out is given");
  gen->add_option("--manifest", gen_args.manifest, "manifest path");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a hashing model");
  train_cmd->add_option("--data", train_args.data, "training bag file")->required();
  train_cmd->add_option("--out", train_args.out, "checkpoint output path")->required();
  train_cmd->add_option("--log", train_args.log, "per-epoch training log (csv)");
  train_cmd->add_option("--manifest", train_args.manifest, "manifest path");
  CLI::Option* config_opt =
      train_cmd->add_option("--config", train_args.config_file, "config file (json)");
  add_train_config_flags(train_cmd, train_args.cfg);
  // Config file first, then explicit flags on top of it.
  train_cmd->callback([&] {
    if (config_opt->count() > 0) {
      TrainConfig from_file = train_args.cfg;
      overlay_config_file(from_file, train_args.config_file);
      // Re-apply explicit flags by re-parsing would be heavy; instead flags
      // already wrote into cfg, so merge: start from file config and copy
      // back fields whose flags were passed.
      TrainConfig merged = from_file;
      const auto take_if = [&](const char* flag, auto member) {
        if (train_cmd->count(flag) > 0) {
          merged.*member = train_args.cfg.*member;
        }
      };
      take_if("--epochs", &TrainConfig::t_max);
      take_if("--batch-size", &TrainConfig::batch_size);
      take_if("--lr0", &TrainConfig::lr0);
      take_if("--lr-decay", &TrainConfig::lr_decay);
      take_if("--momentum", &TrainConfig::momentum);
      take_if("--lambda-q", &TrainConfig::lambda_q);
      take_if("--lambda-w", &TrainConfig::lambda_w);
      take_if("--pool", &TrainConfig::pool);
      take_if("--robust", &TrainConfig::robust);
      take_if("--tradeoff", &TrainConfig::tradeoff);
      take_if("--scale-refresh", &TrainConfig::scale_refresh);
      take_if("--seed", &TrainConfig::seed);
      take_if("--hidden", &TrainConfig::hidden_dims);
      take_if("--dz", &TrainConfig::embed_dim);
      take_if("--code-bits", &TrainConfig::code_bits);
      take_if("--checkpoint-interval", &TrainConfig::checkpoint_interval);
      take_if("--checkpoint-dir", &TrainConfig::checkpoint_dir);
      train_args.cfg = merged;
    }
  });

  GradCheckArgs grad_args;
  CLI::App* grad = app.add_subcommand("gradcheck",
                                      "verify analytic gradients by central differences");
  grad->add_option("--eps", grad_args.eps, "finite-difference step");
  grad->add_option("--tolerance", grad_args.tolerance, "max relative error allowed");
  grad->add_option("--seeds", grad_args.seeds, "seeds to test");
  grad->add_flag("--corrupt", grad_args.corrupt,
                 "test hook: corrupt one gradient entry (must fail)");

  IndexArgs index_args;
  CLI::App* index_cmd = app.add_subcommand("index", "build a retrieval index");
  index_cmd->add_option("--checkpoint", index_args.checkpoint, "trained checkpoint")
      ->required();
  index_cmd->add_option("--data", index_args.data, "bag file to index")->required();
  index_cmd->add_option("--out", index_args.out, "index output path")->required();
  index_cmd->add_option("--mode", index_args.mode, "bag_code|instance_codes")
      ->check(CLI::IsMember({"bag_code", "instance_codes"}));
  index_cmd->add_option("--manifest", index_args.manifest, "manifest path");

  QueryArgs query_args;
  CLI::App* query_cmd = app.add_subcommand("query", "rank index entries for query bags");
  query_cmd->add_option("--index", query_args.index_path, "index file")->required();
  query_cmd->add_option("--checkpoint", query_args.checkpoint, "trained checkpoint")
      ->required();
  query_cmd->add_option("--data", query_args.data, "bag file with query bags")
      ->required();
  query_cmd->add_option("--bag-id", query_args.bag_id,
                        "query only this bag (default: all bags in the file)");
  query_cmd->add_option("-k", query_args.k, "neighbors to return");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "retrieval quality report");
  eval_cmd->add_option("--index", eval_args.index_path, "index file")->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "trained checkpoint")
      ->required();
  eval_cmd->add_option("--data", eval_args.data, "bag file with labeled queries")
      ->required();
  eval_cmd->add_option("--report", eval_args.report, "metrics output (csv)");
  eval_cmd->add_option("--pr", eval_args.pr, "precision-recall output (csv)");
  eval_cmd->add_option("--manifest", eval_args.manifest, "manifest path");

  AblateArgs ablate_args;
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "train and score the ablation variant grid");
  ablate_cmd->add_option("--data", ablate_args.data, "bag file")->required();
  ablate_cmd->add_option("--out", ablate_args.out, "variant table output (csv)")
      ->required();
  ablate_cmd->add_option("--variant", ablate_args.variant_names,
                         "variant names (default: full grid)");
  ablate_cmd->add_option("--seeds", ablate_args.seeds, "seeds per variant");
  ablate_cmd->add_option("--train-fraction", ablate_args.train_fraction,
                         "per-seed stratified split fraction");
  ablate_cmd->add_option("--manifest", ablate_args.manifest, "manifest path");
  add_train_config_flags(ablate_cmd, ablate_args.cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (grad->parsed()) return run_gradcheck_cmd(grad_args);
    if (index_cmd->parsed()) return run_index(index_args);
    if (query_cmd->parsed()) return run_query(query_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (ablate_cmd->parsed()) return run_ablate(ablate_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerificationFailure;
  }
  return kExitUsage;
}
