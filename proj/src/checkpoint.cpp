#include "mihash/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace mihash {

namespace {

using nlohmann::json;

json dense_to_json(const Matrix& weight, const std::vector<double>& bias) {
  json j;
  j["rows"] = weight.rows;
  j["cols"] = weight.cols;
  j["weights"] = weight.data;
  j["bias"] = bias;
  return j;
}

void dense_from_json(const json& j, Matrix& weight, std::vector<double>& bias) {
  weight.rows = j.at("rows").get<std::size_t>();
  weight.cols = j.at("cols").get<std::size_t>();
  weight.data = j.at("weights").get<std::vector<double>>();
  bias = j.at("bias").get<std::vector<double>>();
  if (weight.data.size() != weight.rows * weight.cols) {
    throw std::runtime_error("checkpoint: weight block size does not match its shape");
  }
  if (bias.size() != weight.rows) {
    throw std::runtime_error("checkpoint: bias length does not match rows");
  }
}

}  // namespace

json config_to_json(const TrainConfig& cfg) {
  json j;
  j["t_max"] = cfg.t_max;
  j["batch_size"] = cfg.batch_size;
  j["lr0"] = cfg.lr0;
  j["lr_decay"] = cfg.lr_decay;
  j["momentum"] = cfg.momentum;
  j["lambda_q"] = cfg.lambda_q;
  j["lambda_w"] = cfg.lambda_w;
  j["pool"] = to_string(cfg.pool);
  j["robust"] = to_string(cfg.robust);
  j["tradeoff"] = to_string(cfg.tradeoff);
  j["scale_refresh"] = to_string(cfg.scale_refresh);
  j["seed"] = cfg.seed;
  j["hidden_dims"] = cfg.hidden_dims;
  j["dz"] = cfg.embed_dim;
  j["K"] = cfg.code_bits;
  j["checkpoint_interval"] = cfg.checkpoint_interval;
  j["checkpoint_dir"] = cfg.checkpoint_dir;
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  auto set = [&j](const char* key, auto& field) {
    if (j.contains(key)) {
      field = j.at(key).get<std::decay_t<decltype(field)>>();
    }
  };
  set("t_max", cfg.t_max);
  set("batch_size", cfg.batch_size);
  set("lr0", cfg.lr0);
  set("lr_decay", cfg.lr_decay);
  set("momentum", cfg.momentum);
  set("lambda_q", cfg.lambda_q);
  set("lambda_w", cfg.lambda_w);
  if (j.contains("pool")) cfg.pool = pool_mode_from_string(j.at("pool"));
  if (j.contains("robust")) cfg.robust = robust_from_string(j.at("robust"));
  if (j.contains("tradeoff")) cfg.tradeoff = tradeoff_from_string(j.at("tradeoff"));
  if (j.contains("scale_refresh")) {
    cfg.scale_refresh = scale_refresh_from_string(j.at("scale_refresh"));
  }
  set("seed", cfg.seed);
  set("hidden_dims", cfg.hidden_dims);
  set("dz", cfg.embed_dim);
  set("K", cfg.code_bits);
  set("checkpoint_interval", cfg.checkpoint_interval);
  set("checkpoint_dir", cfg.checkpoint_dir);
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json j;
  j["version"] = 1;
  j["K"] = ckpt.params.code_bits;
  j["pool_mode"] = to_string(ckpt.config.pool);
  j["epoch"] = ckpt.epoch;

  auto& layers = j["layers"] = json::array();
  for (const auto& layer : ckpt.params.encoder) {
    json jl = dense_to_json(layer.weight, layer.bias);
    jl["activation"] = to_string(layer.activation);
    layers.push_back(std::move(jl));
  }
  j["mi_head"] = dense_to_json(ckpt.params.mi_head.weight, ckpt.params.mi_head.bias);
  j["si_head"] = dense_to_json(ckpt.params.si_head.weight, ckpt.params.si_head.bias);
  j["train_config"] = config_to_json(ckpt.config);

  if (ckpt.has_optimizer) {
    json vel;
    visit_params(ckpt.optimizer.velocity,
                 [&vel](const std::string& name, const std::vector<double>& v) {
                   vel[name] = v;
                 });
    j["optimizer"] = std::move(vel);
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("save_checkpoint: cannot open " + path);
  }
  f << j.dump(2) << "\n";
  if (!f) {
    throw std::runtime_error("save_checkpoint: write failed for " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("load_checkpoint: cannot open " + path);
  }
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  if (j.at("version").get<int>() != 1) {
    throw std::runtime_error("load_checkpoint: unsupported version");
  }
  ckpt.config = config_from_json(j.at("train_config"));
  ckpt.epoch = j.value("epoch", std::size_t{0});
  ckpt.params.code_bits = j.at("K").get<std::size_t>();

  for (const auto& jl : j.at("layers")) {
    DenseLayer layer;
    dense_from_json(jl, layer.weight, layer.bias);
    layer.activation = activation_from_string(jl.at("activation"));
    ckpt.params.encoder.push_back(std::move(layer));
  }
  if (ckpt.params.encoder.empty()) {
    throw std::runtime_error("load_checkpoint: no encoder layers");
  }
  dense_from_json(j.at("mi_head"), ckpt.params.mi_head.weight, ckpt.params.mi_head.bias);
  dense_from_json(j.at("si_head"), ckpt.params.si_head.weight, ckpt.params.si_head.bias);

  if (j.contains("optimizer")) {
    ckpt.has_optimizer = true;
    ckpt.optimizer.velocity = zeros_like(ckpt.params);
    const json& vel = j.at("optimizer");
    visit_params(ckpt.optimizer.velocity,
                 [&vel](const std::string& name, std::vector<double>& v) {
                   auto loaded = vel.at(name).get<std::vector<double>>();
                   if (loaded.size() != v.size()) {
                     throw std::runtime_error(
                         "load_checkpoint: optimizer block '" + name +
                         "' does not match the parameter shapes");
                   }
                   v = std::move(loaded);
                 });
  }
  return ckpt;
}

}  // namespace mihash
