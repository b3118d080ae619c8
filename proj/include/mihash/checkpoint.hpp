#ifndef MIHASH_CHECKPOINT_HPP
#define MIHASH_CHECKPOINT_HPP

#include <cstddef>
#include <string>

#include "mihash/net.hpp"
#include "mihash/trainer.hpp"

#include <json.hpp>

namespace mihash {

// Model snapshot: parameters with explicit shapes, the full training
// configuration, the number of completed epochs, and (optionally) the
// optimizer velocity so training can continue bit-for-bit.
struct Checkpoint {
  ModelParams params;
  TrainConfig config;
  std::size_t epoch = 0;
  bool has_optimizer = false;
  OptimizerState optimizer;
};

// JSON text with round-trip-exact doubles.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

}  // namespace mihash

#endif  // MIHASH_CHECKPOINT_HPP
