#ifndef MIHASH_GRADCHECK_HPP
#define MIHASH_GRADCHECK_HPP

#include <cstdint>

#include "mihash/net.hpp"
#include "mihash/trainer.hpp"

namespace mihash {

// Self-contained verification of the full composite-loss gradient on a tiny
// generated batch: analytic backward against central differences on every
// parameter.
struct GradCheckSpec {
  std::size_t input_dim = 5;
  std::vector<std::size_t> hidden_dims{8};
  std::size_t embed_dim = 6;
  std::size_t code_bits = 8;
  std::size_t classes = 2;
  std::size_t bags_per_class = 3;
  std::size_t bag_min = 1;
  std::size_t bag_max = 4;
  PoolMode pool = PoolMode::Max;
  RobustKind robust = RobustKind::Huber;
  double lambda_mi = 0.7;
  double lambda_si = 0.3;
  double lambda_q = 0.05;
  double lambda_w = 0.001;
  double eps = 1e-4;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  bool corrupt = false;  // test hook: bumps one analytic entry by +1
};

GradCheckReport run_gradcheck(const GradCheckSpec& spec);

}  // namespace mihash

#endif  // MIHASH_GRADCHECK_HPP
