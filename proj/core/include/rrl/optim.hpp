#pragma once

#include <string>
#include <vector>

#include "rrl/autodiff.hpp"

namespace rrl {

struct OptimizerConfig {
  std::string name = "adam";
  double learning_rate = 3e-5;
  int epochs = 40;
  double grad_clip = 1.0;  // global norm; <= 0 disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over an explicit, ordered parameter list. Moment buffers are indexed
/// by registration order, so identical registration yields identical
/// trajectories.
class Adam {
 public:
  Adam(std::vector<ad::Var> params, const OptimizerConfig& cfg);

  /// Clips the global gradient norm (if enabled), applies one update and
  /// clears gradients. Returns the pre-clip global norm.
  double step();
  void zero_grad();
  const std::vector<ad::Var>& params() const { return params_; }

 private:
  std::vector<ad::Var> params_;
  OptimizerConfig cfg_;
  std::vector<ad::Mat> m_, v_;
  long t_ = 0;
};

}  // namespace rrl
