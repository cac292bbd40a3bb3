#pragma once

#include "dynalloc/policy_net.hpp"

namespace dynalloc::policy {

enum class Direction { ascend, descend };

/// theta + alpha * g (or minus, for descent).
void sgd_step(MlpParams& params, const MlpParams& grad, double alpha, Direction dir);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
public:
  Adam(const MlpParams& shape, AdamConfig cfg);

  void step(MlpParams& params, const MlpParams& grad, Direction dir);
  std::size_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

private:
  AdamConfig cfg_;
  Vector m_;
  Vector v_;
  std::size_t t_ = 0;
};

}  // namespace dynalloc::policy
