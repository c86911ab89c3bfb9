#pragma once

#include "vdgr/params.hpp"

#include <vector>

namespace vdgr {

/// Linear warm-up from 0 to `max_rate` over `warmup_steps`, then linear decay
/// to `min_rate` at `total_steps`. Without warm-up the rate starts at the max.
struct LinearSchedule {
  double min_rate = 0.0;
  double max_rate = 0.0;
  int warmup_steps = 0;
  int total_steps = 1;
  bool warmup = true;

  double rate(int step) const;
};

/// Warm-up length used by the trainer: round(fraction * total), at least one
/// step whenever warm-up is on.
int warmup_steps_for(int total_steps, double fraction);

/// Adam with a separate learning rate per parameter group.
class Adam {
public:
  explicit Adam(ParameterSet& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(double backbone_rate, double gnn_rate);
  int steps_taken() const { return t_; }

private:
  ParameterSet& params_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace vdgr
