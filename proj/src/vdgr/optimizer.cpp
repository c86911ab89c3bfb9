#include "vdgr/optimizer.hpp"

#include "vdgr/error.hpp"

#include <algorithm>
#include <cmath>

namespace vdgr {

double LinearSchedule::rate(int step) const {
  require(total_steps >= 1 && step >= 0, "schedule: bad step");
  if (warmup && step < warmup_steps) return max_rate * static_cast<double>(step) / warmup_steps;
  const int start = warmup ? warmup_steps : 0;
  if (total_steps <= start) return max_rate;
  const double frac = std::clamp(static_cast<double>(step - start) / (total_steps - start), 0.0, 1.0);
  return max_rate + (min_rate - max_rate) * frac;
}

int warmup_steps_for(int total_steps, double fraction) {
  if (total_steps <= 0) return 0;
  return std::max(1, static_cast<int>(std::lround(fraction * total_steps)));
}

Adam::Adam(ParameterSet& params, double beta1, double beta2, double eps)
    : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Parameter& p : params_.all()) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step(double backbone_rate, double gnn_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  auto& all = params_.all();
  for (std::size_t i = 0; i < all.size(); ++i) {
    Parameter& p = all[i];
    const double lr = p.group == ParamGroup::Gnn ? gnn_rate : backbone_rate;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    if (lr == 0.0) continue;
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

}  // namespace vdgr
