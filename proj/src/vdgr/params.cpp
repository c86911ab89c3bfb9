#include "vdgr/params.hpp"

#include "vdgr/error.hpp"

#include <cmath>

namespace vdgr {

Parameter& ParameterSet::add(const std::string& name, ParamGroup group, int rows, int cols) {
  require(find(name) == nullptr, "duplicate parameter name " + name);
  require(rows > 0 && cols > 0, "parameter " + name + " needs a positive shape");
  return params_.emplace_back(name, group, rows, cols);
}

Parameter& ParameterSet::weight(const std::string& name, ParamGroup group, int rows, int cols, Rng& rng) {
  Parameter& p = add(name, group, rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-bound, bound);
  return p;
}

Parameter& ParameterSet::zeros(const std::string& name, ParamGroup group, int rows, int cols) {
  return add(name, group, rows, cols);
}

Parameter& ParameterSet::ones(const std::string& name, ParamGroup group, int rows, int cols) {
  Parameter& p = add(name, group, rows, cols);
  p.value.setOnes();
  return p;
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace vdgr
