#pragma once

#include "vdgr/autograd.hpp"
#include "vdgr/rng.hpp"

#include <deque>
#include <string>
#include <vector>

namespace vdgr {

using ad::Matrix;
using ad::ParamGroup;
using ad::Parameter;

/// Owns parameters with stable addresses, in creation order. Creation order is
/// the serialization order, so it must be deterministic.
class ParameterSet {
public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  /// Weight matrix drawn from U(-1/sqrt(rows), 1/sqrt(rows)).
  Parameter& weight(const std::string& name, ParamGroup group, int rows, int cols, Rng& rng);
  Parameter& zeros(const std::string& name, ParamGroup group, int rows, int cols);
  Parameter& ones(const std::string& name, ParamGroup group, int rows, int cols);

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

private:
  Parameter& add(const std::string& name, ParamGroup group, int rows, int cols);

  std::deque<Parameter> params_;
};

}  // namespace vdgr
