#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bexrl/ad/graph.hpp"

namespace bexrl::ad {

struct Parameter {
  std::string name;
  Var var;  // leaf node holding the tensor and its gradient accumulator
  bool trainable = true;
  // Adam state
  Tensor moment1;
  Tensor moment2;
  long steps = 0;

  const Tensor& tensor() const { return var.value(); }
  const Tensor& gradient() const { return var.grad(); }
};

// Named collection of leaves owned by one model.
class ParamSet {
 public:
  Var add(std::string name, Tensor init, bool trainable = true);

  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  std::size_t scalar_count() const;

  void zero_grad();
  // Overwrite values by name; shapes must match exactly.
  void assign(const std::map<std::string, Tensor>& tensors);
  std::map<std::string, Tensor> snapshot() const;

 private:
  std::vector<Parameter> params_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over every trainable parameter. Moments live on the
// Parameter so repeated calls continue the same optimizer trajectory.
void adam_step(std::span<Parameter> params, const AdamConfig& cfg);

}  // namespace bexrl::ad
