#include "bexrl/ad/optim.hpp"

#include <cmath>

#include "bexrl/util/error.hpp"

namespace bexrl::ad {

Var ParamSet::add(std::string name, Tensor init, bool trainable) {
  if (contains(name)) fail(ErrorKind::kInvalidConfig, "duplicate parameter '" + name + "'");
  Parameter p;
  p.name = std::move(name);
  p.trainable = trainable;
  p.var = Var::leaf(std::move(init), trainable);
  params_.push_back(std::move(p));
  return params_.back().var;
}

Parameter& ParamSet::get(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  fail(ErrorKind::kInvalidConfig, "no parameter named '" + std::string(name) + "'");
}

const Parameter& ParamSet::get(std::string_view name) const {
  return const_cast<ParamSet*>(this)->get(name);
}

bool ParamSet::contains(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor().size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

void ParamSet::assign(const std::map<std::string, Tensor>& tensors) {
  for (auto& p : params_) {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) fail(ErrorKind::kSpecMismatch, "missing tensor '" + p.name + "'");
    if (it->second.shape() != p.tensor().shape()) {
      fail(ErrorKind::kSpecMismatch, "tensor '" + p.name + "' has shape " + shape_str(it->second.shape()) +
                                         ", expected " + shape_str(p.tensor().shape()));
    }
    p.var.mutable_value() = it->second;
  }
}

std::map<std::string, Tensor> ParamSet::snapshot() const {
  std::map<std::string, Tensor> out;
  for (const auto& p : params_) out.emplace(p.name, p.tensor());
  return out;
}

void adam_step(std::span<Parameter> params, const AdamConfig& cfg) {
  for (auto& p : params) {
    if (!p.trainable) continue;
    Tensor& w = p.var.mutable_value();
    const Tensor& g = p.var.grad();
    if (p.moment1.shape() != w.shape()) {
      p.moment1 = Tensor(w.shape(), 0.0);
      p.moment2 = Tensor(w.shape(), 0.0);
    }
    ++p.steps;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.steps));
    for (std::size_t i = 0; i < w.size(); ++i) {
      p.moment1[i] = cfg.beta1 * p.moment1[i] + (1.0 - cfg.beta1) * g[i];
      p.moment2[i] = cfg.beta2 * p.moment2[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = p.moment1[i] / c1;
      const double v_hat = p.moment2[i] / c2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace bexrl::ad
