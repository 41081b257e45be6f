#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "bexrl/ad/ops.hpp"
#include "bexrl/ad/optim.hpp"

namespace bexrl::ad {

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization, matching common
// framework defaults.
Tensor uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

class Linear {
 public:
  Linear() = default;
  Linear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out,
         std::mt19937_64& rng);

  // x: (T, in) -> (T, out)
  Var operator()(const Var& x) const;
  std::size_t in_features() const { return weight_.value().dim(0); }
  std::size_t out_features() const { return weight_.value().dim(1); }

 private:
  Var weight_;
  Var bias_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamSet& params, const std::string& name, std::size_t dim);
  Var operator()(const Var& x) const { return layer_norm(x, gain_, bias_); }

 private:
  Var gain_;
  Var bias_;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamSet& params, const std::string& name, std::size_t d_model,
                     std::size_t heads, std::mt19937_64& rng);
  Var operator()(const Var& x, const Mask& mask) const;

 private:
  std::size_t heads_ = 1;
  std::size_t d_model_ = 0;
  Linear q_, k_, v_, out_;
};

// Pre-norm transformer block: x + MHA(LN(x)), then h + FFN(LN(h)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ParamSet& params, const std::string& name, std::size_t d_model,
                   std::size_t heads, std::size_t hidden, std::mt19937_64& rng);
  Var operator()(const Var& x, const Mask& mask) const;

 private:
  LayerNorm ln1_, ln2_;
  MultiHeadAttention attn_;
  Linear ff1_, ff2_;
};

// Fixed sinusoidal table of shape (max_len, d_model).
Tensor sinusoidal_positions(std::size_t max_len, std::size_t d_model);

}  // namespace bexrl::ad
