#include "bexrl/ad/nn.hpp"

#include <cmath>

#include "bexrl/util/error.hpp"

namespace bexrl::ad {

Tensor uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape), 0.0);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Linear::Linear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng) {
  weight_ = params.add(name + ".weight", uniform_init({in, out}, in, rng));
  bias_ = params.add(name + ".bias", uniform_init({out}, in, rng));
}

Var Linear::operator()(const Var& x) const { return add_bias(matmul(x, weight_), bias_); }

LayerNorm::LayerNorm(ParamSet& params, const std::string& name, std::size_t dim) {
  gain_ = params.add(name + ".gain", Tensor({dim}, 1.0));
  bias_ = params.add(name + ".bias", Tensor({dim}, 0.0));
}

MultiHeadAttention::MultiHeadAttention(ParamSet& params, const std::string& name, std::size_t d_model,
                                       std::size_t heads, std::mt19937_64& rng)
    : heads_(heads), d_model_(d_model) {
  if (heads == 0 || d_model % heads != 0) {
    fail(ErrorKind::kInvalidConfig, "d_model " + std::to_string(d_model) + " not divisible by " +
                                        std::to_string(heads) + " heads");
  }
  q_ = Linear(params, name + ".q", d_model, d_model, rng);
  k_ = Linear(params, name + ".k", d_model, d_model, rng);
  v_ = Linear(params, name + ".v", d_model, d_model, rng);
  out_ = Linear(params, name + ".out", d_model, d_model, rng);
}

Var MultiHeadAttention::operator()(const Var& x, const Mask& mask) const {
  const Var q = q_(x), k = k_(x), v = v_(x);
  if (heads_ == 1) return out_(masked_attention(q, k, v, mask));
  const std::size_t hd = d_model_ / heads_;
  std::vector<Var> per_head;
  per_head.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    const std::size_t b = h * hd, e = b + hd;
    per_head.push_back(masked_attention(slice_cols(q, b, e), slice_cols(k, b, e), slice_cols(v, b, e), mask));
  }
  return out_(concat_cols(per_head));
}

TransformerBlock::TransformerBlock(ParamSet& params, const std::string& name, std::size_t d_model,
                                   std::size_t heads, std::size_t hidden, std::mt19937_64& rng) {
  ln1_ = LayerNorm(params, name + ".ln1", d_model);
  attn_ = MultiHeadAttention(params, name + ".attn", d_model, heads, rng);
  ln2_ = LayerNorm(params, name + ".ln2", d_model);
  ff1_ = Linear(params, name + ".ff1", d_model, hidden, rng);
  ff2_ = Linear(params, name + ".ff2", hidden, d_model, rng);
}

Var TransformerBlock::operator()(const Var& x, const Mask& mask) const {
  const Var h = add(x, attn_(ln1_(x), mask));
  return add(h, ff2_(gelu(ff1_(ln2_(h)))));
}

Tensor sinusoidal_positions(std::size_t max_len, std::size_t d_model) {
  Tensor table({max_len, d_model}, 0.0);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) * rate;
      table.at(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return table;
}

}  // namespace bexrl::ad
