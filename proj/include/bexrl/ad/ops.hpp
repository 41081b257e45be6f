#pragma once

#include <cstddef>
#include <vector>

#include "bexrl/ad/graph.hpp"

namespace bexrl::ad {

// Differentiable operations. All loops run in a fixed index order so results
// are bit-reproducible; shape violations throw ShapeError naming both shapes.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
// x: (..., C), bias: (C); bias is added to every row.
Var add_bias(const Var& x, const Var& bias);
// (m, k) x (k, n) -> (m, n)
Var matmul(const Var& a, const Var& b);

// Normalizes each row over the last axis, then applies gain and bias (both (C)).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
// Softmax along `axis` (0 or 1 for matrices, 0 for vectors), max-subtracted.
Var softmax(const Var& x, std::size_t axis);
// tanh approximation
Var gelu(const Var& x);
Var relu(const Var& x);

// table: (V, D) -> rows selected by `indices`, shape (len(indices), D).
Var embedding_lookup(const Var& table, const std::vector<std::size_t>& indices);
Var gather_rows(const Var& x, const std::vector<std::size_t>& rows);

using Mask = std::vector<std::vector<bool>>;
// mask[t][s] == true where query t may attend to key s.
Mask causal_mask(std::size_t length);
// Single-head scaled dot-product attention. Q: (T, dk), K: (S, dk), V: (S, dv).
// Disallowed positions get -inf logits, i.e. exactly zero weight.
Var masked_attention(const Var& q, const Var& k, const Var& v, const Mask& mask);

Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
Var concat_cols(const std::vector<Var>& parts);
Var reshape(const Var& x, Shape shape);

Var sum(const Var& x);
Var mean(const Var& x);
Var sum_squares(const Var& x);

// Mean squared error over all elements.
Var mse_loss(const Var& prediction, const Var& target);
// logits: (B, C); mean negative log-likelihood of `labels`.
Var cross_entropy_loss(const Var& logits, const std::vector<std::size_t>& labels);

// Identity forward, blocks gradient flow backward.
Var stop_gradient(const Var& x);

// x: (B, C, H, W), weight: (O, C, K, K) with odd K, bias: (O). Stride 1, "same" padding.
Var conv2d(const Var& x, const Var& weight, const Var& bias);
// (B, C, H, W) -> (B, C)
Var global_avg_pool(const Var& x);

// Row-wise softmax of a plain matrix, outside any graph.
Tensor softmax_rows(const Tensor& logits);

}  // namespace bexrl::ad
