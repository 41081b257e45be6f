#include "bexrl/ad/ops.hpp"

#include <cmath>
#include <limits>

#include "bexrl/util/error.hpp"

namespace bexrl::ad {
namespace {

void shape_error(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorKind::kShape, std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                              shape_str(b));
}

void require_same(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

void require_rank(const char* op, const Var& x, std::size_t rank) {
  if (x.value().rank() != rank) {
    fail(ErrorKind::kShape, std::string(op) + ": expected rank " + std::to_string(rank) +
                                " input, got " + shape_str(x.shape()));
  }
}

// Accumulate `scale * src` into the gradient of input `i` if it wants one.
Tensor* grad_of(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  return &in.ensure_grad();
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same("add", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op(std::move(out), {a, b}, "add", [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), {a, b}, "sub", [](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), {a, b}, "mul", [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= factor;
  return make_op(std::move(out), {a}, "scale", [factor](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
    }
  });
}

Var add_bias(const Var& x, const Var& bias) {
  if (bias.value().rank() != 1 || bias.value().size() != x.value().cols()) {
    shape_error("add_bias", x.shape(), bias.shape());
  }
  Tensor out = x.value();
  const std::size_t rows = out.rows(), cols = out.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bias.value()[c];
  return make_op(std::move(out), {x, bias}, "add_bias", [rows, cols](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*g)[c] += self.grad[r * cols + c];
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  if (b.value().dim(0) != k) shape_error("matmul", a.shape(), b.shape());
  Tensor out({m, n}, 0.0);
  const double* av = a.value().values().data();
  const double* bv = b.value().values().data();
  double* ov = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv + p * n;
      double* orow = ov + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_op(std::move(out), {a, b}, "matmul", [m, k, n](Node& self) {
    const double* gv = self.grad.values().data();
    const double* av = self.inputs[0]->value.values().data();
    const double* bv = self.inputs[1]->value.values().data();
    if (Tensor* g = grad_of(self, 0)) {
      // dA = dC * B^T
      double* ga = g->values().data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += gv[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (Tensor* g = grad_of(self, 1)) {
      // dB = A^T * dC
      double* gb = g->values().data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * gv[i * n + j];
        }
      }
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const std::size_t cols = x.value().cols(), rows = x.value().rows();
  if (gain.value().size() != cols || gain.value().rank() != 1) shape_error("layer_norm", x.shape(), gain.shape());
  if (bias.value().size() != cols || bias.value().rank() != 1) shape_error("layer_norm", x.shape(), bias.shape());
  Tensor out(x.shape(), 0.0);
  Tensor xhat(x.shape(), 0.0);
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = x.value().row(r);
    double mu = 0.0;
    for (double v : row) mu += v;
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mu) * inv_std[r];
      xhat.at(r, c) = h;
      out.at(r, c) = gain.value()[c] * h + bias.value()[c];
    }
  }
  return make_op(std::move(out), {x, gain, bias}, "layer_norm",
                 [xhat = std::move(xhat), inv_std = std::move(inv_std), rows, cols](Node& self) {
    const Tensor& gv = self.inputs[1]->value;
    const double inv_n = 1.0 / static_cast<double>(cols);
    if (Tensor* g = grad_of(self, 0)) {
      std::vector<double> dxhat(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          dxhat[c] = self.grad.at(r, c) * gv[c];
          mean_d += dxhat[c];
          mean_dx += dxhat[c] * xhat.at(r, c);
        }
        mean_d *= inv_n;
        mean_dx *= inv_n;
        for (std::size_t c = 0; c < cols; ++c) {
          g->at(r, c) += inv_std[r] * (dxhat[c] - mean_d - xhat.at(r, c) * mean_dx);
        }
      }
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*g)[c] += self.grad.at(r, c) * xhat.at(r, c);
    }
    if (Tensor* g = grad_of(self, 2)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*g)[c] += self.grad.at(r, c);
    }
  });
}

Var softmax(const Var& x, std::size_t axis) {
  const Tensor& xv = x.value();
  if (xv.rank() > 2 || axis >= xv.rank()) {
    fail(ErrorKind::kShape, "softmax: axis " + std::to_string(axis) + " invalid for shape " +
                                shape_str(x.shape()));
  }
  // View as (outer, n, inner) and reduce over n.
  std::size_t outer = 1, n = xv.dim(axis), inner = 1;
  if (xv.rank() == 2) {
    if (axis == 0) inner = xv.dim(1);
    else outer = xv.dim(0);
  }
  Tensor out(x.shape(), 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      auto idx = [&](std::size_t j) { return (o * n + j) * inner + in; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xv[idx(j)]);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        out[idx(j)] = std::exp(xv[idx(j)] - mx);
        total += out[idx(j)];
      }
      for (std::size_t j = 0; j < n; ++j) out[idx(j)] /= total;
    }
  }
  return make_op(std::move(out), {x}, "softmax", [outer, n, inner](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    const Tensor& y = self.value;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        auto idx = [&](std::size_t j) { return (o * n + j) * inner + in; };
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += self.grad[idx(j)] * y[idx(j)];
        for (std::size_t j = 0; j < n; ++j) (*g)[idx(j)] += y[idx(j)] * (self.grad[idx(j)] - dot);
      }
    }
  });
}

Var gelu(const Var& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  Tensor out = x.value();
  for (auto& v : out.values()) {
    const double u = kC * (v + kA * v * v * v);
    v = 0.5 * v * (1.0 + std::tanh(u));
  }
  return make_op(std::move(out), {x}, "gelu", [](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    const Tensor& xv = self.inputs[0]->value;
    for (std::size_t i = 0; i < g->size(); ++i) {
      const double v = xv[i];
      const double u = kC * (v + kA * v * v * v);
      const double t = std::tanh(u);
      const double du = kC * (1.0 + 3.0 * kA * v * v);
      const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      (*g)[i] += self.grad[i] * d;
    }
  });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return make_op(std::move(out), {x}, "relu", [](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    const Tensor& xv = self.inputs[0]->value;
    for (std::size_t i = 0; i < g->size(); ++i) {
      if (xv[i] > 0.0) (*g)[i] += self.grad[i];
    }
  });
}

Var embedding_lookup(const Var& table, const std::vector<std::size_t>& indices) {
  require_rank("embedding_lookup", table, 2);
  const std::size_t vocab = table.value().dim(0), d = table.value().dim(1);
  if (indices.empty()) fail(ErrorKind::kShape, "embedding_lookup: no indices");
  Tensor out({indices.size(), d}, 0.0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= vocab) {
      fail(ErrorKind::kShape, "embedding_lookup: index " + std::to_string(indices[r]) +
                                  " outside table of shape " + shape_str(table.shape()));
    }
    for (std::size_t c = 0; c < d; ++c) out.at(r, c) = table.value().at(indices[r], c);
  }
  return make_op(std::move(out), {table}, "embedding_lookup", [indices, d](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < indices.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) g->at(indices[r], c) += self.grad.at(r, c);
  });
}

Var gather_rows(const Var& x, const std::vector<std::size_t>& rows) {
  const Tensor& xv = x.value();
  const std::size_t cols = xv.cols();
  if (rows.empty()) fail(ErrorKind::kShape, "gather_rows: no rows selected");
  Tensor out({rows.size(), cols}, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= xv.rows()) {
      fail(ErrorKind::kShape, "gather_rows: row " + std::to_string(rows[r]) + " outside " + shape_str(x.shape()));
    }
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = xv.at(rows[r], c);
  }
  return make_op(std::move(out), {x}, "gather_rows", [rows, cols](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols; ++c) g->at(rows[r], c) += self.grad.at(r, c);
  });
}

Mask causal_mask(std::size_t length) {
  Mask m(length, std::vector<bool>(length, false));
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t s = 0; s <= t; ++s) m[t][s] = true;
  return m;
}

Var masked_attention(const Var& q, const Var& k, const Var& v, const Mask& mask) {
  require_rank("masked_attention", q, 2);
  require_rank("masked_attention", k, 2);
  require_rank("masked_attention", v, 2);
  const std::size_t tq = q.value().dim(0), dk = q.value().dim(1);
  const std::size_t ts = k.value().dim(0), dv = v.value().dim(1);
  if (k.value().dim(1) != dk) shape_error("masked_attention", q.shape(), k.shape());
  if (v.value().dim(0) != ts) shape_error("masked_attention", k.shape(), v.shape());
  if (mask.size() != tq || (tq > 0 && mask[0].size() != ts)) {
    fail(ErrorKind::kShape, "masked_attention: mask does not match (" + std::to_string(tq) + ", " +
                                std::to_string(ts) + ")");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();

  // Attention weights, zero where masked. Masked keys are skipped entirely so
  // their values can never leak into the result.
  Tensor probs({tq, ts}, 0.0);
  Tensor out({tq, dv}, 0.0);
  for (std::size_t t = 0; t < tq; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < ts; ++s) {
      if (!mask[t][s]) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < dk; ++c) dot += qv.at(t, c) * kv.at(s, c);
      probs.at(t, s) = dot * inv_sqrt;
      mx = std::max(mx, probs.at(t, s));
    }
    double total = 0.0;
    for (std::size_t s = 0; s < ts; ++s) {
      if (!mask[t][s]) continue;
      probs.at(t, s) = std::exp(probs.at(t, s) - mx);
      total += probs.at(t, s);
    }
    for (std::size_t s = 0; s < ts; ++s) {
      if (!mask[t][s]) continue;
      probs.at(t, s) /= total;
      const double p = probs.at(t, s);
      for (std::size_t c = 0; c < dv; ++c) out.at(t, c) += p * vv.at(s, c);
    }
  }
  return make_op(std::move(out), {q, k, v}, "masked_attention",
                 [probs = std::move(probs), mask, tq, ts, dk, dv, inv_sqrt](Node& self) {
    const Tensor& qv = self.inputs[0]->value;
    const Tensor& kv = self.inputs[1]->value;
    const Tensor& vv = self.inputs[2]->value;
    Tensor* gq = grad_of(self, 0);
    Tensor* gk = grad_of(self, 1);
    Tensor* gv = grad_of(self, 2);
    std::vector<double> dp(ts), ds(ts);
    for (std::size_t t = 0; t < tq; ++t) {
      double dot = 0.0;
      for (std::size_t s = 0; s < ts; ++s) {
        if (!mask[t][s]) continue;
        double acc = 0.0;
        for (std::size_t c = 0; c < dv; ++c) acc += self.grad.at(t, c) * vv.at(s, c);
        dp[s] = acc;
        dot += acc * probs.at(t, s);
      }
      for (std::size_t s = 0; s < ts; ++s) {
        if (!mask[t][s]) continue;
        ds[s] = probs.at(t, s) * (dp[s] - dot) * inv_sqrt;
        if (gv) {
          for (std::size_t c = 0; c < dv; ++c) gv->at(s, c) += probs.at(t, s) * self.grad.at(t, c);
        }
        if (gq) {
          for (std::size_t c = 0; c < dk; ++c) gq->at(t, c) += ds[s] * kv.at(s, c);
        }
        if (gk) {
          for (std::size_t c = 0; c < dk; ++c) gk->at(s, c) += ds[s] * qv.at(t, c);
        }
      }
    }
  });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  require_rank("slice_cols", x, 2);
  const std::size_t rows = x.value().dim(0), cols = x.value().dim(1);
  if (begin >= end || end > cols) {
    fail(ErrorKind::kShape, "slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") outside " + shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out({rows, w}, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out.at(r, c) = x.value().at(r, begin + c);
  return make_op(std::move(out), {x}, "slice_cols", [rows, w, begin](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) g->at(r, begin + c) += self.grad.at(r, c);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorKind::kShape, "concat_cols: nothing to concatenate");
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.value().dim(0) != rows) shape_error("concat_cols", parts[0].shape(), p.shape());
    offsets.push_back(total);
    total += p.value().dim(1);
  }
  Tensor out({rows, total}, 0.0);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& pv = parts[i].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pv.dim(1); ++c) out.at(r, offsets[i] + c) = pv.at(r, c);
  }
  return make_op(std::move(out), parts, "concat_cols", [offsets, rows](Node& self) {
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      Tensor* g = grad_of(self, i);
      if (!g) continue;
      const std::size_t w = g->dim(1);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) g->at(r, c) += self.grad.at(r, offsets[i] + c);
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op(std::move(out), {x}, "reshape", [](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Var sum(const Var& x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return make_op(Tensor::scalar(total), {x}, "sum", [](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    for (auto& v : g->values()) v += self.grad[0];
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var sum_squares(const Var& x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v * v;
  return make_op(Tensor::scalar(total), {x}, "sum_squares", [](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    const Tensor& xv = self.inputs[0]->value;
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += 2.0 * xv[i] * self.grad[0];
  });
}

Var mse_loss(const Var& prediction, const Var& target) {
  require_same("mse_loss", prediction, target);
  return scale(sum_squares(sub(prediction, target)), 1.0 / static_cast<double>(prediction.value().size()));
}

Var cross_entropy_loss(const Var& logits, const std::vector<std::size_t>& labels) {
  require_rank("cross_entropy_loss", logits, 2);
  const std::size_t b = logits.value().dim(0), c = logits.value().dim(1);
  if (labels.size() != b) {
    fail(ErrorKind::kShape, "cross_entropy_loss: " + std::to_string(labels.size()) +
                                " labels for logits of shape " + shape_str(logits.shape()));
  }
  Tensor probs = softmax_rows(logits.value());
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    if (labels[r] >= c) fail(ErrorKind::kShape, "cross_entropy_loss: label out of range");
    const auto row = logits.value().row(r);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    total += -(row[labels[r]] - mx - std::log(z));
  }
  return make_op(Tensor::scalar(total / static_cast<double>(b)), {logits}, "cross_entropy_loss",
                 [probs = std::move(probs), labels, b, c](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    const double s = self.grad[0] / static_cast<double>(b);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t j = 0; j < c; ++j)
        g->at(r, j) += s * (probs.at(r, j) - (j == labels[r] ? 1.0 : 0.0));
  });
}

Var stop_gradient(const Var& x) { return Var::constant(x.value()); }

Var conv2d(const Var& x, const Var& weight, const Var& bias) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  const std::size_t B = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2), W = x.value().dim(3);
  const std::size_t O = weight.value().dim(0), K = weight.value().dim(2);
  if (weight.value().dim(1) != C || weight.value().dim(3) != K || K % 2 == 0) {
    shape_error("conv2d", x.shape(), weight.shape());
  }
  if (bias.value().rank() != 1 || bias.value().size() != O) shape_error("conv2d", weight.shape(), bias.shape());
  const long pad = static_cast<long>(K / 2);
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  Tensor out({B, O, H, W}, 0.0);
  auto xi = [=](std::size_t b, std::size_t c, std::size_t h, std::size_t w) { return ((b * C + c) * H + h) * W + w; };
  auto wi = [=](std::size_t o, std::size_t c, std::size_t i, std::size_t j) { return ((o * C + c) * K + i) * K + j; };
  auto oi = [=](std::size_t b, std::size_t o, std::size_t h, std::size_t w) { return ((b * O + o) * H + h) * W + w; };
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) {
          double acc = bias.value()[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < K; ++i) {
              const long hh = static_cast<long>(h + i) - pad;
              if (hh < 0 || hh >= static_cast<long>(H)) continue;
              for (std::size_t j = 0; j < K; ++j) {
                const long ww = static_cast<long>(w + j) - pad;
                if (ww < 0 || ww >= static_cast<long>(W)) continue;
                acc += wv[wi(o, c, i, j)] * xv[xi(b, c, static_cast<std::size_t>(hh), static_cast<std::size_t>(ww))];
              }
            }
          out[oi(b, o, h, w)] = acc;
        }
  return make_op(std::move(out), {x, weight, bias}, "conv2d",
                 [=](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& wv = self.inputs[1]->value;
    Tensor* gx = grad_of(self, 0);
    Tensor* gw = grad_of(self, 1);
    Tensor* gb = grad_of(self, 2);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t w = 0; w < W; ++w) {
            const double go = self.grad[oi(b, o, h, w)];
            if (gb) (*gb)[o] += go;
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t i = 0; i < K; ++i) {
                const long hh = static_cast<long>(h + i) - pad;
                if (hh < 0 || hh >= static_cast<long>(H)) continue;
                for (std::size_t j = 0; j < K; ++j) {
                  const long ww = static_cast<long>(w + j) - pad;
                  if (ww < 0 || ww >= static_cast<long>(W)) continue;
                  const std::size_t xidx = xi(b, c, static_cast<std::size_t>(hh), static_cast<std::size_t>(ww));
                  if (gw) (*gw)[wi(o, c, i, j)] += go * xv[xidx];
                  if (gx) (*gx)[xidx] += go * wv[wi(o, c, i, j)];
                }
              }
          }
  });
}

Var global_avg_pool(const Var& x) {
  require_rank("global_avg_pool", x, 4);
  const std::size_t B = x.value().dim(0), C = x.value().dim(1);
  const std::size_t area = x.value().dim(2) * x.value().dim(3);
  Tensor out({B, C}, 0.0);
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    double acc = 0.0;
    for (std::size_t p = 0; p < area; ++p) acc += x.value()[bc * area + p];
    out[bc] = acc / static_cast<double>(area);
  }
  return make_op(std::move(out), {x}, "global_avg_pool", [B, C, area](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      const double share = self.grad[bc] / static_cast<double>(area);
      for (std::size_t p = 0; p < area; ++p) (*g)[bc * area + p] += share;
    }
  });
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out(logits.shape(), 0.0);
  const std::size_t rows = logits.rows(), cols = logits.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, logits.at(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out.at(r, c) = std::exp(logits.at(r, c) - mx);
      total += out.at(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= total;
  }
  return out;
}

}  // namespace bexrl::ad
