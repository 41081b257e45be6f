#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bexrl/ad/graph.hpp"
#include "bexrl/ad/tensor.hpp"

namespace bexrl::vq {

// N code vectors of dimension d, stored as an (N, d) tensor.
class Codebook {
 public:
  explicit Codebook(ad::Tensor codes);

  std::size_t size() const { return codes_.dim(0); }
  std::size_t dim() const { return codes_.dim(1); }
  std::span<const double> code(std::size_t i) const { return codes_.row(i); }
  const ad::Tensor& codes() const { return codes_; }

 private:
  ad::Tensor codes_;
};

struct Quantized {
  std::size_t index = 0;
  std::vector<double> code;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

// Nearest code under squared Euclidean distance; ties go to the lowest index.
Quantized quantize(std::span<const double> z, const Codebook& codebook);

// The two halves of the VQ term, each summed over the code dimension and
// averaged over rows. z and c are (T, d).
// ||z - sg(c)||^2: moves the encoder toward its code.
ad::Var commitment_loss(const ad::Var& z, const ad::Var& code);
// ||sg(z) - c||^2: moves the code toward the encoder output.
ad::Var codebook_loss(const ad::Var& z, const ad::Var& code);
// commitment_loss + codebook_loss.
ad::Var vq_loss(const ad::Var& z, const ad::Var& code);

// z + sg(c - z): forward value of the code, gradient of the identity in z.
ad::Var straight_through(const ad::Var& z, const ad::Var& code);

// Fraction of the N codes that occur at least once in `assignments`.
double codebook_occupancy(std::span<const std::size_t> assignments, std::size_t num_codes);

// Mean over rows and dimensions of (target - prediction)^2 / variance[d].
// A mean predictor therefore scores about 1.
double normalized_recon_error(const ad::Tensor& predictions, const ad::Tensor& targets,
                              std::span<const double> variance);

}  // namespace bexrl::vq
