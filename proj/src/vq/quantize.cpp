#include "bexrl/vq/quantize.hpp"

#include <vector>

#include "bexrl/ad/ops.hpp"
#include "bexrl/util/error.hpp"

namespace bexrl::vq {

Codebook::Codebook(ad::Tensor codes) : codes_(std::move(codes)) {
  if (codes_.rank() != 2) fail(ErrorKind::kShape, "codebook must be (N, d), got " + ad::shape_str(codes_.shape()));
  if (codes_.dim(0) < 2) fail(ErrorKind::kInvalidConfig, "codebook needs at least 2 codes");
  if (!codes_.all_finite()) fail(ErrorKind::kDivergence, "codebook contains non-finite values");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

Quantized quantize(std::span<const double> z, const Codebook& codebook) {
  if (z.size() != codebook.dim()) {
    fail(ErrorKind::kDimMismatch, "latent of dim " + std::to_string(z.size()) + " vs codebook dim " +
                                      std::to_string(codebook.dim()));
  }
  std::size_t best = 0;
  double best_d = squared_distance(z, codebook.code(0));
  for (std::size_t i = 1; i < codebook.size(); ++i) {
    const double d = squared_distance(z, codebook.code(i));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  const auto c = codebook.code(best);
  return Quantized{best, std::vector<double>(c.begin(), c.end())};
}

namespace {

void check_pair(const ad::Var& z, const ad::Var& code) {
  if (z.shape() != code.shape()) {
    fail(ErrorKind::kDimMismatch, "vq_loss: latent " + ad::shape_str(z.shape()) + " vs code " +
                                      ad::shape_str(code.shape()));
  }
}

}  // namespace

ad::Var commitment_loss(const ad::Var& z, const ad::Var& code) {
  check_pair(z, code);
  const double inv_rows = 1.0 / static_cast<double>(z.value().rows());
  return ad::scale(ad::sum_squares(ad::sub(z, ad::stop_gradient(code))), inv_rows);
}

ad::Var codebook_loss(const ad::Var& z, const ad::Var& code) {
  check_pair(z, code);
  const double inv_rows = 1.0 / static_cast<double>(z.value().rows());
  return ad::scale(ad::sum_squares(ad::sub(ad::stop_gradient(z), code)), inv_rows);
}

ad::Var vq_loss(const ad::Var& z, const ad::Var& code) {
  return ad::add(commitment_loss(z, code), codebook_loss(z, code));
}

ad::Var straight_through(const ad::Var& z, const ad::Var& code) {
  return ad::add(z, ad::stop_gradient(ad::sub(code, z)));
}

double codebook_occupancy(std::span<const std::size_t> assignments, std::size_t num_codes) {
  if (num_codes == 0) fail(ErrorKind::kInvalidConfig, "codebook size must be positive");
  std::vector<bool> used(num_codes, false);
  for (auto a : assignments) {
    if (a >= num_codes) fail(ErrorKind::kUnknownToken, "assignment " + std::to_string(a) + " outside codebook");
    used[a] = true;
  }
  std::size_t count = 0;
  for (bool u : used) count += u ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(num_codes);
}

double normalized_recon_error(const ad::Tensor& predictions, const ad::Tensor& targets,
                              std::span<const double> variance) {
  if (predictions.shape() != targets.shape() || variance.size() != targets.cols()) {
    fail(ErrorKind::kDimMismatch, "normalized_recon_error: shapes " + ad::shape_str(predictions.shape()) +
                                      " and " + ad::shape_str(targets.shape()));
  }
  double total = 0.0;
  for (std::size_t r = 0; r < targets.rows(); ++r)
    for (std::size_t c = 0; c < targets.cols(); ++c) {
      const double e = targets.at(r, c) - predictions.at(r, c);
      total += e * e / variance[c];
    }
  return total / static_cast<double>(targets.size());
}

}  // namespace bexrl::vq
