#include "bexrl/seg/jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bexrl/util/error.hpp"

namespace bexrl::seg {
namespace {

double off_diagonal_norm(const ad::Tensor& a) {
  const std::size_t n = a.dim(0);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) s += a.at(i, j) * a.at(i, j);
  return std::sqrt(s);
}

}  // namespace

SymmetricEigen jacobi_eigen(const ad::Tensor& symmetric, double tolerance, int max_sweeps) {
  if (symmetric.rank() != 2 || symmetric.dim(0) != symmetric.dim(1)) {
    fail(ErrorKind::kShape, "jacobi_eigen needs a square matrix, got " + ad::shape_str(symmetric.shape()));
  }
  const std::size_t n = symmetric.dim(0);
  ad::Tensor a = symmetric;
  ad::Tensor v({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

  double frob = 0.0;
  for (double x : a.values()) frob += x * x;
  const double threshold = tolerance * std::max(1.0, std::sqrt(frob));

  int sweep = 0;
  while (off_diagonal_norm(a) > threshold) {
    if (sweep >= max_sweeps) {
      fail(ErrorKind::kConvergence, "Jacobi did not converge in " + std::to_string(max_sweeps) + " sweeps");
    }
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J, applied as column then row rotations.
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        a.at(p, q) = 0.0;
        a.at(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a.at(x, x) < a.at(y, y); });

  SymmetricEigen out;
  out.sweeps = sweep;
  out.eigenvectors = ad::Tensor({n, n}, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.eigenvalues.push_back(a.at(src, src));
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (std::abs(v.at(i, src)) > std::abs(v.at(arg, src)) + 1e-12) arg = i;
    }
    const double sign = v.at(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors.at(i, j) = sign * v.at(i, src);
  }
  return out;
}

}  // namespace bexrl::seg
