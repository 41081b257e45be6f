#pragma once

#include <cstddef>
#include <vector>

#include "bexrl/ad/tensor.hpp"

namespace bexrl::seg {

struct SymmetricEigen {
  std::vector<double> eigenvalues;  // ascending
  ad::Tensor eigenvectors;          // (n, n); column j pairs with eigenvalues[j]
  int sweeps = 0;
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
// tolerance * max(1, ||A||_F). Throws ConvergenceError after max_sweeps.
// Each eigenvector is sign-normalized so its largest-magnitude entry is positive.
SymmetricEigen jacobi_eigen(const ad::Tensor& symmetric, double tolerance = 1e-12, int max_sweeps = 100);

}  // namespace bexrl::seg
