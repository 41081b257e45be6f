#pragma once

#include <doctest.h>

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "bexrl/util/error.hpp"

namespace bexrl::testing {

// Runs fn and reports the ErrorKind it throws, or nullopt-like -1 when it returns.
inline int error_kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return static_cast<int>(e.kind());
  }
  return -1;
}

#define CHECK_ERROR_KIND(expr, kind) CHECK(::bexrl::testing::error_kind_of([&] { (void)(expr); }) == static_cast<int>(kind))

inline std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

}  // namespace bexrl::testing
