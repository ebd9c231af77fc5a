#pragma once

#include <random>
#include <vector>

#include "isomono/core.hpp"

namespace isomono::testing {

inline cplx rand_disk(std::mt19937_64& rng, double r = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double rho = r * std::sqrt(u(rng));
  const double th = 2.0 * kPi * u(rng);
  return std::polar(rho, th);
}

inline Mat rand_mat(std::mt19937_64& rng, Eigen::Index n, double r = 1.0) {
  Mat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rand_disk(rng, r);
  return m;
}

/// Points in the disk of radius r with pairwise separation at least sep.
inline std::vector<cplx> separated_points(std::mt19937_64& rng, int count, double r, double sep) {
  std::vector<cplx> pts;
  while (static_cast<int>(pts.size()) < count) {
    const cplx z = rand_disk(rng, r);
    bool ok = true;
    for (const auto& p : pts) ok = ok && std::abs(p - z) >= sep;
    if (ok) pts.push_back(z);
  }
  return pts;
}

inline double rel_err(const Mat& a, const Mat& b) {
  return max_abs(a - b) / std::max(1.0, max_abs(b));
}

}  // namespace isomono::testing
