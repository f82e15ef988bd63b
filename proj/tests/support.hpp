#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "tomo/tomo.hpp"

namespace testing {

// Property suites run once per seed.
inline constexpr std::array<std::uint64_t, 3> kSeeds{1, 2, 3};

inline double max_abs(const tomo::Mat& a) { return a.cwiseAbs().maxCoeff(); }

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline tomo::Vec ket(std::initializer_list<tomo::cplx> xs) {
  tomo::Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (auto x : xs) v(i++) = x;
  return v.normalized();
}

// Random state with all eigenvalues above floor.
inline tomo::Mat interior_state(int d, tomo::RngStream& rng, double floor = 0.05) {
  tomo::Mat r = tomo::hs_random_state(d, rng);
  return (1.0 - d * floor) * r + floor * tomo::identity(d);
}

}  // namespace testing
