#pragma once

#include <cstdint>
#include <random>

#include "tomo/types.hpp"

namespace tomo {

// Identical (seed, stream) pairs yield identical draw sequences.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 1, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::mt19937_64& engine() { return eng_; }

  double uniform();
  double normal();
  cplx complex_normal();  // E|z|^2 = 1
  int uniform_int(int lo, int hi);  // inclusive

 private:
  std::uint64_t seed_, stream_;
  std::mt19937_64 eng_;
  std::normal_distribution<double> nd_{0.0, 1.0};
  std::uniform_real_distribution<double> ud_{0.0, 1.0};
};

Mat ginibre(int rows, int cols, RngStream& rng);
Vec haar_ket(int d, RngStream& rng);
Mat haar_unitary(int d, RngStream& rng);
// Hilbert-Schmidt uniform mixed state, G G^dagger / tr.
Mat hs_random_state(int d, RngStream& rng);
Mat random_hermitian(int d, RngStream& rng);

}  // namespace tomo
