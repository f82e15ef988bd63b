#include "tomo/rng.hpp"

#include <cmath>

namespace tomo {

static std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), eng_(seeded(seed, stream)) {}

double RngStream::uniform() { return ud_(eng_); }
double RngStream::normal() { return nd_(eng_); }

cplx RngStream::complex_normal() {
  double re = nd_(eng_), im = nd_(eng_);
  return cplx(re, im) / std::sqrt(2.0);
}

int RngStream::uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }

Mat ginibre(int rows, int cols, RngStream& rng) {
  Mat g(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) g(i, j) = rng.complex_normal();
  return g;
}

Vec haar_ket(int d, RngStream& rng) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.complex_normal();
  return v / v.norm();
}

Mat haar_unitary(int d, RngStream& rng) {
  Mat g = ginibre(d, d, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  // phase fix makes the distribution Haar
  for (int i = 0; i < d; ++i) {
    cplx ph = r(i, i) / std::abs(r(i, i));
    q.col(i) *= ph;
  }
  return q;
}

Mat hs_random_state(int d, RngStream& rng) {
  Mat g = ginibre(d, d, rng);
  Mat rho = g * g.adjoint();
  rho /= rho.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

Mat random_hermitian(int d, RngStream& rng) {
  Mat g = ginibre(d, d, rng);
  return 0.5 * (g + g.adjoint());
}

}  // namespace tomo
