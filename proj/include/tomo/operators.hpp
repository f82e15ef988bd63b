#pragma once

#include <array>
#include <functional>
#include <utility>
#include <vector>

#include "tomo/types.hpp"

namespace tomo {

// Bipartite dimensions (first factor, second factor).
using Dims = std::pair<int, int>;

Mat identity(int d);
Mat pauli_x();
Mat pauli_y();
Mat pauli_z();

Mat hermitize(const Mat& a);
bool is_hermitian(const Mat& a, double tol = 1e-12);

// Symmetrizes, then checks positivity (>= -1e-10) and unit trace (1e-10).
// Throws InvalidState.
Mat make_state(const Mat& a);
bool is_state(const Mat& a, double tol = 1e-10);

Mat projector(const Vec& ket);
Mat tensor(const Mat& a, const Mat& b);
Vec tensor(const Vec& a, const Vec& b);
Mat tensor_all(const std::vector<Mat>& ops);

// subsystem and keep are 1-based: 1 = first factor, 2 = second factor.
Mat partial_transpose(const Mat& a, int subsystem, Dims dims);
Mat partial_trace(const Mat& a, int keep, Dims dims);

// Spectral calculus on Hermitian input. Eigenvalues below eig_floor are
// clamped to eig_floor before f is applied; pass 0 for functions regular at 0.
Mat hermitian_fn(const Mat& a, const std::function<double(double)>& f, double eig_floor = 0.0);
Mat expm_h(const Mat& a);
Mat logm_h(const Mat& a, double eig_floor = 1e-12);
Mat inverse_h(const Mat& a, double eig_floor = 1e-12);
Mat sqrtm_psd(const Mat& a);
RVec eigenvalues_h(const Mat& a);

// Sum of singular values (valid for non-Hermitian input).
double trace_norm(const Mat& a);
double trace_class_distance(const Mat& a, const Mat& b);
double von_neumann_entropy(const Mat& rho);
double fidelity(const Mat& a, const Mat& b);
double purity(const Mat& rho);

// Bloch vector (x, y, z) of a qubit operator.
std::array<double, 3> bloch_vector(const Mat& rho);

}  // namespace tomo
