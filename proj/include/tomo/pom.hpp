#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tomo/operators.hpp"

namespace tomo {

struct Pom {
  std::vector<Mat> outcomes;
  int dim = 0;
  std::optional<RMat> efficiency;  // M_eta, when detection is imperfect
  bool complete = true;            // G = 1

  size_t size() const { return outcomes.size(); }
  Mat completeness() const;  // G
};

// Validates positivity and G <= 1; sets `complete` from G.
Pom make_pom(std::vector<Mat> outcomes, std::optional<RMat> efficiency = std::nullopt);

std::vector<double> probabilities(const Pom& pom, const Mat& rho);

// Coordinates in the trace-orthonormal generalized Gell-Mann basis.
// Element 0 is 1/sqrt(d); real for Hermitian input.
RVec superket(const Mat& op);
Mat from_superket(const RVec& v, int d);
std::vector<Mat> gell_mann_basis(int d);

constexpr double kRankTol = 1e-9;

struct GramResult {
  RMat gram;
  int rank = 0;
};
GramResult gram_matrix(const Pom& pom);

// Frame superoperator in the superket basis (real symmetric, d^2 x d^2).
RMat frame_superoperator(const Pom& pom);
int numeric_rank(const RMat& m, double rel_tol = kRankTol);

struct DualFrame {
  std::vector<Mat> duals;
};
DualFrame dual_frame(const Pom& pom);
DualFrame sic_dual_closed_form(const Pom& pom);

enum class StandardPom { tetrahedron, trine, bell_basis, product_sic, pauli_basis };
Pom build_standard(StandardPom kind, int n = 1);
// "tetrahedron", "trine", "bell", "product_sic:<n>", "pauli:<n>"
Pom build_standard(const std::string& id);

Pom build_random(int dim, int count, std::uint64_t seed);

// Pi'_j = sum_k eta_jk Pi_k.
Pom apply_efficiency(const Pom& pom, const RMat& eta);

struct MeasurementSubspace {
  std::vector<Mat> measured;    // Gamma_1 .. Gamma_{n>0}
  std::vector<Mat> complement;  // remaining orthonormal Hermitian operators
};
MeasurementSubspace measurement_subspace(const Pom& pom);

// Tetrahedron Bloch vectors.
std::vector<std::array<double, 3>> tetrahedron_bloch();

}  // namespace tomo
