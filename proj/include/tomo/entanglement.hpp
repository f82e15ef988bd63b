#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "tomo/pom.hpp"
#include "tomo/state_est.hpp"

namespace tomo {

// u1, u2 index the Weyl operators {Z, X, iXZ} (1-based); a in {0, 1}.
struct WitnessSetting {
  int u1 = 1, u2 = 1, a = 0;
  bool operator==(const WitnessSetting&) const = default;
};

struct WitnessBasis {
  // Ordering: two product kets, then the two maximally entangled kets
  // (images of |00>, |11>, Psi+, Psi-).
  std::array<Vec, 4> kets;
  std::array<Mat, 4> projectors;
  WitnessSetting setting;
  Mat wp1, wp2;  // local unitaries W1, W2 with kets = (W1 x W2)|canonical>

  // Family member cos(alpha)|e1> + sin(alpha)|e2> whose partial transpose is
  // diagonal in this basis.
  Vec family_ket(double alpha) const;
};

struct CriterionResult {
  bool violated = false;
  double margin = 0.0;
};
CriterionResult witness_criterion(const std::array<double, 4>& f);

using OpTriple = std::array<Mat, 3>;

OpTriple weyl_u();
// Complementary lists: V_k must anticommute with U_k, giving 2^3 choices.
// Variant 0 is the canonical list {X, iXZ, Z}.
OpTriple v_list(int variant = 0);
int v_list_count();

std::vector<WitnessSetting> all_settings();  // 18, ordered (u1, u2, a)
OpTriple observables_for_setting(const WitnessSetting& s, const OpTriple& v = v_list(0));

// Coefficients tr(P O)/4 over the 15 non-identity two-qubit Paulis.
RVec pauli_coefficients(const Mat& op);
RMat observable_matrix(const std::vector<WitnessSetting>& settings, const OpTriple& v = v_list(0));

std::vector<WitnessBasis> build_six_bases();
Pom witness_pom(const WitnessBasis& b);

struct IcRow {
  std::array<int, 6> settings;  // indices into all_settings()
  int rank = 0;
  std::vector<double> singular_values;
};
struct IcCensus {
  int candidates = 0;
  int ic_count = 0;
  int classes = 0;
  std::vector<IcRow> rows;
  std::vector<std::pair<std::vector<double>, int>> class_sizes;
};
IcCensus enumerate_ic_sets(const OpTriple& v = v_list(0), int threads = 1, bool keep_rows = true);

// Counts for the requested basis index.
using BasisProvider = std::function<std::vector<double>(int basis)>;

struct AdaptiveOptions {
  bool adaptive = true;      // false: bases in index order
  int first = 0;
  bool separable_check = false;
  EstimationConfig estimator;
};
struct AdaptiveResult {
  bool detected = false;
  int bases_used = 0;
  std::vector<int> order;
  std::vector<double> margins;
  std::optional<Mat> final_estimator;
  bool separable_certificate = false;
};
AdaptiveResult adaptive_witness_measure(const BasisProvider& provider, const std::vector<WitnessBasis>& bases,
                                        const AdaptiveOptions& opt = {});

struct SeparableResult {
  double max_loglik_sep = 0.0;
  double max_loglik_ml = 0.0;
  bool certificate = false;  // entangled
  bool converged = false;
  int iterations = 0;
  Mat estimator;
};
SeparableResult ml_separable(const Frequencies& f, const Pom& pom, const EstimationConfig& cfg = {},
                             int terms = 16, double decision_gap = 1e-6);

}  // namespace tomo
