#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tomo/pom.hpp"

namespace tomo {

struct Channel {
  std::vector<Mat> kraus;
  int din = 0, dout = 0;
};

// Validates sum K^dagger K = 1 within 1e-10.
Channel make_channel(std::vector<Mat> kraus);
Channel identity_channel(int d);
Channel depolarizing_channel(int d);
Channel cnot_channel();
Channel cnot_imperfect(double eps);
Channel cnot_random(double eps, std::uint64_t seed);
Channel toffoli_channel();
// "cnot", "cnot_imperfect(0.1)", "cnot_random(0.1,7)", "toffoli", "identity:<d>"
Channel channel_from_id(const std::string& id);

Mat unitary_cnot();

// Choi operator on H (input) x K (output): E = sum_jk |j><k| x M(|j><k|).
Mat choi_from_kraus(const Channel& ch);
Mat apply_channel(const Mat& E, const Mat& rho, int din, int dout);
Mat apply_kraus(const Channel& ch, const Mat& rho);
double channel_entropy(const Mat& E, int din);
// Largest singular value of tr_K{E} - 1_H.
double tp_defect(const Mat& E, int din, int dout);
// Random trace-preserving Choi operator (Ginibre, then exact normalization).
Mat random_tp_choi(int din, int dout, std::uint64_t seed, std::uint64_t stream = 0);
double choi_distance(const Mat& a, const Mat& b, int din);  // D_tr of E/D_i

struct QptData {
  int din = 0, dout = 0;
  std::vector<Mat> inputs;                  // L states on H
  Pom pom;                                  // M outcomes on K (may be subnormalized)
  std::vector<std::vector<double>> counts;  // L x M
};

// Product-SIC input states for n qubits in a spread-out order (see README).
std::vector<Mat> sic_inputs(int n_qubits);
// Products of |0>, |1>, |+>, |+i> (4^n states).
std::vector<Mat> pauli_inputs(int n_qubits);

// p_lm = tr{E (rho_l^T x Pi_m)} / L, row-major in (l, m).
std::vector<double> qpt_probabilities(const Mat& E, const QptData& data);
QptData qpt_exact_data(const Mat& E, const std::vector<Mat>& inputs, const Pom& pom, double N, int din, int dout);
// IC when the span of {rho_l^T x Pi_m} is the full operator space.
bool qpt_informationally_complete(const QptData& data);

struct QptConfig {
  double lambda = 1e-3;
  bool zero_lambda_if_ic = true;  // IC data: plain ML
  double epsilon = 0.0;           // 0 selects 0.5 with bold-driver adaptation
  double precision = 1e-7;
  int max_iter = 20000;
  std::optional<Mat> start;       // default 1/D_o
  bool imperfect = false;         // use W - W0 for subnormalized POMs
};

struct QptResult {
  Mat E;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  double max_tp_defect = 0.0;
  double loglik = 0.0;  // sum_lm f_lm log p_lm, f normalized to one
  std::vector<double> objective_trace;
};

QptResult mlme_qpt(const QptData& data, const QptConfig& cfg = {});
// Scales Pi_m by eta_m; a subnormalized result runs the imperfect-detection iteration.
QptResult mlme_qpt_imperfect(const QptData& data, const std::vector<double>& eta, const QptConfig& cfg = {});
double qpt_residual(const Mat& E, const QptData& data, double lambda);

// Counts for one input state (provider failure is propagated).
using InputProvider = std::function<std::vector<double>(const Mat& input)>;

enum class QptStrategy { none, adaptive, mpl, hybrid };
enum class SelectionMode { max_distance_to_previous, min_distance_to_prior };

struct MplConfig {
  int starts = 8;
  double eps1 = 0.05, eps2 = 0.05;
  double precision = 1e-6;
  int max_iter = 3000;
  double dedup_tol = 1e-4;
  std::uint64_t seed = 1;
};

struct MplSolution {
  Mat rho, E;
  double functional = 0.0;
  double residual_e = 0.0, residual_rho = 0.0;
  bool converged = false;
  std::vector<double> trace;  // projected log-likelihood per accepted step
};
struct MplResult {
  std::vector<MplSolution> solutions;  // deduplicated
  int converged_starts = 0;
  int repeats = 0;  // converged starts that matched an earlier solution
  bool warning = false;
  double repeat_fraction() const;
};
// data holds the previous rounds; counts are normalized per input.
MplResult mpl_optimize(const QptData& data, const Mat& E_prior, const MplConfig& cfg);
double projected_loglik(const QptData& data, const Mat& E_prior, const Mat& E, const Mat& rho);

struct StrategyConfig {
  QptConfig mlme;
  QptConfig projected{.precision = 1e-4, .max_iter = 500};  // candidate ranking only
  int rounds = 0;       // 0: pool size
  double stop_threshold = 0.0;
  SelectionMode selection = SelectionMode::max_distance_to_previous;
  MplConfig mpl;
  double hybrid_threshold = 0.5;
  int first = 0;
};

struct RoundRecord {
  int L = 0;
  Mat input;
  int pool_index = -1;  // -1 for an MPL-chosen input
  Mat estimator;
  double step_distance = 0.0;  // to the previous round's estimator
  double loglik = 0.0;
  bool from_mpl = false;
  double repeat_fraction = 0.0;
};

std::vector<RoundRecord> run_strategy(QptStrategy kind, const InputProvider& provider, const std::vector<Mat>& pool,
                                      const Pom& pom, const Mat& E_prior, int din, int dout,
                                      const StrategyConfig& cfg);

struct PlateauResult {
  double delta = 0.0;
  Mat centroid;
  std::vector<Mat> samples;
};
PlateauResult plateau_spread(const QptData& data, int n_samples, const QptConfig& cfg, std::uint64_t seed);

// none, adaptive (alias fixed), mpl, hybrid.
QptStrategy parse_strategy(const std::string& s);

}  // namespace tomo
