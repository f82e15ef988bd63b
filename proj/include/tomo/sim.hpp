#pragma once

#include <string>
#include <vector>

#include "tomo/pom.hpp"
#include "tomo/process_est.hpp"
#include "tomo/rng.hpp"
#include "tomo/state_est.hpp"

namespace tomo {

// Multinomial counts. When sum(probs) < 1 the missing mass is undetected:
// the detected total is drawn first as Binomial(N, sum(probs)).
std::vector<double> sample_counts(const std::vector<double>& probs, long long N, RngStream& rng);

// sum_k |a_k|^nu |psi_k><psi_k| / sum_k |a_k|^nu over dim Haar kets.
Mat random_state(int dim, double nu, RngStream& rng);

// Estimator dispatch by id: ml_dg, ml_cg, mlme_a, mlme_b, mlme_new, hml, li.
EstimationResult run_estimator(const std::string& id, const Frequencies& f, const Pom& pom,
                               const EstimationConfig& cfg);

struct ExperimentSpec {
  Mat truth;
  Pom pom;
  std::string estimator = "ml_dg";
  EstimationConfig config;
  long long N = 1000;
  int runs = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  bool include_timing = true;  // false writes wall_ms = 0 for byte-identical output
};

struct RunRecord {
  int run_id = 0;
  std::string estimator;
  long long N = 0;
  int iterations = 0;
  double residual = 0.0;
  double distance = 0.0;
  double entropy = 0.0;
  double wall_ms = 0.0;
  bool ok = true;
  std::string error;
};

struct BatchResult {
  double mean_distance = 0.0;
  int failures = 0;
  std::vector<RunRecord> records;
};

BatchResult run_batch(const ExperimentSpec& spec);
std::string batch_csv(const BatchResult& b);

// Samples counts for each requested input from E_true; draws are taken from
// a single stream in call order.
InputProvider qpt_sampling_provider(const Mat& E_true, const Pom& pom, long long N, int din, int dout,
                                    std::uint64_t seed);

}  // namespace tomo
