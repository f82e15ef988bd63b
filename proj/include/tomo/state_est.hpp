#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tomo/pom.hpp"

namespace tomo {

// Detection counts. Counts are stored as reals so that exact expected
// counts (N * p_j) can be used as noiseless data.
struct Frequencies {
  std::vector<double> counts;

  double total() const;
  std::vector<double> freqs() const;
  static Frequencies from_counts(const std::vector<double>& n);
  static Frequencies from_probabilities(const std::vector<double>& p, double N);
};

enum class LineSearch { none, quadratic3, quadratic10 };

struct EstimationConfig {
  double epsilon = 0.0;  // 0 selects the estimator's default step
  double lambda = 1e-3;
  double precision = 1e-7;
  int max_iter = 200000;
  LineSearch line_search = LineSearch::none;
  double xi = 0.5;
  double beta = 0.5;
  std::uint64_t seed = 1;
  bool exact_gradient = false;  // Scheme A/B: Gauss-Legendre integral form
  int missing_outcome = -1;     // Scheme B: index of the unobserved outcome
  std::optional<Mat> start;     // default 1/D
  bool zero_lambda_if_ic = true; // mlme_new: the plateau is a point, use plain ML
};

struct EstimationResult {
  Mat estimator;
  int iterations = 0;
  double residual = 0.0;
  // Objective per accepted iteration: log-likelihood for ML, log-likelihood
  // plus N*lambda*S for MLME, log-likelihood plus beta*log det for HML.
  std::vector<double> loglik_trace;
  double entropy = 0.0;
  bool converged = false;  // false means max_iter was hit (MaxIterExceeded)
  int zero_prob_warnings = 0;
};

double log_likelihood(const Frequencies& f, const Pom& pom, const Mat& rho, bool imperfect = false);
Mat r_operator(const Frequencies& f, const Pom& pom, const Mat& rho, int* warnings = nullptr);

// Residual certificates.
double ml_residual(const Frequencies& f, const Pom& pom, const Mat& rho);
double mlme_residual(const Frequencies& f, const Pom& pom, const Mat& rho, double lambda, bool imperfect = false);
double hml_residual(const Frequencies& f, const Pom& pom, const Mat& rho, double beta);

EstimationResult ml_dg(const Frequencies& f, const Pom& pom, const EstimationConfig& cfg = {});
EstimationResult ml_cg(const Frequencies& f, const Pom& pom, const EstimationConfig& cfg = {});
Mat linear_inversion(const Frequencies& f, const Pom& pom);
EstimationResult mlme_scheme_a(const Frequencies& f, const Pom& pom, const EstimationConfig& cfg = {});
EstimationResult mlme_scheme_b(const Frequencies& f, const Pom& pom, const EstimationConfig& cfg);
EstimationResult mlme_new(const Frequencies& f, const Pom& pom, const EstimationConfig& cfg = {}, bool imperfect = false);
EstimationResult hml(const Frequencies& f, const Pom& pom, const EstimationConfig& cfg = {});

// Steepest ascent of the imperfect-detection likelihood from a given start;
// used to sample points of the likelihood plateau.
EstimationResult ml_imperfect(const Frequencies& f, const Pom& pom, const EstimationConfig& cfg = {});

// Classical maximum entropy: exp(sum lambda_j Pi_j)/Z reproducing f exactly.
struct MaxEntResult {
  bool feasible = false;
  Mat estimator;
  double mismatch = 0.0;  // max_j |p_j - f_j| at the end
  int iterations = 0;
};
MaxEntResult classical_max_entropy(const Frequencies& f, const Pom& pom, int max_iter = 20000, double tol = 1e-6);

}  // namespace tomo
