#include "tomo/sim.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

namespace tomo {

std::vector<double> sample_counts(const std::vector<double>& probs, long long N, RngStream& rng) {
  double total = 0.0;
  for (double p : probs) {
    if (p < -1e-12) throw Error("negative probability");
    total += std::max(p, 0.0);
  }
  if (total > 1.0 + 1e-12) throw Error("probabilities sum above one");
  std::vector<double> counts(probs.size(), 0.0);
  if (N <= 0 || total <= 0.0) return counts;
  long long left = N;
  if (total < 1.0 - 1e-15) {
    std::binomial_distribution<long long> det(N, std::min(total, 1.0));
    left = det(rng.engine());
  }
  double mass = total;
  for (size_t j = 0; j < probs.size() && left > 0; ++j) {
    double p = std::max(probs[j], 0.0);
    if (j + 1 == probs.size() || mass <= p) {
      counts[j] = static_cast<double>(left);
      left = 0;
      break;
    }
    double q = std::clamp(p / mass, 0.0, 1.0);
    std::binomial_distribution<long long> b(left, q);
    long long k = b(rng.engine());
    counts[j] = static_cast<double>(k);
    left -= k;
    mass -= p;
  }
  return counts;
}

Mat random_state(int dim, double nu, RngStream& rng) {
  if (nu < 0.0) throw Error("purity exponent must be nonnegative");
  Mat rho = Mat::Zero(dim, dim);
  std::vector<double> w(dim);
  double s = 0.0;
  std::vector<Vec> kets;
  for (int k = 0; k < dim; ++k) {
    kets.push_back(haar_ket(dim, rng));
    w[k] = std::pow(std::abs(rng.complex_normal()), nu);
    s += w[k];
  }
  for (int k = 0; k < dim; ++k) rho += (w[k] / s) * projector(kets[k]);
  return hermitize(rho);
}

EstimationResult run_estimator(const std::string& id, const Frequencies& f, const Pom& pom,
                               const EstimationConfig& cfg) {
  if (id == "ml_dg") return ml_dg(f, pom, cfg);
  if (id == "ml_cg") return ml_cg(f, pom, cfg);
  if (id == "mlme_a") return mlme_scheme_a(f, pom, cfg);
  if (id == "mlme_b") return mlme_scheme_b(f, pom, cfg);
  if (id == "mlme_new") return mlme_new(f, pom, cfg, !pom.complete);
  if (id == "hml") return hml(f, pom, cfg);
  if (id == "ml_imperfect") return ml_imperfect(f, pom, cfg);
  if (id == "li") {
    EstimationResult r;
    r.estimator = linear_inversion(f, pom);
    r.converged = true;
    return r;
  }
  throw ConfigError("unknown estimator id: " + id);
}

BatchResult run_batch(const ExperimentSpec& spec) {
  if (spec.runs < 1 || spec.N < 1) throw ConfigError("runs and N must be at least 1");
  BatchResult out;
  out.records.resize(spec.runs);
  const auto p = probabilities(spec.pom, spec.truth);
  auto one = [&](int run) {
    RunRecord& rec = out.records[run];
    rec.run_id = run;
    rec.estimator = spec.estimator;
    rec.N = spec.N;
    RngStream rng(spec.seed, static_cast<std::uint64_t>(run));
    auto t0 = std::chrono::steady_clock::now();
    try {
      Frequencies f = Frequencies::from_counts(sample_counts(p, spec.N, rng));
      EstimationConfig c = spec.config;
      c.seed = spec.seed * 7919ULL + run;
      EstimationResult r = run_estimator(spec.estimator, f, spec.pom, c);
      rec.iterations = r.iterations;
      rec.residual = r.residual;
      rec.distance = trace_class_distance(r.estimator, spec.truth);
      rec.entropy = r.entropy;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    if (spec.include_timing)
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };
  const int threads = std::max(1, std::min(spec.threads, spec.runs));
  if (threads == 1) {
    for (int r = 0; r < spec.runs; ++r) one(r);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int r = t; r < spec.runs; r += threads) one(r);
      });
    for (auto& th : pool) th.join();
  }
  double s = 0.0;
  int ok = 0;
  for (const auto& r : out.records) {
    if (!r.ok) {
      ++out.failures;
      continue;
    }
    s += r.distance;
    ++ok;
  }
  out.mean_distance = ok ? s / ok : 0.0;
  return out;
}

std::string batch_csv(const BatchResult& b) {
  std::ostringstream os;
  os << "run_id,estimator,N,iterations,residual,distance,entropy,wall_ms\n";
  os << std::setprecision(10);
  for (const auto& r : b.records) {
    os << r.run_id << ',' << r.estimator << ',' << r.N << ',' << r.iterations << ',' << r.residual << ','
       << r.distance << ',' << r.entropy << ',' << std::fixed << std::setprecision(3) << r.wall_ms
       << std::defaultfloat << std::setprecision(10) << '\n';
  }
  return os.str();
}

InputProvider qpt_sampling_provider(const Mat& E_true, const Pom& pom, long long N, int din, int dout,
                                    std::uint64_t seed) {
  auto rng = std::make_shared<RngStream>(seed, 0x717074);
  return [=](const Mat& input) {
    auto p = probabilities(pom, apply_channel(E_true, input, din, dout));
    return sample_counts(p, N, *rng);
  };
}

}  // namespace tomo
