#include "tomo/state_est.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tomo {

namespace {

constexpr double kProbFloor = 1e-14;

struct Data {
  const Pom& pom;
  std::vector<double> n;
  double N;
  std::vector<double> f;
  int dim;

  Data(const Frequencies& fr, const Pom& p) : pom(p), n(fr.counts), N(fr.total()), f(fr.freqs()), dim(p.dim) {
    if (n.size() != p.size()) throw DimensionMismatch("count vector length differs from the POM size");
    if (N <= 0.0) throw Error("no detected copies");
  }

  std::vector<double> probs(const Mat& rho) const { return probabilities(pom, rho); }

  // Floored log-likelihood, used inside iterations.
  double loglik(const std::vector<double>& p) const {
    double s = 0.0;
    for (size_t j = 0; j < p.size(); ++j)
      if (n[j] > 0.0) s += n[j] * std::log(std::max(p[j], kProbFloor));
    return s;
  }

  double loglik_imperfect(const std::vector<double>& p) const {
    double eta = std::accumulate(p.begin(), p.end(), 0.0);
    return loglik(p) - N * std::log(eta);
  }

  Mat rop(const std::vector<double>& p, int* warn = nullptr) const {
    Mat r = Mat::Zero(dim, dim);
    for (size_t j = 0; j < p.size(); ++j) {
      if (n[j] <= 0.0) continue;
      double pj = p[j];
      if (pj < kProbFloor) {
        pj = kProbFloor;
        if (warn) ++*warn;
      }
      r += (f[j] / pj) * pom.outcomes[j];
    }
    return r;
  }

  Mat gsum() const { return pom.completeness(); }
};

Mat start_state(const EstimationConfig& cfg, int d) {
  if (cfg.start) {
    if (cfg.start->rows() != d) throw DimensionMismatch("start state has wrong dimension");
    return make_state(*cfg.start);
  }
  return Mat::Identity(d, d) / double(d);
}

Mat normalize(const Mat& m) {
  Mat h = hermitize(m);
  return h / h.trace().real();
}

Mat sandwich(const Mat& rho, const Mat& a) {
  // (1 + a) rho (1 + a)^dagger / tr
  Mat m = Mat::Identity(rho.rows(), rho.cols()) + a;
  return normalize(m * rho * m.adjoint());
}

void finish(EstimationResult& r, const Data& d) {
  r.entropy = von_neumann_entropy(r.estimator);
  auto p = d.probs(r.estimator);
  if (r.converged)
    for (size_t j = 0; j < p.size(); ++j)
      if (d.n[j] > 0.0 && p[j] < kProbFloor)
        throw ZeroProbabilityWithCounts("estimator assigns zero probability to an observed outcome");
}

// 16-point Gauss-Legendre rule on [0, 1].
const std::vector<std::pair<double, double>>& gauss_legendre16() {
  static const std::vector<std::pair<double, double>> rule = [] {
    const int n = 16;
    std::vector<std::pair<double, double>> out;
    for (int i = 1; i <= n; ++i) {
      double x = std::cos(M_PI * (i - 0.25) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2.0 * k - 1) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      double w = 2.0 / ((1.0 - x * x) * dp * dp);
      out.emplace_back(0.5 * (x + 1.0), 0.5 * w);
    }
    return out;
  }();
  return rule;
}

// exp(S)/tr for Hermitian S, shifted for stability; also returns the
// eigen-decomposition used by the exact gradient.
struct ExpFamily {
  Mat rho;
  Mat u;
  RVec s;
};

ExpFamily exp_state(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(s));
  if (es.info() != Eigen::Success) throw EigensolverFailure("eigensolver failed in exponential family");
  RVec ev = es.eigenvalues();
  double mx = ev.maxCoeff();
  RVec w = (ev.array() - mx).exp();
  w /= w.sum();
  ExpFamily e;
  e.u = es.eigenvectors();
  e.s = ev;
  e.rho = hermitize(e.u * w.cast<cplx>().asDiagonal() * e.u.adjoint());
  return e;
}

// int_0^1 e^{xS} X e^{-xS} dx via Gauss-Legendre in the eigenbasis of S.
Mat conj_integral(const ExpFamily& e, const Mat& x) {
  Mat xt = e.u.adjoint() * x * e.u;
  const auto& rule = gauss_legendre16();
  const Eigen::Index d = xt.rows();
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) {
      double ds = e.s(a) - e.s(b);
      double acc = 0.0;
      for (const auto& [node, wt] : rule) acc += wt * std::exp(node * ds);
      xt(a, b) *= acc;
    }
  return e.u * xt * e.u.adjoint();
}

double vdot(const Mat& a, const Mat& b) { return (a.adjoint() * b).trace().real(); }

// Strict ascent is always accepted. Within the rounding band of the objective
// a step must also lower the residual, which keeps progress measurable once
// likelihood differences fall below double resolution.
template <class F>
bool accept_step(double next, double cur, F&& trial_residual, double cur_residual) {
  if (next > cur) return true;
  if (next < cur - 1e-12 * (1.0 + std::abs(cur))) return false;
  return trial_residual() < cur_residual;
}

double ml_res(const Data& d, const Mat& rho) { return trace_norm(d.rop(d.probs(rho)) * rho - rho); }

// Stops loops whose residual has not improved for a while.
struct StallGuard {
  double best = std::numeric_limits<double>::infinity();
  int since = 0;
  bool stalled(double r) {
    if (r < best * (1.0 - 1e-9)) {
      best = r;
      since = 0;
    } else {
      ++since;
    }
    return since > 2000;
  }
};

}  // namespace

double Frequencies::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

std::vector<double> Frequencies::freqs() const {
  double t = total();
  std::vector<double> f(counts.size());
  for (size_t j = 0; j < f.size(); ++j) f[j] = t > 0 ? counts[j] / t : 0.0;
  return f;
}

Frequencies Frequencies::from_counts(const std::vector<double>& n) {
  for (double v : n)
    if (v < 0.0) throw Error("counts must be nonnegative");
  return Frequencies{n};
}

Frequencies Frequencies::from_probabilities(const std::vector<double>& p, double N) {
  Frequencies f;
  for (double v : p) f.counts.push_back(std::max(v, 0.0) * N);
  return f;
}

double log_likelihood(const Frequencies& fr, const Pom& pom, const Mat& rho, bool imperfect) {
  Data d(fr, pom);
  auto p = d.probs(rho);
  double s = 0.0, eta = 0.0;
  for (size_t j = 0; j < p.size(); ++j) {
    eta += p[j];
    if (d.n[j] > 0.0) {
      if (p[j] <= 0.0) throw ZeroProbabilityWithCounts("zero probability for an outcome with counts");
      s += d.n[j] * std::log(p[j]);
    }
  }
  if (imperfect) s -= d.N * std::log(eta);
  return s;
}

Mat r_operator(const Frequencies& fr, const Pom& pom, const Mat& rho, int* warnings) {
  Data d(fr, pom);
  return d.rop(d.probs(rho), warnings);
}

double ml_residual(const Frequencies& fr, const Pom& pom, const Mat& rho) {
  Mat r = r_operator(fr, pom, rho);
  return trace_norm(r * rho - rho);
}

static Mat mlme_curly_r(const Data& d, const Mat& rho, const std::vector<double>& p, double lambda, bool imperfect,
                        int* warn) {
  const int D = d.dim;
  Mat r = d.rop(p, warn);
  if (imperfect) {
    double eta = std::accumulate(p.begin(), p.end(), 0.0);
    r -= d.gsum() / eta;
  } else {
    r -= Mat::Identity(D, D);
  }
  if (lambda > 0.0) {
    Mat lg = logm_h(rho, 1e-12);
    double trl = (rho * lg).trace().real();
    r -= lambda * (lg - trl * Mat::Identity(D, D));
  }
  return hermitize(r);
}

double mlme_residual(const Frequencies& fr, const Pom& pom, const Mat& rho, double lambda, bool imperfect) {
  Data d(fr, pom);
  Mat rr = mlme_curly_r(d, rho, d.probs(rho), lambda, imperfect, nullptr);
  return trace_norm(rho * rr);
}

double hml_residual(const Frequencies& fr, const Pom& pom, const Mat& rho, double beta) {
  Data d(fr, pom);
  const int D = d.dim;
  Mat r = d.rop(d.probs(rho));
  Mat e = beta * (Mat::Identity(D, D) - D * rho) + d.N * (r - Mat::Identity(D, D)) * rho;
  return trace_norm(e);
}

// ---------------------------------------------------------------- ML-DG

EstimationResult ml_dg(const Frequencies& fr, const Pom& pom, const EstimationConfig& cfg) {
  Data d(fr, pom);
  const int D = d.dim;
  EstimationResult res;
  Mat rho = start_state(cfg, D);
  double eps = cfg.epsilon > 0 ? cfg.epsilon : 0.1;
  auto p = d.probs(rho);
  double ll = d.loglik(p);
  res.loglik_trace.push_back(ll);
  const Mat I = Mat::Identity(D, D);

  auto trial = [&](const Mat& r, double e) { return sandwich(rho, 0.5 * e * (r - I)); };

  int it = 0;
  StallGuard stall;
  for (; it < cfg.max_iter; ++it) {
    Mat r = d.rop(p, &res.zero_prob_warnings);
    res.residual = trace_norm(r * rho - rho);
    if (res.residual <= cfg.precision) {
      res.converged = true;
      break;
    }
    if (stall.stalled(res.residual)) break;
    Mat next;
    if (cfg.line_search == LineSearch::none) {
      next = trial(r, eps);
    } else {
      bool improved = false;
      for (int attempt = 0; attempt < 40 && !improved; ++attempt) {
        std::vector<double> es;
        if (cfg.line_search == LineSearch::quadratic3) {
          es = {eps, 2.0 * eps};
        } else {
          for (int k = 0; k < 10; ++k) es.push_back(eps * std::pow(2.0, k - 4));
        }
        std::vector<double> ls;
        std::vector<Mat> cands;
        for (double e : es) {
          cands.push_back(trial(r, e));
          ls.push_back(d.loglik(d.probs(cands.back())));
        }
        // quadratic through (0, ll) and the first two trials
        double e1 = es[0], e2 = es[1];
        double l1 = ls[0], l2 = ls[1];
        double a = ((l2 - ll) / e2 - (l1 - ll) / e1) / (e2 - e1);
        double b = (l1 - ll) / e1 - a * e1;
        size_t best = std::max_element(ls.begin(), ls.end()) - ls.begin();
        if (cfg.line_search == LineSearch::quadratic10 && best > 0 && best + 1 < es.size()) {
          double x0 = es[best - 1], x1 = es[best], x2 = es[best + 1];
          double y0 = ls[best - 1], y1 = ls[best], y2 = ls[best + 1];
          double d1 = (y1 - y0) / (x1 - x0), d2 = (y2 - y1) / (x2 - x1);
          a = (d2 - d1) / (x2 - x0);
          b = d1 - a * (x0 + x1);
        }
        if (a < 0.0) {
          double es_star = -b / (2.0 * a);
          double hi = es.back() * 4.0;
          if (es_star > 0.0 && es_star < hi) {
            Mat c = trial(r, es_star);
            double lc = d.loglik(d.probs(c));
            es.push_back(es_star);
            ls.push_back(lc);
            cands.push_back(c);
          }
        }
        best = std::max_element(ls.begin(), ls.end()) - ls.begin();
        if (accept_step(ls[best], ll, [&] { return ml_res(d, cands[best]); }, res.residual)) {
          next = cands[best];
          eps = std::clamp(es[best], 1e-8, 1e4);
          if (cfg.line_search == LineSearch::quadratic10) eps = std::clamp(es[best], 1e-8, 1e4);
          improved = true;
        } else {
          eps *= 0.1;
        }
      }
      if (!improved) break;
    }
    rho = next;
    p = d.probs(rho);
    ll = d.loglik(p);
    res.loglik_trace.push_back(ll);
  }
  res.iterations = it;
  res.estimator = rho;
  if (!res.converged) res.residual = ml_residual(fr, pom, rho);
  finish(res, d);
  return res;
}

// ---------------------------------------------------------------- ML-CG

EstimationResult ml_cg(const Frequencies& fr, const Pom& pom, const EstimationConfig& cfg) {
  Data d(fr, pom);
  const int D = d.dim;
  const Mat I = Mat::Identity(D, D);
  EstimationResult res;
  Mat a = sqrtm_psd(start_state(cfg, D));
  a /= std::sqrt((a.adjoint() * a).trace().real());
  auto rho_of = [](const Mat& x) { return normalize(x.adjoint() * x); };
  Mat rho = rho_of(a);
  auto p = d.probs(rho);
  double ll = d.loglik(p);
  res.loglik_trace.push_back(ll);
  double eps = cfg.epsilon > 0 ? cfg.epsilon : 1.0;
  const bool ls3 = cfg.line_search == LineSearch::quadratic3;

  Mat r = d.rop(p, &res.zero_prob_warnings);
  Mat g = a * (r - I);
  Mat h = g;
  int it = 0;
  StallGuard stall;
  for (; it < cfg.max_iter; ++it) {
    res.residual = trace_norm(r * rho - rho);
    if (res.residual <= cfg.precision) {
      res.converged = true;
      break;
    }
    if (stall.stalled(res.residual)) break;
    bool improved = false;
    Mat a_new;
    double l_new = ll;
    for (int attempt = 0; attempt < 40 && !improved; ++attempt) {
      std::vector<double> es;
      if (ls3)
        es = {eps, 2.0 * eps};
      else
        for (int k = 0; k < 10; ++k) es.push_back(eps * std::pow(2.0, k - 4));
      std::vector<double> ls;
      for (double e : es) ls.push_back(d.loglik(d.probs(rho_of(a + e * h))));
      size_t best = std::max_element(ls.begin(), ls.end()) - ls.begin();
      double qa = 0.0, qb = 0.0;
      bool fit = false;
      if (ls3) {
        double e1 = es[0], e2 = es[1];
        qa = ((ls[1] - ll) / e2 - (ls[0] - ll) / e1) / (e2 - e1);
        qb = (ls[0] - ll) / e1 - qa * e1;
        fit = true;
      } else if (best > 0 && best + 1 < es.size()) {
        double x0 = es[best - 1], x1 = es[best], x2 = es[best + 1];
        double d1 = (ls[best] - ls[best - 1]) / (x1 - x0), d2 = (ls[best + 1] - ls[best]) / (x2 - x1);
        qa = (d2 - d1) / (x2 - x0);
        qb = d1 - qa * (x0 + x1);
        fit = true;
      }
      if (fit && qa < 0.0) {
        double xs = -qb / (2.0 * qa);
        if (xs > 0.0 && xs < es.back() * 4.0) {
          es.push_back(xs);
          ls.push_back(d.loglik(d.probs(rho_of(a + xs * h))));
        }
      }
      best = std::max_element(ls.begin(), ls.end()) - ls.begin();
      if (!(ls[best] > ll)) {
        // Likelihood differences are at rounding level: rank by residual.
        double rbest = res.residual;
        for (size_t k = 0; k < es.size(); ++k) {
          if (ls[k] < ll - 1e-12 * (1.0 + std::abs(ll))) continue;
          double rk = ml_res(d, rho_of(a + es[k] * h));
          if (rk < rbest) {
            rbest = rk;
            best = k;
          }
        }
      }
      if (accept_step(ls[best], ll, [&] { return ml_res(d, rho_of(a + es[best] * h)); }, res.residual)) {
        a_new = a + es[best] * h;
        l_new = ls[best];
        eps = std::clamp(es[best], 1e-10, 1e6);
        improved = true;
      } else if (vdot(g, h) < vdot(g, g) * (1 - 1e-12)) {
        h = g;  // restart along the gradient
      } else {
        eps *= 1e-2;
      }
    }
    if (!improved) break;
    double c = std::sqrt((a_new.adjoint() * a_new).trace().real());
    a = a_new / c;
    h /= c;
    rho = rho_of(a);
    p = d.probs(rho);
    ll = l_new;
    res.loglik_trace.push_back(ll);
    r = d.rop(p, &res.zero_prob_warnings);
    Mat g_new = a * (r - I);
    double gg = vdot(g, g);
    double gamma = gg > 0 ? std::max((vdot(g_new, g_new) - cfg.xi * vdot(g_new, g)) / gg, 0.0) : 0.0;
    h = g_new + gamma * h;
    if (vdot(g_new, h) <= 0.0) h = g_new;
    g = g_new;
  }
  res.iterations = it;
  res.estimator = rho;
  if (!res.converged) res.residual = ml_residual(fr, pom, rho);
  finish(res, d);
  return res;
}

// ---------------------------------------------------------------- LI

Mat linear_inversion(const Frequencies& fr, const Pom& pom) {
  DualFrame df = dual_frame(pom);
  auto f = fr.freqs();
  if (f.size() != pom.size()) throw DimensionMismatch("count vector length differs from the POM size");
  Mat s = Mat::Zero(pom.dim, pom.dim);
  for (size_t j = 0; j < f.size(); ++j) s += f[j] * df.duals[j];
  return hermitize(s);
}

// ---------------------------------------------------------------- MLME A/B

namespace {

// Ascent in the exponential family exp(sum lambda_j Q_j)/Z. The objective is
// the (perfect or imperfect) log-likelihood; gradients follow the symmetric
// approximation unless cfg.exact_gradient is set.
EstimationResult exp_family_ascent(const Data& d, const std::vector<Mat>& q, bool imperfect,
                                   const EstimationConfig& cfg) {
  const int D = d.dim;
  const size_t K = q.size();
  EstimationResult res;
  std::vector<double> lam(K, 0.0);
  auto build = [&](const std::vector<double>& l) {
    Mat s = Mat::Zero(D, D);
    for (size_t j = 0; j < K; ++j) s += l[j] * q[j];
    return exp_state(s);
  };
  auto objective = [&](const std::vector<double>& p) { return imperfect ? d.loglik_imperfect(p) : d.loglik(p); };
  auto residual_op = [&](const Mat& rho, const std::vector<double>& p) {
    Mat r = d.rop(p);
    if (imperfect) {
      double eta = std::accumulate(p.begin(), p.end(), 0.0);
      return Mat(r * rho - d.gsum() * rho / eta);
    }
    return Mat(r * rho - rho);
  };

  ExpFamily ef = build(lam);
  auto p = d.probs(ef.rho);
  double obj = objective(p);
  res.loglik_trace.push_back(obj);
  double eps = cfg.epsilon > 0 ? cfg.epsilon : 1.0;
  int it = 0;
  StallGuard stall;
  for (; it < cfg.max_iter; ++it) {
    res.residual = trace_norm(residual_op(ef.rho, p));
    if (res.residual <= cfg.precision) {
      res.converged = true;
      break;
    }
    if (stall.stalled(res.residual)) break;
    Mat r = d.rop(p, &res.zero_prob_warnings);
    if (imperfect) {
      double eta = std::accumulate(p.begin(), p.end(), 0.0);
      r -= d.gsum() / eta;
    } else {
      r -= Mat::Identity(D, D);
    }
    std::vector<double> grad(K);
    if (cfg.exact_gradient) {
      Mat integ = conj_integral(ef, r);
      for (size_t j = 0; j < K; ++j) grad[j] = (ef.rho * q[j] * integ).trace().real();
    } else {
      for (size_t j = 0; j < K; ++j) grad[j] = 0.5 * (ef.rho * (q[j] * r + r * q[j])).trace().real();
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      std::vector<double> lt(K);
      for (size_t j = 0; j < K; ++j) lt[j] = lam[j] + eps * grad[j];
      ExpFamily et = build(lt);
      auto pt = d.probs(et.rho);
      double ot = objective(pt);
      if (accept_step(ot, obj, [&] { return trace_norm(residual_op(et.rho, pt)); }, res.residual)) {
        lam = lt;
        ef = et;
        p = pt;
        obj = ot;
        eps = std::min(eps * 1.5, 1e12);
        accepted = true;
        break;
      }
      eps *= 0.5;
    }
    if (!accepted) break;
    res.loglik_trace.push_back(obj);
  }
  res.iterations = it;
  res.estimator = ef.rho;
  if (!res.converged) res.residual = trace_norm(residual_op(ef.rho, p));
  return res;
}

}  // namespace

EstimationResult mlme_scheme_a(const Frequencies& fr, const Pom& pom, const EstimationConfig& cfg) {
  Data d(fr, pom);
  EstimationResult res = exp_family_ascent(d, pom.outcomes, false, cfg);
  finish(res, d);
  return res;
}

EstimationResult ml_imperfect(const Frequencies& fr, const Pom& pom, const EstimationConfig& cfg) {
  Data d(fr, pom);
  const int D = d.dim;
  EstimationResult res;
  Mat rho = start_state(cfg, D);
  const Mat g = d.gsum();
  auto p = d.probs(rho);
  double obj = d.loglik_imperfect(p);
  res.loglik_trace.push_back(obj);
  double eps = cfg.epsilon > 0 ? cfg.epsilon : 0.1;
  int it = 0;
  StallGuard stall;
  for (; it < cfg.max_iter; ++it) {
    double eta = std::accumulate(p.begin(), p.end(), 0.0);
    Mat r = d.rop(p, &res.zero_prob_warnings) - g / eta;
    res.residual = trace_norm(r * rho);
    if (res.residual <= cfg.precision) {
      res.converged = true;
      break;
    }
    if (stall.stalled(res.residual)) break;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Mat t = sandwich(rho, 0.5 * eps * r);
      auto pt = d.probs(t);
      double ot = d.loglik_imperfect(pt);
      auto trial_res = [&] {
        double et = std::accumulate(pt.begin(), pt.end(), 0.0);
        return trace_norm((d.rop(pt) - g / et) * t);
      };
      if (accept_step(ot, obj, trial_res, res.residual)) {
        rho = t;
        p = pt;
        obj = ot;
        eps = std::min(eps * 1.5, 1e6);
        accepted = true;
        break;
      }
      eps *= 0.5;
    }
    if (!accepted) break;
    res.loglik_trace.push_back(obj);
  }
  res.iterations = it;
  res.estimator = rho;
  finish(res, d);
  return res;
}

EstimationResult mlme_scheme_b(const Frequencies& fr, const Pom& pom, const EstimationConfig& cfg) {
  const int k = cfg.missing_outcome;
  if (k < 0) return mlme_scheme_a(fr, pom, cfg);
  if (k >= static_cast<int>(pom.size())) throw DimensionMismatch("missing outcome index out of range");
  // Observed sub-POM and its data.
  std::vector<Mat> obs;
  std::vector<double> cnt;
  for (size_t j = 0; j < pom.size(); ++j) {
    if (static_cast<int>(j) == k) continue;
    obs.push_back(pom.outcomes[j]);
    cnt.push_back(fr.counts[j]);
  }
  Pom sub = make_pom(obs);
  Frequencies fo = Frequencies::from_counts(cnt);

  EstimationConfig ref = cfg;
  ref.start.reset();
  ref.precision = std::max(cfg.precision, 1e-9);
  EstimationResult ml = ml_imperfect(fo, sub, ref);
  auto p0 = probabilities(sub, ml.estimator);
  double s0 = std::accumulate(p0.begin(), p0.end(), 0.0);

  std::vector<Mat> q;
  for (size_t j = 0; j < obs.size(); ++j) q.push_back(obs[j] + (p0[j] / s0) * pom.outcomes[k]);
  Data d(fo, sub);
  EstimationResult res = exp_family_ascent(d, q, true, cfg);
  finish(res, d);
  return res;
}

// ---------------------------------------------------------------- new MLME

EstimationResult mlme_new(const Frequencies& fr, const Pom& pom, const EstimationConfig& cfg, bool imperfect) {
  Data d(fr, pom);
  const int D = d.dim;
  EstimationResult res;
  Mat rho = start_state(cfg, D);
  const double lambda = cfg.zero_lambda_if_ic && gram_matrix(pom).rank == D * D ? 0.0 : cfg.lambda;
  auto objective = [&](const Mat& r, const std::vector<double>& p) {
    double l = imperfect ? d.loglik_imperfect(p) : d.loglik(p);
    return l + d.N * lambda * von_neumann_entropy(r);
  };
  auto p = d.probs(rho);
  double obj = objective(rho, p);
  res.loglik_trace.push_back(obj);
  double eps = cfg.epsilon > 0 ? cfg.epsilon : 0.1;
  int it = 0;
  StallGuard stall;
  for (; it < cfg.max_iter; ++it) {
    Mat rr = mlme_curly_r(d, rho, p, lambda, imperfect, &res.zero_prob_warnings);
    res.residual = trace_norm(rho * rr);
    if (res.residual <= cfg.precision) {
      res.converged = true;
      break;
    }
    if (stall.stalled(res.residual)) break;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Mat t = sandwich(rho, eps * rr);
      auto pt = d.probs(t);
      double ot = objective(t, pt);
      auto trial_res = [&] { return trace_norm(t * mlme_curly_r(d, t, pt, lambda, imperfect, nullptr)); };
      if (accept_step(ot, obj, trial_res, res.residual)) {
        rho = t;
        p = pt;
        obj = ot;
        eps = std::min(eps * 1.5, 1e6);
        accepted = true;
        break;
      }
      eps *= 0.5;
    }
    if (!accepted) break;
    res.loglik_trace.push_back(obj);
  }
  res.iterations = it;
  res.estimator = rho;
  finish(res, d);
  return res;
}

// ---------------------------------------------------------------- HML

EstimationResult hml(const Frequencies& fr, const Pom& pom, const EstimationConfig& cfg) {
  Data d(fr, pom);
  const int D = d.dim;
  const Mat I = Mat::Identity(D, D);
  const double beta = cfg.beta;
  if (!(beta > 0.0 && beta <= 1.0)) throw Error("hedging parameter beta must lie in (0, 1]");
  EstimationResult res;
  Mat rho = start_state(cfg, D);
  auto objective = [&](const Mat& r, const std::vector<double>& p) {
    RVec ev = eigenvalues_h(r);
    double ld = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) ld += std::log(std::max(ev(i), 1e-300));
    return d.loglik(p) + beta * ld;
  };
  auto p = d.probs(rho);
  double obj = objective(rho, p);
  res.loglik_trace.push_back(obj);
  double eps = cfg.epsilon > 0 ? cfg.epsilon : 1.0 / d.N;
  int it = 0;
  StallGuard stall;
  for (; it < cfg.max_iter; ++it) {
    Mat r = d.rop(p, &res.zero_prob_warnings);
    Mat g = beta * (inverse_h(rho, 1e-300) - D * I) + d.N * (r - I);
    res.residual = trace_norm(beta * (I - D * rho) + d.N * (r - I) * rho);
    if (res.residual <= cfg.precision) {
      res.converged = true;
      break;
    }
    if (stall.stalled(res.residual)) break;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Mat t = sandwich(rho, 0.5 * eps * g);
      if (eigenvalues_h(t).minCoeff() <= 0.0) {
        eps *= 0.5;
        continue;
      }
      auto pt = d.probs(t);
      double ot = objective(t, pt);
      auto trial_res = [&] { return trace_norm(beta * (I - D * t) + d.N * (d.rop(pt) - I) * t); };
      if (accept_step(ot, obj, trial_res, res.residual)) {
        rho = t;
        p = pt;
        obj = ot;
        eps = std::min(eps * 1.5, 1e6 / d.N);
        accepted = true;
        break;
      }
      eps *= 0.5;
    }
    if (!accepted) break;
    res.loglik_trace.push_back(obj);
  }
  res.iterations = it;
  res.estimator = rho;
  finish(res, d);
  return res;
}

// ---------------------------------------------------------------- classical ME

MaxEntResult classical_max_entropy(const Frequencies& fr, const Pom& pom, int max_iter, double tol) {
  Data d(fr, pom);
  const int D = d.dim;
  const size_t K = pom.size();
  std::vector<double> lam(K, 0.0);
  auto build = [&](const std::vector<double>& l) {
    Mat s = Mat::Zero(D, D);
    for (size_t j = 0; j < K; ++j) s += l[j] * pom.outcomes[j];
    return s;
  };
  // dual objective F = log tr e^S - sum lambda_j f_j (convex, minimized)
  auto dual = [&](const std::vector<double>& l) {
    for (double x : l)
      if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
    RVec ev = eigenvalues_h(build(l));
    double mx = ev.maxCoeff();
    double z = (ev.array() - mx).exp().sum();
    double s = mx + std::log(z);
    for (size_t j = 0; j < K; ++j) s -= l[j] * d.f[j];
    return s;
  };
  MaxEntResult out;
  double fv = dual(lam);
  double eps = 1.0;
  Mat rho = exp_state(build(lam)).rho;
  for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
    auto p = d.probs(rho);
    double mism = 0.0;
    std::vector<double> g(K);
    for (size_t j = 0; j < K; ++j) {
      g[j] = p[j] - d.f[j];
      mism = std::max(mism, std::abs(g[j]));
    }
    out.mismatch = mism;
    if (mism <= tol) {
      out.feasible = true;
      break;
    }
    bool ok = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      std::vector<double> lt(K);
      for (size_t j = 0; j < K; ++j) lt[j] = lam[j] - eps * g[j];
      double ft = dual(lt);
      if (ft <= fv + 1e-13 * (1.0 + std::abs(fv))) {
        lam = lt;
        fv = ft;
        eps = std::min(eps * 1.5, 1e6);
        ok = true;
        break;
      }
      eps *= 0.5;
    }
    if (!ok) break;
    // Multipliers running off to infinity: the optimum sits on the boundary.
    double big = 0.0;
    for (double x : lam) big = std::max(big, std::abs(x));
    if (big > 1e6) break;
    rho = exp_state(build(lam)).rho;
  }
  out.estimator = rho;
  return out;
}

}  // namespace tomo
