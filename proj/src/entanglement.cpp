#include "tomo/entanglement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "tomo/rng.hpp"

namespace tomo {

namespace {

const cplx I1(0.0, 1.0);

std::array<Mat, 4> single_paulis() { return {identity(2), pauli_x(), pauli_y(), pauli_z()}; }

const std::vector<Mat>& two_qubit_paulis() {
  static const std::vector<Mat> ps = [] {
    std::vector<Mat> out;
    auto s = single_paulis();
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (a || b) out.push_back(tensor(s[a], s[b]));
    return out;
  }();
  return ps;
}

Mat wave_plate_c() {
  Mat c(2, 2);
  c << 1.0, -I1, 1.0, I1;
  return c / std::sqrt(2.0);
}

std::array<Vec, 4> canonical_kets() {
  std::array<Vec, 4> k;
  for (auto& v : k) v = Vec::Zero(4);
  const double s = 1.0 / std::sqrt(2.0);
  k[0](0) = 1.0;
  k[1](3) = 1.0;
  k[2](1) = s;
  k[2](2) = s;
  k[3](1) = s;
  k[3](2) = -s;
  return k;
}

bool diagonal_in(const Mat& op, const std::array<Vec, 4>& kets) {
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j && std::abs(kets[i].dot(op * kets[j])) > 1e-10) return false;
  return true;
}

}  // namespace

CriterionResult witness_criterion(const std::array<double, 4>& f) {
  CriterionResult r;
  r.margin = 4.0 * f[0] * f[1] - (f[2] - f[3]) * (f[2] - f[3]);
  r.violated = r.margin < 0.0;
  return r;
}

OpTriple weyl_u() { return {pauli_z(), pauli_x(), I1 * pauli_x() * pauli_z()}; }

int v_list_count() { return 8; }

OpTriple v_list(int variant) {
  if (variant < 0 || variant >= 8) throw ConfigError("V-list variant must be in [0, 8)");
  const Mat x = pauli_x(), z = pauli_z(), y = I1 * x * z;
  const std::array<std::array<Mat, 2>, 3> choices = {{{x, y}, {y, z}, {z, x}}};
  OpTriple v;
  for (int k = 0; k < 3; ++k) v[k] = choices[k][(variant >> k) & 1];
  return v;
}

std::vector<WitnessSetting> all_settings() {
  std::vector<WitnessSetting> s;
  for (int u1 = 1; u1 <= 3; ++u1)
    for (int u2 = 1; u2 <= 3; ++u2)
      for (int a = 0; a <= 1; ++a) s.push_back({u1, u2, a});
  return s;
}

OpTriple observables_for_setting(const WitnessSetting& s, const OpTriple& v) {
  if (s.u1 < 1 || s.u1 > 3 || s.u2 < 1 || s.u2 > 3 || (s.a != 0 && s.a != 1))
    throw ConfigError("invalid witness setting");
  const OpTriple u = weyl_u();
  const Mat& u1 = u[s.u1 - 1];
  const Mat& u2 = u[s.u2 - 1];
  const Mat& v1 = v[s.u1 - 1];
  const Mat& v2 = v[s.u2 - 1];
  const double sg = s.a ? -1.0 : 1.0;
  const Mat one = identity(2);
  OpTriple o;
  o[0] = tensor(u1, one) + sg * tensor(one, u2);
  o[1] = tensor(u1, u2);
  o[2] = tensor(v1, v2) - sg * tensor(Mat(v1 * u1), Mat(v2 * u2));
  for (auto& m : o) m = hermitize(m);
  return o;
}

RVec pauli_coefficients(const Mat& op) {
  const auto& ps = two_qubit_paulis();
  RVec c(15);
  for (int i = 0; i < 15; ++i) c(i) = (ps[i] * op).trace().real() / 4.0;
  return c;
}

RMat observable_matrix(const std::vector<WitnessSetting>& settings, const OpTriple& v) {
  RMat m(3 * settings.size(), 15);
  for (size_t i = 0; i < settings.size(); ++i) {
    auto o = observables_for_setting(settings[i], v);
    for (int k = 0; k < 3; ++k) m.row(3 * i + k) = pauli_coefficients(o[k]).transpose();
  }
  return m;
}

Vec WitnessBasis::family_ket(double alpha) const {
  Vec c = Vec::Zero(4);
  c(0) = std::cos(alpha);
  c(3) = std::sin(alpha);
  return tensor(wp1, Mat(wp2.conjugate())) * c;
}

std::vector<WitnessBasis> build_six_bases() {
  const Mat one = identity(2), x = pauli_x(), c = wave_plate_c();
  const Mat cd = c.adjoint();
  // Wave-plate pairs (U1, U2); the basis kets are (U1^dag x U2^dag)|canonical>.
  const std::array<std::pair<Mat, Mat>, 6> plates = {{
      {one, one}, {one, x}, {cd, c}, {cd, Mat(x * c)}, {c, cd}, {c, Mat(x * cd)}}};
  const auto settings = all_settings();
  const auto canon = canonical_kets();
  std::vector<WitnessBasis> out;
  for (const auto& [p1, p2] : plates) {
    WitnessBasis b;
    b.wp1 = p1.adjoint();
    b.wp2 = p2.adjoint();
    const Mat w = tensor(b.wp1, b.wp2);
    for (int k = 0; k < 4; ++k) {
      b.kets[k] = w * canon[k];
      b.projectors[k] = projector(b.kets[k]);
    }
    bool found = false;
    for (const auto& s : settings) {
      auto o = observables_for_setting(s);
      if (diagonal_in(o[0], b.kets) && diagonal_in(o[1], b.kets) && diagonal_in(o[2], b.kets)) {
        // a is fixed by the product kets: eigenvalue of U1 x U2 is +1 for a = 0.
        double ev = b.kets[0].dot(o[1] * b.kets[0]).real();
        if ((ev > 0) == (s.a == 0)) {
          b.setting = s;
          found = true;
          break;
        }
      }
    }
    if (!found) throw Error("wave-plate basis matches no witness setting");
    out.push_back(b);
  }
  return out;
}

Pom witness_pom(const WitnessBasis& b) { return make_pom(std::vector<Mat>(b.projectors.begin(), b.projectors.end())); }

IcCensus enumerate_ic_sets(const OpTriple& v, int threads, bool keep_rows) {
  const auto settings = all_settings();
  const int n = static_cast<int>(settings.size());
  std::vector<RMat> blocks(n);
  for (int i = 0; i < n; ++i) blocks[i] = observable_matrix({settings[i]}, v);

  std::vector<std::array<int, 6>> combos;
  std::array<int, 6> idx{};
  for (int i = 0; i < 6; ++i) idx[i] = i;
  while (true) {
    combos.push_back(idx);
    int k = 5;
    while (k >= 0 && idx[k] == n - 6 + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (int j = k + 1; j < 6; ++j) idx[j] = idx[j - 1] + 1;
  }

  std::vector<IcRow> rows(combos.size());
  auto work = [&](size_t lo, size_t hi) {
    RMat m(18, 15);
    for (size_t c = lo; c < hi; ++c) {
      for (int i = 0; i < 6; ++i) m.middleRows(3 * i, 3) = blocks[combos[c][i]];
      Eigen::JacobiSVD<RMat> svd(m);
      RVec sv = svd.singularValues();
      IcRow& r = rows[c];
      r.settings = combos[c];
      r.singular_values.assign(sv.data(), sv.data() + sv.size());
      r.rank = numeric_rank(m);
    }
  };
  threads = std::max(1, threads);
  if (threads == 1) {
    work(0, combos.size());
  } else {
    std::vector<std::thread> pool;
    size_t chunk = (combos.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      size_t lo = t * chunk, hi = std::min(combos.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  IcCensus out;
  out.candidates = static_cast<int>(combos.size());
  std::map<std::vector<long long>, std::pair<std::vector<double>, int>> classes;
  for (const auto& r : rows) {
    if (r.rank != 15) continue;
    ++out.ic_count;
    std::vector<double> sv = r.singular_values;
    std::sort(sv.begin(), sv.end());
    std::vector<long long> key;
    for (double s : sv) key.push_back(std::llround(s * 1e8));
    auto& entry = classes[key];
    entry.first = sv;
    ++entry.second;
  }
  out.classes = static_cast<int>(classes.size());
  for (const auto& [k, e] : classes) out.class_sizes.push_back(e);
  if (keep_rows) out.rows = std::move(rows);
  return out;
}

AdaptiveResult adaptive_witness_measure(const BasisProvider& provider, const std::vector<WitnessBasis>& bases,
                                        const AdaptiveOptions& opt) {
  const int nb = static_cast<int>(bases.size());
  if (nb == 0) throw Error("no witness bases supplied");
  AdaptiveResult res;
  std::vector<bool> used(nb, false);
  std::vector<std::vector<double>> counts(nb);
  int next = std::clamp(opt.first, 0, nb - 1);
  while (true) {
    counts[next] = provider(next);
    if (counts[next].size() != 4) throw DimensionMismatch("provider must return four counts");
    used[next] = true;
    res.order.push_back(next);
    ++res.bases_used;
    double tot = 0.0;
    for (double c : counts[next]) tot += c;
    std::array<double, 4> f{};
    for (int k = 0; k < 4; ++k) f[k] = tot > 0 ? counts[next][k] / tot : 0.0;
    auto cr = witness_criterion(f);
    res.margins.push_back(cr.margin);
    if (cr.violated) {
      res.detected = true;
      return res;
    }
    if (res.bases_used == nb) break;

    if (!opt.adaptive) {
      next = -1;
      for (int b = 0; b < nb && next < 0; ++b)
        if (!used[b]) next = b;
      continue;
    }
    // Merge the measured bases into one POM (each outcome weighted by 1/l).
    const double l = res.bases_used;
    std::vector<Mat> outs;
    std::vector<double> n;
    for (int b : res.order)
      for (int k = 0; k < 4; ++k) {
        outs.push_back(bases[b].projectors[k] / l);
        n.push_back(counts[b][k]);
      }
    Pom merged = make_pom(outs);
    EstimationConfig ec = opt.estimator;
    ec.start.reset();
    EstimationResult est = mlme_new(Frequencies::from_counts(n), merged, ec);
    res.final_estimator = est.estimator;
    double best = 0.0;
    next = -1;
    for (int b = 0; b < nb; ++b) {
      if (used[b]) continue;
      std::array<double, 4> p{};
      for (int k = 0; k < 4; ++k) p[k] = (est.estimator * bases[b].projectors[k]).trace().real();
      double m = witness_criterion(p).margin;
      if (next < 0 || m < best) {
        best = m;
        next = b;
      }
    }
  }

  std::vector<Mat> outs;
  std::vector<double> n;
  for (int b : res.order)
    for (int k = 0; k < 4; ++k) {
      outs.push_back(bases[b].projectors[k] / double(nb));
      n.push_back(counts[b][k]);
    }
  Pom all = make_pom(outs);
  Frequencies fr = Frequencies::from_counts(n);
  if (!res.final_estimator || opt.adaptive) {
    EstimationConfig ec = opt.estimator;
    ec.start.reset();
    res.final_estimator = mlme_new(fr, all, ec).estimator;
  }
  if (opt.separable_check) {
    auto sep = ml_separable(fr, all, opt.estimator);
    res.separable_certificate = sep.certificate;
    res.detected = sep.certificate;
  }
  return res;
}

SeparableResult ml_separable(const Frequencies& fr, const Pom& pom, const EstimationConfig& cfg, int terms,
                             double decision_gap) {
  if (pom.dim != 4) throw DimensionMismatch("separable ML is implemented for two qubits");
  if (terms < 1) throw Error("need at least one product term");
  if (fr.counts.size() != pom.size()) throw DimensionMismatch("count vector length differs from the POM size");
  const double N = fr.total();
  const auto f = fr.freqs();
  const Dims dims{2, 2};
  RngStream rng(cfg.seed, 0x736570);
  std::vector<Vec> a(terms), b(terms);
  std::vector<double> w(terms, 1.0 / terms);
  for (int k = 0; k < terms; ++k) {
    a[k] = haar_ket(2, rng);
    b[k] = haar_ket(2, rng);
  }
  auto assemble = [&](const std::vector<Vec>& aa, const std::vector<Vec>& bb, const std::vector<double>& ww) {
    Mat r = Mat::Zero(4, 4);
    for (int k = 0; k < terms; ++k) r += ww[k] * projector(tensor(aa[k], bb[k]));
    return r;
  };
  auto loglik = [&](const Mat& rho) {
    auto p = probabilities(pom, rho);
    double s = 0.0;
    for (size_t j = 0; j < p.size(); ++j)
      if (fr.counts[j] > 0) s += fr.counts[j] * std::log(std::max(p[j], 1e-300));
    return s;
  };
  auto r_of = [&](const Mat& rho) {
    auto p = probabilities(pom, rho);
    Mat r = Mat::Zero(4, 4);
    for (size_t j = 0; j < p.size(); ++j)
      if (fr.counts[j] > 0) r += (f[j] / std::max(p[j], 1e-14)) * pom.outcomes[j];
    return r;
  };
  // Reduced R for one party given the other party's ket.
  auto reduced = [&](const Mat& r, const Vec& other, bool first) {
    Mat pr = projector(other);
    return first ? Mat(partial_trace(r * tensor(identity(2), pr), 1, dims))
                 : Mat(partial_trace(r * tensor(pr, identity(2)), 2, dims));
  };

  SeparableResult res;
  Mat rho = assemble(a, b, w);
  double ll = loglik(rho);
  double eps = cfg.epsilon > 0 ? cfg.epsilon : 0.5;
  const double tol = std::max(cfg.precision, 1e-9);
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    Mat r = r_of(rho);
    double resid = 0.0;
    std::vector<double> wn(terms);
    for (int k = 0; k < terms; ++k) {
      Vec ab = tensor(a[k], b[k]);
      double rk = ab.dot(r * ab).real();
      wn[k] = w[k] * rk;
      if (w[k] > 1e-10) {
        resid = std::max(resid, std::abs(rk - 1.0) * w[k]);
        Mat ra = reduced(r, b[k], true), rb = reduced(r, a[k], false);
        resid = std::max(resid, w[k] * (ra * a[k] - rk * a[k]).norm());
        resid = std::max(resid, w[k] * (rb * b[k] - rk * b[k]).norm());
      }
    }
    if (resid <= tol) {
      res.converged = true;
      break;
    }
    double ws = 0.0;
    for (double x : wn) ws += x;
    for (double& x : wn) x /= ws;
    const bool first = (it % 2) == 0;
    bool accepted = false;
    for (int attempt = 0; attempt < 50; ++attempt) {
      std::vector<Vec> at = a, bt = b;
      for (int k = 0; k < terms; ++k) {
        Vec& ket = first ? at[k] : bt[k];
        Mat rr = reduced(r, first ? b[k] : a[k], first);
        Vec nk = ket + eps * (rr * ket - ket);
        ket = nk / nk.norm();
      }
      Mat t = assemble(at, bt, wn);
      double lt = loglik(t);
      if (lt >= ll) {
        a = at;
        b = bt;
        w = wn;
        rho = t;
        ll = lt;
        eps = std::min(eps * 1.5, 1e3);
        accepted = true;
        break;
      }
      eps *= 0.5;
    }
    if (!accepted) {
      // Weights alone (an EM step never lowers the likelihood).
      Mat t = assemble(a, b, wn);
      double lt = loglik(t);
      if (lt < ll) break;
      w = wn;
      rho = t;
      ll = lt;
    }
  }
  res.iterations = it;
  res.estimator = hermitize(rho);
  res.max_loglik_sep = ll;

  EstimationConfig mc = cfg;
  mc.start.reset();
  mc.line_search = LineSearch::quadratic10;
  mc.precision = std::min(cfg.precision, 1e-9);
  EstimationResult ml = ml_dg(fr, pom, mc);
  double llml = loglik(ml.estimator);
  // The separable optimum is itself a lower bound on the unconstrained one.
  res.max_loglik_ml = std::max(llml, ll);
  res.certificate = (res.max_loglik_sep - res.max_loglik_ml) / N < -decision_gap;
  return res;
}

}  // namespace tomo
