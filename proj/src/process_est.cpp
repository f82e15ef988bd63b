#include "tomo/process_est.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

#include "tomo/rng.hpp"

namespace tomo {

namespace {

const cplx I1(0.0, 1.0);

Mat tensor_id(const Mat& h, int dout) { return tensor(h, identity(dout)); }

Mat trace_out(const Mat& x, int din, int dout) { return partial_trace(x, 1, {din, dout}); }

// Exact trace-preserving normalization of (1 + dA) E (1 + dA)^dagger.
Mat tp_normalize(const Mat& e, int din, int dout) {
  Mat s = trace_out(e, din, dout);
  Mat sinv = hermitian_fn(hermitize(s), [](double v) { return 1.0 / std::sqrt(v); }, 1e-300);
  Mat k = tensor_id(sinv, dout);
  return hermitize(k * e * k);
}

// Linear map E -> (tr{E B_r})_r for a fixed list of operators B_r.
struct LinearProbe {
  Eigen::MatrixXcd rows;  // r x D^2, row r = vec(B_r^T)
  int dim = 0;

  void build(const std::vector<Mat>& bs, int d) {
    dim = d;
    rows.resize(bs.size(), d * d);
    for (size_t r = 0; r < bs.size(); ++r) {
      Mat bt = bs[r].transpose();
      rows.row(r) = Eigen::Map<const Vec>(bt.data(), d * d).transpose();
    }
  }
  std::vector<double> eval(const Mat& e) const {
    Vec v = rows * Eigen::Map<const Vec>(e.data(), dim * dim);
    std::vector<double> p(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) p[i] = v(i).real();
    return p;
  }
  // sum_r c_r B_r
  Mat combine(const std::vector<double>& c) const {
    Vec cv(c.size());
    for (size_t i = 0; i < c.size(); ++i) cv(i) = c[i];
    Vec v = rows.transpose() * cv;
    Mat m = Eigen::Map<const Mat>(v.data(), dim, dim);
    return m.transpose();
  }
};

struct QptModel {
  int din, dout, D, L, M;
  LinearProbe probe;
  std::vector<double> f;  // per-input normalized frequencies divided by L
  Mat w0_numerator;       // sum_l rho_l^T x G / L

  explicit QptModel(const QptData& data) : din(data.din), dout(data.dout), D(data.din * data.dout) {
    L = static_cast<int>(data.inputs.size());
    M = static_cast<int>(data.pom.size());
    if (L == 0) throw Error("no input states");
    if (static_cast<int>(data.counts.size()) != L) throw DimensionMismatch("counts must have one row per input");
    if (data.pom.dim != dout) throw DimensionMismatch("POM dimension differs from the output dimension");
    std::vector<Mat> bs;
    Mat g = data.pom.completeness();
    w0_numerator = Mat::Zero(D, D);
    for (int l = 0; l < L; ++l) {
      if (data.inputs[l].rows() != din) throw DimensionMismatch("input state dimension");
      if (static_cast<int>(data.counts[l].size()) != M) throw DimensionMismatch("count row length");
      Mat rt = data.inputs[l].transpose();
      double tot = std::accumulate(data.counts[l].begin(), data.counts[l].end(), 0.0);
      for (int m = 0; m < M; ++m) {
        bs.push_back(tensor(rt, data.pom.outcomes[m]) / double(L));
        f.push_back(tot > 0 ? data.counts[l][m] / tot / L : 0.0);
      }
      w0_numerator += tensor(rt, g) / double(L);
    }
    probe.build(bs, D);
  }

  double loglik(const std::vector<double>& p) const {
    double s = 0.0;
    for (size_t r = 0; r < p.size(); ++r)
      if (f[r] > 0) s += f[r] * std::log(std::max(p[r], 1e-300));
    return s;
  }

  Mat w_operator(const Mat& e, const std::vector<double>& p, double lambda, bool imperfect) const {
    std::vector<double> c(p.size(), 0.0);
    for (size_t r = 0; r < p.size(); ++r)
      if (f[r] > 0) c[r] = f[r] / std::max(p[r], 1e-14);
    Mat w = probe.combine(c);
    if (imperfect) w -= w0_numerator / std::accumulate(p.begin(), p.end(), 0.0);
    if (lambda > 0.0) {
      Mat lg = hermitian_fn(hermitize(e / double(din)), [](double v) { return std::log(v); }, 1e-12);
      w -= (lambda / din) * (Mat::Identity(D, D) + lg);
    }
    return hermitize(w);
  }

  double objective(const Mat& e, const std::vector<double>& p, double lambda, bool imperfect) const {
    double j = loglik(p);
    if (imperfect) j -= std::log(std::accumulate(p.begin(), p.end(), 0.0));
    if (lambda > 0.0) j += lambda * von_neumann_entropy(e / double(din));
    return j;
  }
};

double extremal_residual(const Mat& w, const Mat& e, int din, int dout) {
  Mat wew = hermitize(w * e * w);
  Mat lam = tensor_id(sqrtm_psd(trace_out(wew, din, dout)), dout);
  return trace_norm(lam * e * lam - wew);
}

int superket_rank(const std::vector<Mat>& ops) {
  if (ops.empty()) return 0;
  RMat m(ops.size(), ops[0].rows() * ops[0].rows());
  for (size_t i = 0; i < ops.size(); ++i) m.row(i) = superket(hermitize(ops[i])).transpose();
  return numeric_rank(m);
}

}  // namespace

Channel make_channel(std::vector<Mat> kraus) {
  if (kraus.empty()) throw Error("channel needs at least one Kraus operator");
  Channel ch;
  ch.din = static_cast<int>(kraus[0].cols());
  ch.dout = static_cast<int>(kraus[0].rows());
  Mat s = Mat::Zero(ch.din, ch.din);
  for (const auto& k : kraus) {
    if (k.cols() != ch.din || k.rows() != ch.dout) throw DimensionMismatch("Kraus operators differ in shape");
    s += k.adjoint() * k;
  }
  if ((s - Mat::Identity(ch.din, ch.din)).cwiseAbs().maxCoeff() > 1e-10)
    throw Error("Kraus operators are not trace preserving");
  ch.kraus = std::move(kraus);
  return ch;
}

Channel identity_channel(int d) { return make_channel({identity(d)}); }

Channel depolarizing_channel(int d) {
  if (d != 2) throw Error("depolarizing channel implemented for one qubit");
  return make_channel({identity(2) / 2.0, pauli_x() / 2.0, pauli_y() / 2.0, pauli_z() / 2.0});
}

Mat unitary_cnot() {
  Mat p0 = Mat::Zero(2, 2), p1 = Mat::Zero(2, 2);
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  return tensor(p0, identity(2)) + tensor(p1, pauli_x());
}

Channel cnot_channel() { return make_channel({unitary_cnot()}); }

Channel cnot_imperfect(double eps) {
  if (eps < 0.0 || eps > 1.0) throw ConfigError("epsilon must lie in [0, 1]");
  return make_channel({std::sqrt(1.0 - eps) * unitary_cnot(), std::sqrt(eps) * identity(4)});
}

Channel cnot_random(double eps, std::uint64_t seed) {
  if (eps < 0.0 || eps > 1.0) throw ConfigError("epsilon must lie in [0, 1]");
  RngStream rng(seed, 0x636e6f74);
  const int nb = 15;
  Mat g = ginibre(4 * nb, 4, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(4 * nb, 4);
  std::vector<Mat> k{std::sqrt(1.0 - eps) * unitary_cnot()};
  for (int j = 0; j < nb; ++j) k.push_back(std::sqrt(eps) * Mat(q.middleRows(4 * j, 4)));
  return make_channel(std::move(k));
}

Channel toffoli_channel() {
  Mat u = Mat::Identity(8, 8);
  u(6, 6) = u(7, 7) = 0.0;
  u(6, 7) = u(7, 6) = 1.0;
  return make_channel({u});
}

Channel channel_from_id(const std::string& id) {
  std::smatch m;
  if (id == "cnot") return cnot_channel();
  if (id == "toffoli") return toffoli_channel();
  if (std::regex_match(id, m, std::regex(R"(cnot_imperfect\(\s*([0-9.eE+-]+)\s*\))")))
    return cnot_imperfect(std::stod(m[1]));
  if (std::regex_match(id, m, std::regex(R"(cnot_random\(\s*([0-9.eE+-]+)\s*,\s*([0-9]+)\s*\))")))
    return cnot_random(std::stod(m[1]), std::stoull(m[2]));
  if (std::regex_match(id, m, std::regex(R"(identity:([0-9]+))"))) return identity_channel(std::stoi(m[1]));
  if (id == "depolarizing") return depolarizing_channel(2);
  throw ConfigError("unknown channel id: " + id);
}

Mat choi_from_kraus(const Channel& ch) {
  const int D = ch.din * ch.dout;
  Mat e = Mat::Zero(D, D);
  for (const auto& k : ch.kraus) {
    // (1 x K)|Psi+> sqrt(D_i) = sum_j |j> x K|j>
    Vec psi = Vec::Zero(D);
    for (int j = 0; j < ch.din; ++j) psi.segment(j * ch.dout, ch.dout) = k.col(j);
    e += psi * psi.adjoint();
  }
  return e;
}

Mat apply_channel(const Mat& E, const Mat& rho, int din, int dout) {
  if (E.rows() != din * dout || rho.rows() != din) throw DimensionMismatch("channel and state dimensions differ");
  Mat x = E * tensor_id(rho.transpose(), dout);
  return hermitize(partial_trace(x, 2, {din, dout}));
}

Mat apply_kraus(const Channel& ch, const Mat& rho) {
  if (rho.rows() != ch.din) throw DimensionMismatch("state dimension differs from the channel input");
  Mat out = Mat::Zero(ch.dout, ch.dout);
  for (const auto& k : ch.kraus) out += k * rho * k.adjoint();
  return hermitize(out);
}

double channel_entropy(const Mat& E, int din) { return von_neumann_entropy(E / double(din)); }

double tp_defect(const Mat& E, int din, int dout) {
  Mat d = trace_out(E, din, dout) - Mat::Identity(din, din);
  Eigen::JacobiSVD<Mat> svd(d);
  return svd.singularValues()(0);
}

Mat random_tp_choi(int din, int dout, std::uint64_t seed, std::uint64_t stream) {
  RngStream rng(seed, 0x63686f69ULL + stream);
  Mat g = ginibre(din * dout, din * dout, rng);
  return tp_normalize(g * g.adjoint(), din, dout);
}

double choi_distance(const Mat& a, const Mat& b, int din) { return trace_class_distance(a / double(din), b / double(din)); }

std::vector<Mat> sic_inputs(int n_qubits) {
  const auto bl = tetrahedron_bloch();
  std::vector<Mat> single;
  for (const auto& b : bl)
    single.push_back(hermitize((identity(2) + b[0] * pauli_x() + b[1] * pauli_y() + b[2] * pauli_z()) / 2.0));
  std::vector<Mat> out;
  if (n_qubits == 1) return single;
  if (n_qubits == 2) {
    // Latin-square order: any four consecutive states use every single-qubit
    // state once on each side.
    for (int k = 0; k < 16; ++k) out.push_back(tensor(single[k % 4], single[(k % 4 + k / 4) % 4]));
    return out;
  }
  int total = 1;
  for (int i = 0; i < n_qubits; ++i) total *= 4;
  for (int k = 0; k < total; ++k) {
    std::vector<Mat> f;
    int r = k;
    for (int i = 0; i < n_qubits; ++i) {
      f.push_back(single[r % 4]);
      r /= 4;
    }
    out.push_back(tensor_all(f));
  }
  return out;
}

std::vector<Mat> pauli_inputs(int n_qubits) {
  const double s = 1.0 / std::sqrt(2.0);
  std::vector<Vec> kets(4, Vec::Zero(2));
  kets[0](0) = 1.0;
  kets[1](1) = 1.0;
  kets[2] << s, s;
  kets[3] << s, s * I1;
  int total = 1;
  for (int i = 0; i < n_qubits; ++i) total *= 4;
  std::vector<Mat> out;
  for (int k = 0; k < total; ++k) {
    std::vector<Mat> f(n_qubits);
    int r = k;
    for (int i = n_qubits - 1; i >= 0; --i) {
      f[i] = projector(kets[r % 4]);
      r /= 4;
    }
    out.push_back(tensor_all(f));
  }
  return out;
}

std::vector<double> qpt_probabilities(const Mat& E, const QptData& data) {
  QptModel model(data);
  return model.probe.eval(E);
}

QptData qpt_exact_data(const Mat& E, const std::vector<Mat>& inputs, const Pom& pom, double N, int din, int dout) {
  QptData d{din, dout, inputs, pom, {}};
  for (const auto& rho : inputs) {
    auto p = probabilities(pom, apply_channel(E, rho, din, dout));
    std::vector<double> c;
    for (double v : p) c.push_back(std::max(v, 0.0) * N);
    d.counts.push_back(c);
  }
  return d;
}

bool qpt_informationally_complete(const QptData& data) {
  const int ri = superket_rank(data.inputs);
  const int rp = superket_rank(data.pom.outcomes);
  return ri == data.din * data.din && rp == data.dout * data.dout;
}

double qpt_residual(const Mat& E, const QptData& data, double lambda) {
  QptModel model(data);
  auto p = model.probe.eval(E);
  bool imperfect = !data.pom.complete;
  return extremal_residual(model.w_operator(E, p, lambda, imperfect), E, data.din, data.dout);
}

QptResult mlme_qpt(const QptData& data, const QptConfig& cfg) {
  QptModel model(data);
  const int din = model.din, dout = model.dout, D = model.D;
  const bool imperfect = cfg.imperfect || !data.pom.complete;
  const double lambda = (cfg.zero_lambda_if_ic && qpt_informationally_complete(data)) ? 0.0 : cfg.lambda;
  QptResult res;
  Mat e = cfg.start ? tp_normalize(hermitize(*cfg.start), din, dout) : Mat(Mat::Identity(D, D) / double(dout));
  auto p = model.probe.eval(e);
  double obj = model.objective(e, p, lambda, imperfect);
  res.objective_trace.push_back(obj);
  res.max_tp_defect = tp_defect(e, din, dout);
  double eps = cfg.epsilon > 0 ? cfg.epsilon : 0.5;
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    Mat w = model.w_operator(e, p, lambda, imperfect);
    res.residual = extremal_residual(w, e, din, dout);
    if (res.residual <= cfg.precision) {
      res.converged = true;
      break;
    }
    Mat g = w - tensor_id(0.5 * trace_out(Mat(w * e + e * w), din, dout), dout);
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Mat m = Mat::Identity(D, D) + 0.5 * eps * g;
      Mat et = tp_normalize(m * e * m.adjoint(), din, dout);
      auto pt = model.probe.eval(et);
      double ot = model.objective(et, pt, lambda, imperfect);
      if (ot >= obj) {
        e = et;
        p = pt;
        obj = ot;
        eps = std::min(eps * 1.5, 1e4);
        accepted = true;
        break;
      }
      eps *= 0.5;
    }
    if (!accepted) break;
    res.objective_trace.push_back(obj);
    res.max_tp_defect = std::max(res.max_tp_defect, tp_defect(e, din, dout));
  }
  res.iterations = it;
  res.E = e;
  res.loglik = model.loglik(p);
  return res;
}

QptResult mlme_qpt_imperfect(const QptData& data, const std::vector<double>& eta, const QptConfig& cfg) {
  if (eta.size() != data.pom.size()) throw DimensionMismatch("one efficiency per outcome required");
  std::vector<Mat> outs;
  for (size_t m = 0; m < eta.size(); ++m) {
    if (eta[m] < 0.0 || eta[m] > 1.0) throw Error("efficiencies must lie in [0, 1]");
    outs.push_back(eta[m] * data.pom.outcomes[m]);
  }
  QptData d = data;
  d.pom = make_pom(outs);
  return mlme_qpt(d, cfg);
}

// ---------------------------------------------------------------- MPL

namespace {

struct MplModel {
  int din, dout, D, L, M;
  LinearProbe prev;        // rho_l^T x Pi_m / (L+1)
  std::vector<double> nu;  // per-input normalized frequencies
  std::vector<Mat> prior_k, e_k;  // tr_K{E_prior (1 x Pi_m)}
  const Pom& pom;
  Mat prior;

  MplModel(const QptData& data, const Mat& E_prior) : pom(data.pom), prior(E_prior) {
    din = data.din;
    dout = data.dout;
    D = din * dout;
    L = static_cast<int>(data.inputs.size());
    M = static_cast<int>(pom.size());
    std::vector<Mat> bs;
    for (int l = 0; l < L; ++l) {
      double tot = std::accumulate(data.counts[l].begin(), data.counts[l].end(), 0.0);
      for (int m = 0; m < M; ++m) {
        bs.push_back(tensor(Mat(data.inputs[l].transpose()), pom.outcomes[m]) / double(L + 1));
        nu.push_back(tot > 0 ? data.counts[l][m] / tot : 0.0);
      }
    }
    prev.build(bs, D);
    for (int m = 0; m < M; ++m) prior_k.push_back(trace_out(Mat(prior * tensor(identity(din), pom.outcomes[m])), din, dout));
  }

  struct Eval {
    std::vector<double> pl, pm, num;
    std::vector<Mat> trho;
    double value = 0.0;
  };

  Eval eval(const Mat& e, const Mat& rho) const {
    Eval ev;
    ev.pl = prev.eval(e);
    const double l1 = L + 1.0;
    for (size_t r = 0; r < ev.pl.size(); ++r)
      if (nu[r] > 0) ev.value += nu[r] / l1 * std::log(std::max(ev.pl[r], 1e-300));
    Mat rt = rho.transpose();
    for (int m = 0; m < M; ++m) {
      Mat t = tensor(rt, pom.outcomes[m]);
      double nm = (prior * t).trace().real();
      double pm = (e * t).trace().real() / l1;
      ev.trho.push_back(t / l1);
      ev.num.push_back(nm);
      ev.pm.push_back(pm);
      if (nm > 0) ev.value += nm / l1 * std::log(std::max(pm, 1e-300));
    }
    return ev;
  }

  Mat x_op(const Eval& ev) const {
    const double l1 = L + 1.0;
    std::vector<double> c(ev.pl.size(), 0.0);
    for (size_t r = 0; r < c.size(); ++r)
      if (nu[r] > 0) c[r] = nu[r] / std::max(ev.pl[r], 1e-14) / l1;
    Mat x = prev.combine(c);
    for (int m = 0; m < M; ++m)
      if (ev.num[m] > 0) x += ev.num[m] / std::max(ev.pm[m], 1e-14) / l1 * ev.trho[m];
    return hermitize(x);
  }

  Mat y_op(const Mat& e, const Eval& ev) const {
    const double l1 = L + 1.0;
    Mat y = Mat::Zero(din, din);
    for (int m = 0; m < M; ++m) {
      Mat ek = trace_out(Mat(e * tensor(identity(din), pom.outcomes[m])), din, dout);
      y += (std::log(std::max(ev.pm[m], 1e-300)) * prior_k[m] + ev.num[m] / (l1 * std::max(ev.pm[m], 1e-14)) * ek) / l1;
    }
    return hermitize(Mat(y.transpose()));
  }
};

}  // namespace

double MplResult::repeat_fraction() const { return converged_starts > 0 ? double(repeats) / converged_starts : 0.0; }

double projected_loglik(const QptData& data, const Mat& E_prior, const Mat& E, const Mat& rho) {
  MplModel model(data, E_prior);
  return model.eval(E, rho).value;
}

MplResult mpl_optimize(const QptData& data, const Mat& E_prior, const MplConfig& cfg) {
  if (data.inputs.empty()) throw Error("MPL needs at least one previous input");
  MplModel model(data, E_prior);
  const int din = model.din, dout = model.dout, D = model.D;
  MplResult out;
  std::vector<MplSolution> all;
  for (int s = 0; s < cfg.starts; ++s) {
    RngStream rng(cfg.seed, 0x6d706c00ULL + s);
    Mat rho = hs_random_state(din, rng);
    Mat e = random_tp_choi(din, dout, cfg.seed, 0x6d706c00ULL + s);
    auto ev = model.eval(e, rho);
    MplSolution sol;
    sol.trace.push_back(ev.value);
    double e1 = cfg.eps1, e2 = cfg.eps2;
    for (int it = 0; it < cfg.max_iter; ++it) {
      Mat x = model.x_op(ev);
      Mat y = model.y_op(e, ev);
      double ty = (y * rho).trace().real();
      sol.residual_e = extremal_residual(x, e, din, dout);
      sol.residual_rho = trace_norm(rho * y - ty * rho);
      if (sol.residual_e <= cfg.precision && sol.residual_rho <= cfg.precision) {
        sol.converged = true;
        break;
      }
      Mat g = x - tensor_id(0.5 * trace_out(Mat(x * e + e * x), din, dout), dout);
      Mat xi = y - ty * Mat::Identity(din, din);
      bool accepted = false;
      for (int attempt = 0; attempt < 60; ++attempt) {
        Mat m = Mat::Identity(D, D) + 0.5 * e1 * g;
        Mat et = tp_normalize(m * e * m.adjoint(), din, dout);
        Mat k = Mat::Identity(din, din) + e2 * xi;
        Mat rt = k * rho * k.adjoint();
        rt = hermitize(rt / rt.trace().real());
        auto evt = model.eval(et, rt);
        if (evt.value >= ev.value) {
          e = et;
          rho = rt;
          ev = evt;
          e1 = std::min(e1 * 1.2, 20.0 * cfg.eps1);
          e2 = std::min(e2 * 1.2, 20.0 * cfg.eps2);
          accepted = true;
          break;
        }
        e1 *= 0.5;
        e2 *= 0.5;
      }
      if (!accepted) break;
      sol.trace.push_back(ev.value);
    }
    sol.rho = rho;
    sol.E = e;
    sol.functional = ev.value;
    all.push_back(std::move(sol));
  }

  auto is_previous_input = [&](const Mat& rho) {
    for (const auto& r : data.inputs)
      if (trace_class_distance(r, rho) < cfg.dedup_tol) return true;
    return false;
  };
  auto add_unique = [&](const MplSolution& s) {
    for (const auto& u : out.solutions)
      if (trace_class_distance(u.rho, s.rho) < cfg.dedup_tol && choi_distance(u.E, s.E, din) < cfg.dedup_tol)
        return false;
    out.solutions.push_back(s);
    return true;
  };
  for (const auto& s : all) {
    if (!s.converged) continue;
    ++out.converged_starts;
    if (is_previous_input(s.rho)) continue;
    if (!add_unique(s)) ++out.repeats;
  }
  if (out.solutions.empty()) {
    // Nothing converged to a new input: fall back to the best start.
    out.warning = true;
    auto best = std::max_element(all.begin(), all.end(),
                                 [](const MplSolution& a, const MplSolution& b) { return a.functional < b.functional; });
    out.solutions.push_back(*best);
  }
  return out;
}

// ---------------------------------------------------------------- strategies

QptStrategy parse_strategy(const std::string& s) {
  if (s == "none") return QptStrategy::none;
  if (s == "adaptive" || s == "fixed") return QptStrategy::adaptive;
  if (s == "mpl") return QptStrategy::mpl;
  if (s == "hybrid") return QptStrategy::hybrid;
  throw ConfigError("unknown strategy: " + s);
}

std::vector<RoundRecord> run_strategy(QptStrategy kind, const InputProvider& provider, const std::vector<Mat>& pool,
                                      const Pom& pom, const Mat& E_prior, int din, int dout,
                                      const StrategyConfig& cfg) {
  if (pool.empty()) throw Error("input pool is empty");
  const int D = din * dout;
  const int rounds = cfg.rounds > 0 ? cfg.rounds : static_cast<int>(pool.size());
  std::vector<bool> used(pool.size(), false);
  QptData data{din, dout, {}, pom, {}};
  std::vector<RoundRecord> trace;
  bool mpl_mode = kind == QptStrategy::mpl || (kind == QptStrategy::hybrid && cfg.hybrid_threshold > 0.0);
  int idx = std::clamp(cfg.first, 0, static_cast<int>(pool.size()) - 1);
  Mat input = pool[idx];
  double last_repeat = 0.0;
  bool last_mpl = false;
  std::optional<Mat> prev;

  auto warm = [&](const Mat& e) { return Mat(0.9 * e + 0.1 * Mat::Identity(D, D) / double(dout)); };
  auto better = [&](double cand, double best, bool first) {
    if (first) return true;
    return cfg.selection == SelectionMode::max_distance_to_previous ? cand > best : cand < best;
  };

  for (int r = 1; r <= rounds; ++r) {
    auto counts = provider(input);
    if (counts.size() != pom.size()) throw DimensionMismatch("provider returned the wrong number of counts");
    data.inputs.push_back(input);
    data.counts.push_back(counts);
    if (idx >= 0) used[idx] = true;

    QptConfig mc = cfg.mlme;
    if (prev) mc.start = warm(*prev);
    QptResult est = mlme_qpt(data, mc);
    RoundRecord rec;
    rec.L = r;
    rec.input = input;
    rec.pool_index = idx;
    rec.estimator = est.E;
    rec.loglik = est.loglik;
    rec.from_mpl = last_mpl;
    rec.repeat_fraction = last_repeat;
    rec.step_distance = prev ? choi_distance(est.E, *prev, din) : 0.0;
    trace.push_back(rec);
    if (cfg.stop_threshold > 0.0 && prev && rec.step_distance < cfg.stop_threshold) break;
    prev = est.E;
    if (r == rounds) break;

    if (mpl_mode) {
      MplConfig mcfg = cfg.mpl;
      mcfg.seed = cfg.mpl.seed * 1000003ULL + r;
      MplResult mr = mpl_optimize(data, E_prior, mcfg);
      last_repeat = mr.repeat_fraction();
      if (kind == QptStrategy::hybrid && last_repeat > cfg.hybrid_threshold) {
        mpl_mode = false;
      } else {
        bool first = true;
        double best = 0.0;
        for (const auto& s : mr.solutions) {
          double score = cfg.selection == SelectionMode::max_distance_to_previous ? choi_distance(s.E, est.E, din)
                                                                                  : choi_distance(s.E, E_prior, din);
          if (better(score, best, first)) {
            best = score;
            input = s.rho;
            first = false;
          }
        }
        idx = -1;
        last_mpl = true;
        continue;
      }
    }
    last_mpl = false;

    std::vector<int> remaining;
    for (size_t k = 0; k < pool.size(); ++k)
      if (!used[k]) remaining.push_back(static_cast<int>(k));
    if (remaining.empty()) break;
    if (kind == QptStrategy::none) {
      idx = remaining.front();
      input = pool[idx];
      continue;
    }
    // Project each remaining candidate through the prior and rank it.
    double n_last = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (n_last <= 0) n_last = 1.0;
    bool first = true;
    double best = 0.0;
    int pick = remaining.front();
    for (int k : remaining) {
      QptData proj = data;
      auto pk = probabilities(pom, apply_channel(E_prior, pool[k], din, dout));
      std::vector<double> ck;
      for (double v : pk) ck.push_back(std::max(v, 0.0) * n_last);
      proj.inputs.push_back(pool[k]);
      proj.counts.push_back(ck);
      QptConfig pc = cfg.projected;
      pc.start = warm(est.E);
      QptResult pe = mlme_qpt(proj, pc);
      double score = cfg.selection == SelectionMode::max_distance_to_previous ? choi_distance(pe.E, est.E, din)
                                                                              : choi_distance(pe.E, E_prior, din);
      if (better(score, best, first)) {
        best = score;
        pick = k;
        first = false;
      }
    }
    idx = pick;
    input = pool[idx];
  }
  return trace;
}

PlateauResult plateau_spread(const QptData& data, int n_samples, const QptConfig& cfg, std::uint64_t seed) {
  if (n_samples < 2) throw Error("plateau spread needs at least two samples");
  const int din = data.din, D = data.din * data.dout;
  PlateauResult out;
  out.centroid = Mat::Zero(D, D);
  for (int j = 0; j < n_samples; ++j) {
    QptConfig c = cfg;
    c.lambda = 0.0;
    c.start = random_tp_choi(din, data.dout, seed, 0x706c6174ULL + j);
    QptResult r = mlme_qpt(data, c);
    out.samples.push_back(r.E);
    out.centroid += r.E / double(n_samples);
  }
  double s = 0.0;
  for (const auto& e : out.samples) {
    Mat d = e - out.centroid;
    s += (d * d).trace().real();
  }
  out.delta = std::sqrt(s / (2.0 * n_samples)) / din;
  return out;
}

}  // namespace tomo
