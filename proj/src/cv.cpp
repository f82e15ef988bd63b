#include "tomo/cv.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace tomo {

namespace {

using ld = long double;
using lcplx = std::complex<ld>;

// L[k][j] = L_j^{(k)}(y) for j + k < d.
std::vector<std::vector<ld>> laguerre_table(int d, ld y) {
  std::vector<std::vector<ld>> t(d);
  for (int k = 0; k < d; ++k) {
    int jmax = d - 1 - k;
    auto& row = t[k];
    row.resize(jmax + 1);
    row[0] = 1.0L;
    if (jmax >= 1) row[1] = 1.0L + k - y;
    for (int j = 1; j < jmax; ++j) row[j + 1] = ((2.0L * j + 1 + k - y) * row[j] - (j + k) * row[j - 1]) / (j + 1);
  }
  return t;
}

std::vector<ld> log_factorials(int d) {
  std::vector<ld> lf(d + 1, 0.0L);
  for (int n = 1; n <= d; ++n) lf[n] = lf[n - 1] + std::log(static_cast<ld>(n));
  return lf;
}

void check_state_like(const Mat& rho) {
  if (rho.rows() != rho.cols() || rho.rows() < 1) throw DimensionMismatch("density matrix must be square");
}

}  // namespace

std::vector<double> hermite_functions(int nmax, double x) {
  if (nmax < 0) throw Error("Hermite index must be nonnegative");
  std::vector<double> psi(nmax + 1);
  psi[0] = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
  if (nmax >= 1) psi[1] = std::sqrt(2.0) * x * psi[0];
  for (int n = 2; n <= nmax; ++n)
    psi[n] = std::sqrt(2.0 / n) * x * psi[n - 1] - std::sqrt((n - 1.0) / n) * psi[n - 2];
  return psi;
}

cplx quadrature_wavefunction(int n, double x, double theta) {
  if (n < 0) throw Error("Fock index must be nonnegative");
  return std::exp(cplx(0.0, -n * theta)) * hermite_functions(n, x)[n];
}

std::vector<QuadratureSetting> default_homodyne_settings() {
  std::vector<QuadratureSetting> s;
  for (int k = 0; k < 4; ++k) s.push_back({k * M_PI / 4.0, {-2.2, -1.1, 0.3, 1.2, 2.0}, 1.0});
  return s;
}

Pom homodyne_pom(int dsub, const std::vector<QuadratureSetting>& settings) {
  if (dsub < 2) throw Error("D_sub must be at least 2");
  std::vector<Mat> outs;
  for (const auto& st : settings)
    for (double x : st.xs) {
      auto h = hermite_functions(dsub - 1, x);
      Vec u(dsub);
      for (int n = 0; n < dsub; ++n) u(n) = std::exp(cplx(0.0, -n * st.theta)) * h[n];  // <n|x_theta>
      outs.push_back(st.weight * u * u.adjoint());
    }
  if (outs.empty()) throw Error("no quadrature samples");
  Mat g = Mat::Zero(dsub, dsub);
  for (const auto& o : outs) g += o;
  double top = eigenvalues_h(g).maxCoeff();
  for (auto& o : outs) o /= top;
  return make_pom(outs);
}

Mat parity_operator(int d) {
  Mat p = Mat::Zero(d, d);
  for (int n = 0; n < d; ++n) p(n, n) = (n % 2) ? -1.0 : 1.0;
  return p;
}

double wigner_fock(const Mat& rho, double x, double p) {
  check_state_like(rho);
  const int d = static_cast<int>(rho.rows());
  const ld a2 = static_cast<ld>(x) * x + static_cast<ld>(p) * p;
  const auto lag = laguerre_table(d, 2.0L * a2);
  const auto lf = log_factorials(d);
  const lcplx z(x, p);
  ld sum = 0.0L;
  for (int m = 0; m < d; ++m) {
    sum += (m % 2 ? -1.0L : 1.0L) * static_cast<ld>(rho(m, m).real()) * lag[0][m];
    lcplx zk = 1.0L;
    for (int n = m + 1; n < d; ++n) {
      zk *= z;
      int k = n - m;
      ld c = std::exp(0.5L * (k * std::log(2.0L) + lf[m] - lf[n]));
      lcplx rmn(rho(m, n).real(), rho(m, n).imag());
      sum += 2.0L * (m % 2 ? -1.0L : 1.0L) * c * std::real(rmn * zk) * lag[k][m];
    }
  }
  return static_cast<double>(2.0L * std::exp(-a2) * sum);
}

namespace {

// Evaluates R(x, p; tau) for a fixed state and tau with reusable buffers.
class REvaluator {
 public:
  REvaluator(const Mat& rho, double tau) : d_(static_cast<int>(rho.rows())), t_(tau) {
    check_state_like(rho);
    if (!(tau > 0.0 && tau < 1.0)) throw Error("tau must lie strictly between 0 and 1");
    const ld q = (1.0L - t_) / t_;
    const auto lf = log_factorials(d_);
    std::vector<ld> qn(d_, 1.0L);
    for (int n = 1; n < d_; ++n) qn[n] = qn[n - 1] * q;
    diag_.resize(d_);
    off_.assign(d_ * d_, lcplx(0.0L));
    for (int m = 0; m < d_; ++m) {
      const ld sg = m % 2 ? -1.0L : 1.0L;
      diag_[m] = sg * static_cast<ld>(rho(m, m).real()) * qn[m];
      for (int n = m + 1; n < d_; ++n)
        off_[m * d_ + n] = 2.0L * sg * std::exp(0.5L * (lf[m] - lf[n])) * qn[n] *
                           lcplx(rho(m, n).real(), rho(m, n).imag());
    }
    lag_.resize(d_ * d_);
    zk_.resize(d_);
  }

  ld at(double x, double p) {
    const ld a2 = static_cast<ld>(x) * x + static_cast<ld>(p) * p;
    const ld y = a2 / (2.0L * t_ * (1.0L - t_));
    // lag_[k * d + j] = L_j^{(k)}(y)
    for (int k = 0; k < d_; ++k) {
      ld* row = &lag_[k * d_];
      int jmax = d_ - 1 - k;
      row[0] = 1.0L;
      if (jmax >= 1) row[1] = 1.0L + k - y;
      for (int j = 1; j < jmax; ++j) row[j + 1] = ((2.0L * j + 1 + k - y) * row[j] - (j + k) * row[j - 1]) / (j + 1);
    }
    const lcplx z = lcplx(x, p) / (std::sqrt(2.0L) * (1.0L - t_));
    zk_[0] = 1.0L;
    for (int k = 1; k < d_; ++k) zk_[k] = zk_[k - 1] * z;
    ld sum = 0.0L;
    for (int m = 0; m < d_; ++m) {
      sum += diag_[m] * lag_[m];
      for (int n = m + 1; n < d_; ++n) {
        const lcplx& c = off_[m * d_ + n];
        const lcplx& w = zk_[n - m];
        sum += (c.real() * w.real() - c.imag() * w.imag()) * lag_[(n - m) * d_ + m];
      }
    }
    return std::exp(-a2 / (2.0L * t_)) / t_ * sum;
  }

 private:
  int d_;
  ld t_;
  std::vector<ld> diag_, lag_;
  std::vector<lcplx> off_, zk_;
};

}  // namespace

double nonclassicality_r(const Mat& rho, double x, double p, double tau) {
  REvaluator ev(rho, tau);
  return static_cast<double>(ev.at(x, p));
}

double laser_r_ss(double mu, int dsub, double x, double p, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error("tau must lie strictly between 0 and 1");
  const ld t = tau;
  const ld a2 = static_cast<ld>(x) * x + static_cast<ld>(p) * p;
  const ld y = a2 / (2.0L * t * (1.0L - t));
  const auto lag = laguerre_table(dsub, y);
  ld norm = 0.0L, sum = 0.0L, w = 1.0L, qn = 1.0L;
  for (int n = 0; n < dsub; ++n) {
    if (n > 0) {
      w *= static_cast<ld>(mu) / n;
      qn *= (1.0L - t) / t;
    }
    norm += w;
    sum += (n % 2 ? -1.0L : 1.0L) * w * qn * lag[0][n];
  }
  return static_cast<double>(std::exp(-a2 / (2.0L * t)) / (t * norm) * sum);
}

double min_r_on_grid(const Mat& rho, double tau, const DepthGrid& g) {
  REvaluator ev(rho, tau);
  double mn = std::numeric_limits<double>::infinity();
  const double step = g.points > 1 ? 2.0 * g.radius / (g.points - 1) : 0.0;
  for (int i = 0; i < g.points; ++i)
    for (int j = 0; j < g.points; ++j) {
      double x = -g.radius + i * step, p = -g.radius + j * step;
      mn = std::min(mn, static_cast<double>(ev.at(x, p)));
    }
  return mn;
}

DepthResult nonclassicality_depth(const Mat& rho, const DepthGrid& g) {
  const int n = g.tau_points;
  const double h = 1.0 / (n + 1);
  auto ok = [&](double tau) { return min_r_on_grid(rho, tau, g) >= -g.tol; };
  DepthResult r;
  r.half_width = h / 2.0;
  // Scan downward: the depth is the smallest grid tau above which all pass.
  int k = n;
  while (k >= 1 && ok(k * h)) --k;
  if (k == n) {
    r.tau = 1.0;
    return r;
  }
  if (k == 0) {
    r.tau = 0.0;
    return r;
  }
  double lo = k * h, hi = (k + 1) * h;
  for (int it = 0; it < 30; ++it) {
    double mid = 0.5 * (lo + hi);
    if (ok(mid))
      hi = mid;
    else
      lo = mid;
  }
  r.tau = hi;
  r.half_width = hi - lo;
  return r;
}

namespace {

Mat padded_displacement(int dim, cplx alpha) {
  Mat a = Mat::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
  Mat k = alpha * a.adjoint() - std::conj(alpha) * a;
  Mat h = hermitize(cplx(0.0, 1.0) * k);
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  if (es.info() != Eigen::Success) throw EigensolverFailure("eigensolver failed for the displacement operator");
  Vec ph(dim);
  for (int i = 0; i < dim; ++i) ph(i) = std::exp(cplx(0.0, -es.eigenvalues()(i)));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

Displacement displacement(int dsub, cplx alpha) {
  if (dsub < 1) throw Error("D_sub must be positive");
  Displacement d;
  d.op = padded_displacement(dsub, alpha);
  // Coherent-state weight above the cutoff.
  const double n2 = std::norm(alpha);
  double w = std::exp(-n2), kept = 0.0;
  for (int n = 0; n < dsub; ++n) {
    kept += w;
    w *= n2 / (n + 1);
  }
  d.defect = std::max(0.0, 1.0 - kept);
  d.warning = d.defect > 1e-6;
  return d;
}

std::vector<double> tmd_port_efficiencies(const std::vector<double>& T, const std::vector<double>& eta) {
  const size_t ports = eta.size();
  if (ports < 1 || T.size() != ports) throw DimensionMismatch("need one transmission and one efficiency per port");
  std::vector<double> out(ports);
  double prod = 1.0;
  for (size_t k = 0; k < ports; ++k) {
    double f = 1.0 - T[k] + (k + 1 == ports ? T[ports - 1] : 0.0);
    out[k] = eta[k] * f * prod;
    prod *= T[k];
  }
  return out;
}

double tmd_click_probability(const std::vector<double>& eff, unsigned pattern, int n) {
  const int ports = static_cast<int>(eff.size());
  double lost = 1.0;
  for (double e : eff) lost -= e;
  lost = std::max(lost, 0.0);
  // Inclusion-exclusion over subsets of the clicked ports.
  double s = 0.0;
  for (unsigned sub = pattern;; sub = (sub - 1) & pattern) {
    double q = lost;
    int bits = 0;
    for (int k = 0; k < ports; ++k)
      if (sub & (1u << k)) q += eff[k];
    for (int k = 0; k < ports; ++k)
      if ((pattern & ~sub) & (1u << k)) ++bits;
    s += (bits % 2 ? -1.0 : 1.0) * std::pow(q, n);
    if (sub == 0) break;
  }
  return s;
}

Pom tmd_pom(int dsub, const std::vector<double>& eff, const std::vector<cplx>& displacements, int padding) {
  const int ports = static_cast<int>(eff.size());
  if (ports < 1 || ports > 4) throw Error("TMD model supports 1 to 4 ports");
  double tot = 0.0;
  for (double e : eff) {
    if (e < 0.0) throw Error("port efficiencies must be nonnegative");
    tot += e;
  }
  if (tot > 1.0 + 1e-12) throw Error("port efficiencies sum above one");
  const unsigned patterns = 1u << ports;
  const int big = displacements.empty() ? dsub : dsub + std::max(padding, 0);
  std::vector<RVec> diag(patterns, RVec::Zero(big));
  for (unsigned s = 0; s < patterns; ++s)
    for (int n = 0; n < big; ++n) diag[s](n) = tmd_click_probability(eff, s, n);
  std::vector<Mat> outs;
  if (displacements.empty()) {
    for (unsigned s = 0; s < patterns; ++s) outs.push_back(diag[s].cast<cplx>().asDiagonal());
    return make_pom(outs);
  }
  const double count = static_cast<double>(displacements.size());
  for (const auto& a : displacements) {
    Mat dp = padded_displacement(big, a);
    for (unsigned s = 0; s < patterns; ++s) {
      Mat full = dp * diag[s].cast<cplx>().asDiagonal() * dp.adjoint();
      outs.push_back(hermitize(full.topLeftCorner(dsub, dsub)) / count);
    }
  }
  return make_pom(outs);
}

Mat fock_state(int n, int dsub) {
  if (n < 0 || n >= dsub) throw Error("Fock index outside the truncated space");
  Mat r = Mat::Zero(dsub, dsub);
  r(n, n) = 1.0;
  return r;
}

namespace {
Vec coherent_ket(cplx alpha, int dsub) {
  Vec v(dsub);
  v(0) = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < dsub; ++n) v(n) = v(n - 1) * alpha / std::sqrt(double(n));
  return v;
}
}  // namespace

Mat coherent_state(cplx alpha, int dsub) {
  Vec v = coherent_ket(alpha, dsub);
  return projector(v / v.norm());
}

Mat laser_state(double mu, int dsub) {
  if (mu < 0.0) throw Error("mean photon number must be nonnegative");
  RVec w(dsub);
  w(0) = 1.0;
  for (int n = 1; n < dsub; ++n) w(n) = w(n - 1) * mu / n;
  w /= w.sum();
  return w.cast<cplx>().asDiagonal();
}

Mat cat_state(cplx alpha, int dsub) {
  Vec v = (coherent_ket(alpha, dsub) + coherent_ket(-alpha, dsub)) /
          std::sqrt(2.0 * (1.0 + std::exp(-2.0 * std::norm(alpha))));
  return projector(v / v.norm());
}

Mat reference_state(const std::string& kind, double param, int dsub) {
  if (kind == "laser") return laser_state(param, dsub);
  if (kind == "cat") return cat_state(param, dsub);
  if (kind == "fock") return fock_state(static_cast<int>(param), dsub);
  if (kind == "coherent") return coherent_state(param, dsub);
  if (kind == "vacuum") return fock_state(0, dsub);
  if (kind == "coherent_mix")
    return 0.5 * coherent_state(param, dsub) + 0.5 * coherent_state(cplx(0.0, -0.8 * param), dsub);
  throw ConfigError("unknown reference state: " + kind);
}

Mat sh_default_modes(int dsub, const ShConfig& cfg) {
  const int g = cfg.grid;
  const double dx = 2.0 * cfg.half_width / g;
  Mat m(g, dsub);
  for (int i = 0; i < g; ++i) {
    double x = -cfg.half_width + (i + 0.5) * dx;
    for (int l = 0; l < dsub; ++l) m(i, l) = std::pow(x, l) * std::exp(-x * x) * std::exp(cplx(0.0, l * x));
  }
  // Gram-Schmidt, twice for stability.
  for (int pass = 0; pass < 2; ++pass)
    for (int l = 0; l < dsub; ++l) {
      for (int k = 0; k < l; ++k) m.col(l) -= (m.col(k).dot(m.col(l)) * dx) * m.col(k);
      m.col(l) /= std::sqrt(m.col(l).squaredNorm() * dx);
    }
  return m;
}

Pom sh_pom(const Mat& modes, const ShConfig& cfg) {
  const int g = cfg.grid;
  if (modes.rows() != g) throw DimensionMismatch("modes must be sampled on the configured grid");
  const int d = static_cast<int>(modes.cols());
  const double dx = 2.0 * cfg.half_width / g;
  double defect = (modes.adjoint() * modes * dx - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
  if (defect > 1e-3) throw Error("sampling grid too coarse: modes are not orthonormal");
  std::vector<Mat> outs;
  for (int k = 0; k < cfg.apertures; ++k) {
    double c = (k - 0.5 * (cfg.apertures - 1)) * cfg.aperture_width;
    for (int j = 0; j < cfg.pixels_per_aperture; ++j) {
      double s = c + (j - 0.5 * (cfg.pixels_per_aperture - 1)) * cfg.pixel_spacing;
      Vec amp = Vec::Zero(d);
      for (int i = 0; i < g; ++i) {
        double x = -cfg.half_width + (i + 0.5) * dx;
        if (std::abs(x - c) > 0.5 * cfg.aperture_width) continue;
        double u = s - x;
        cplx h = std::sqrt(cfg.zeta / cfg.z) * std::exp(cplx(0.0, cfg.zeta * u * u / (2.0 * cfg.z)));
        amp += (h * dx) * modes.row(i).transpose();
      }
      Vec uvec = amp.conjugate();
      outs.push_back(uvec * uvec.adjoint());
    }
  }
  Mat gsum = Mat::Zero(d, d);
  for (const auto& o : outs) gsum += o;
  double top = eigenvalues_h(gsum).maxCoeff();
  for (auto& o : outs) o /= top;
  return make_pom(outs);
}

Pom sh_pom(int dsub, const ShConfig& cfg) { return sh_pom(sh_default_modes(dsub, cfg), cfg); }

}  // namespace tomo
