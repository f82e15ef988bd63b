#include "tomo/pom.hpp"

#include <cmath>

#include "tomo/rng.hpp"

namespace tomo {

Mat Pom::completeness() const {
  Mat g = Mat::Zero(dim, dim);
  for (const auto& o : outcomes) g += o;
  return g;
}

Pom make_pom(std::vector<Mat> outcomes, std::optional<RMat> efficiency) {
  if (outcomes.empty()) throw InvalidPom("POM must have at least one outcome");
  Pom p;
  p.dim = static_cast<int>(outcomes.front().rows());
  for (auto& o : outcomes) {
    if (o.rows() != p.dim || o.cols() != p.dim) throw InvalidPom("POM outcomes differ in dimension");
    o = hermitize(o);
    if (eigenvalues_h(o).minCoeff() < -1e-10) throw InvalidPom("POM outcome is not positive");
  }
  p.outcomes = std::move(outcomes);
  p.efficiency = std::move(efficiency);
  RVec g = eigenvalues_h(p.completeness());
  if (g.maxCoeff() > 1.0 + 1e-9) throw InvalidPom("sum of outcomes exceeds the identity");
  p.complete = g.minCoeff() >= 1.0 - 1e-9;
  return p;
}

std::vector<double> probabilities(const Pom& pom, const Mat& rho) {
  std::vector<double> p(pom.size());
  for (size_t j = 0; j < pom.size(); ++j) p[j] = (rho.cwiseProduct(pom.outcomes[j].transpose())).sum().real();
  return p;
}

RVec superket(const Mat& op) {
  const int d = static_cast<int>(op.rows());
  RVec v(d * d);
  const double s2 = std::sqrt(2.0);
  int idx = 0;
  v(idx++) = op.trace().real() / std::sqrt(double(d));
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k < d; ++k) {
      // sym (E_jk + E_kj)/sqrt2, antisym (-i E_jk + i E_kj)/sqrt2
      v(idx++) = (op(k, j) + op(j, k)).real() / s2;
      v(idx++) = (cplx(0, -1) * op(k, j) + cplx(0, 1) * op(j, k)).real() / s2;
    }
  for (int l = 1; l < d; ++l) {
    cplx acc = 0;
    for (int k = 0; k < l; ++k) acc += op(k, k);
    acc -= double(l) * op(l, l);
    v(idx++) = acc.real() / std::sqrt(double(l) * (l + 1));
  }
  return v;
}

Mat from_superket(const RVec& v, int d) {
  Mat op = Mat::Zero(d, d);
  const double s2 = std::sqrt(2.0);
  int idx = 0;
  op += Mat::Identity(d, d) * (v(idx++) / std::sqrt(double(d)));
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k < d; ++k) {
      double a = v(idx++), b = v(idx++);
      op(j, k) += a / s2;
      op(k, j) += a / s2;
      op(j, k) += cplx(0, -1) * b / s2;
      op(k, j) += cplx(0, 1) * b / s2;
    }
  for (int l = 1; l < d; ++l) {
    double c = v(idx++) / std::sqrt(double(l) * (l + 1));
    for (int k = 0; k < l; ++k) op(k, k) += c;
    op(l, l) -= double(l) * c;
  }
  return op;
}

std::vector<Mat> gell_mann_basis(int d) {
  std::vector<Mat> basis;
  basis.reserve(d * d);
  for (int i = 0; i < d * d; ++i) {
    RVec e = RVec::Zero(d * d);
    e(i) = 1.0;
    basis.push_back(from_superket(e, d));
  }
  return basis;
}

int numeric_rank(const RMat& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<RMat> svd(m);
  const RVec& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

static RMat superket_columns(const Pom& pom) {
  RMat s(pom.dim * pom.dim, pom.size());
  for (size_t j = 0; j < pom.size(); ++j) s.col(j) = superket(pom.outcomes[j]);
  return s;
}

GramResult gram_matrix(const Pom& pom) {
  if (pom.size() == 0) throw InvalidPom("empty POM");
  RMat s = superket_columns(pom);
  GramResult g;
  g.gram = s.transpose() * s;
  g.rank = numeric_rank(g.gram);
  return g;
}

RMat frame_superoperator(const Pom& pom) {
  if (pom.size() == 0) throw InvalidPom("empty POM");
  RMat s = superket_columns(pom);
  return s * s.transpose();
}

DualFrame dual_frame(const Pom& pom) {
  RMat f = frame_superoperator(pom);
  if (numeric_rank(f) < f.rows()) throw NotInformationallyComplete("frame superoperator is singular");
  Eigen::LDLT<RMat> ldlt(f);
  RMat s = superket_columns(pom);
  RMat th = ldlt.solve(s);
  DualFrame out;
  for (size_t j = 0; j < pom.size(); ++j) out.duals.push_back(from_superket(th.col(j), pom.dim));
  return out;
}

// Splits a product operator into unit-trace qubit factors; false if it is
// not a product.
static bool qubit_factors(const Mat& op, std::vector<Mat>& out) {
  const int d = static_cast<int>(op.rows());
  const double t = op.trace().real();
  if (std::abs(t) < 1e-14) return false;
  if (d == 2) {
    out.push_back(op / t);
    return true;
  }
  if (d % 2) return false;
  Mat a = partial_trace(op, 1, {2, d / 2});
  Mat b = partial_trace(op, 2, {2, d / 2});
  if ((tensor(a, b) / t - op).cwiseAbs().maxCoeff() > 1e-10) return false;
  out.push_back(a / t);
  return qubit_factors(b, out);
}

static DualFrame product_sic_dual(const Pom& pom) {
  DualFrame out;
  for (const auto& p : pom.outcomes) {
    std::vector<Mat> f;
    if (!qubit_factors(p, f)) throw NotSic("outcome is not a product of qubit operators");
    if (std::abs(p.trace().real() - std::pow(0.5, f.size())) > 1e-10) throw NotSic("outcome trace is not 2^-n");
    Mat dual = Mat::Identity(1, 1);
    for (const auto& u : f) {
      Mat q = 0.5 * u;
      if (std::abs((q * q).trace().real() - 0.25) > 1e-8) throw NotSic("factor is not a qubit SIC element");
      dual = tensor(dual, 6.0 * q - Mat::Identity(2, 2));
    }
    out.duals.push_back(dual);
  }
  const size_t K = pom.size();
  for (size_t j = 0; j < K; ++j)
    for (size_t k = 0; k < K; ++k)
      if (std::abs((out.duals[j] * pom.outcomes[k]).trace().real() - (j == k ? 1.0 : 0.0)) > 1e-8)
        throw NotSic("factors do not form qubit SICs");
  return out;
}

DualFrame sic_dual_closed_form(const Pom& pom) {
  const int d = pom.dim;
  if (static_cast<int>(pom.size()) != d * d) throw NotSic("SIC POM needs d^2 outcomes");
  RMat g = gram_matrix(pom).gram;
  bool sic = true;
  for (int j = 0; j < d * d && sic; ++j)
    for (int k = 0; k < d * d; ++k) {
      double want = (d * (j == k ? 1.0 : 0.0) + 1.0) / (double(d) * d * (d + 1));
      if (std::abs(g(j, k) - want) > 1e-8) {
        sic = false;
        break;
      }
    }
  // Tensor products of qubit SICs have product duals.
  if (!sic) {
    if (d > 2 && (d & (d - 1)) == 0) return product_sic_dual(pom);
    throw NotSic("Gram matrix violates the SIC relation");
  }
  DualFrame out;
  for (const auto& p : pom.outcomes) out.duals.push_back(double(d) * (d + 1) * p - Mat::Identity(d, d));
  return out;
}

std::vector<std::array<double, 3>> tetrahedron_bloch() {
  const double s = 1.0 / std::sqrt(3.0);
  return {{{s, s, s}}, {{s, -s, -s}}, {{-s, -s, s}}, {{-s, s, -s}}};
}

static Mat bloch_op(double w, double x, double y, double z) {
  return w * identity(2) + x * pauli_x() + y * pauli_y() + z * pauli_z();
}

static Pom tetrahedron() {
  std::vector<Mat> out;
  for (auto a : tetrahedron_bloch()) out.push_back(0.25 * bloch_op(1.0, a[0], a[1], a[2]));
  return make_pom(out);
}

static Pom trine() {
  const double h = std::sqrt(3.0) / 2.0;
  return make_pom({bloch_op(1.0, 0, 0, 1.0) / 3.0, bloch_op(1.0, h, 0, -0.5) / 3.0, bloch_op(1.0, -h, 0, -0.5) / 3.0});
}

static Pom bell_basis() {
  const double r = 1.0 / std::sqrt(2.0);
  Vec phip(4), phim(4), psip(4), psim(4);
  phip << r, 0, 0, r;
  phim << r, 0, 0, -r;
  psip << 0, r, r, 0;
  psim << 0, r, -r, 0;
  return make_pom({projector(phip), projector(phim), projector(psip), projector(psim)});
}

static std::vector<Mat> pauli6() {
  std::vector<Mat> out;
  for (const Mat& s : {pauli_x(), pauli_y(), pauli_z()}) {
    out.push_back((identity(2) + s) / 6.0);
    out.push_back((identity(2) - s) / 6.0);
  }
  return out;
}

static Pom tensor_power(const std::vector<Mat>& single, int n) {
  std::vector<Mat> cur = single;
  for (int k = 1; k < n; ++k) {
    std::vector<Mat> nxt;
    for (const auto& a : cur)
      for (const auto& b : single) nxt.push_back(tensor(a, b));
    cur.swap(nxt);
  }
  return make_pom(cur);
}

Pom build_standard(StandardPom kind, int n) {
  switch (kind) {
    case StandardPom::tetrahedron:
      return tetrahedron();
    case StandardPom::trine:
      return trine();
    case StandardPom::bell_basis:
      return bell_basis();
    case StandardPom::product_sic:
      if (n < 1 || n > 3) throw InvalidPom("product_sic supports 1 <= n <= 3");
      return tensor_power(tetrahedron().outcomes, n);
    case StandardPom::pauli_basis:
      if (n < 1 || n > 3) throw InvalidPom("pauli_basis supports 1 <= n <= 3");
      return tensor_power(pauli6(), n);
  }
  throw InvalidPom("unknown POM kind");
}

Pom build_standard(const std::string& id) {
  auto colon = id.find(':');
  std::string name = id.substr(0, colon);
  int n = 1;
  if (colon != std::string::npos) {
    try {
      n = std::stoi(id.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidPom("bad POM id: " + id);
    }
  }
  if (name == "tetrahedron" || name == "sic") return build_standard(StandardPom::tetrahedron);
  if (name == "trine") return build_standard(StandardPom::trine);
  if (name == "bell" || name == "bell_basis") return build_standard(StandardPom::bell_basis);
  if (name == "product_sic") return build_standard(StandardPom::product_sic, n);
  if (name == "pauli" || name == "pauli_basis") return build_standard(StandardPom::pauli_basis, n);
  throw InvalidPom("unknown POM id: " + id);
}

Pom build_random(int dim, int count, std::uint64_t seed) {
  if (count < 1 || dim < 1) throw InvalidPom("build_random needs dim >= 1 and count >= 1");
  RngStream rng(seed, 0x706f6d);
  for (int attempt = 0; attempt < 20; ++attempt) {
    std::vector<Mat> bb;
    Mat chi = Mat::Zero(dim, dim);
    for (int j = 0; j < count; ++j) {
      Mat b = ginibre(dim, dim, rng);
      bb.push_back(b.adjoint() * b);
      chi += bb.back();
    }
    RVec ev = eigenvalues_h(chi);
    if (ev.minCoeff() <= 1e-9 * ev.maxCoeff()) continue;
    Mat is = hermitian_fn(chi, [](double x) { return 1.0 / std::sqrt(x); });
    std::vector<Mat> out;
    for (auto& b : bb) out.push_back(hermitize(is * b * is));
    // absorb rounding so that sum = 1 to machine precision
    Mat g = Mat::Zero(dim, dim);
    for (auto& o : out) g += o;
    Mat corr = hermitian_fn(g, [](double x) { return 1.0 / std::sqrt(x); });
    for (auto& o : out) o = hermitize(corr * o * corr);
    return make_pom(out);
  }
  throw RankDeficientChi("could not draw a full-rank chi");
}

Pom apply_efficiency(const Pom& pom, const RMat& eta) {
  const int k = static_cast<int>(pom.size());
  if (eta.cols() != k) throw InvalidPom("efficiency matrix column count must equal the outcome count");
  if (eta.minCoeff() < 0.0) throw InvalidPom("efficiency matrix has negative entries");
  for (int c = 0; c < k; ++c)
    if (eta.col(c).sum() > 1.0 + 1e-12) throw InvalidPom("efficiency column sum exceeds 1");
  std::vector<Mat> out;
  for (Eigen::Index j = 0; j < eta.rows(); ++j) {
    if (eta.row(j).cwiseAbs().maxCoeff() == 0.0) continue;  // outcome never fires
    Mat o = Mat::Zero(pom.dim, pom.dim);
    for (int c = 0; c < k; ++c) o += eta(j, c) * pom.outcomes[c];
    out.push_back(o);
  }
  return make_pom(out, eta);
}

MeasurementSubspace measurement_subspace(const Pom& pom) {
  const int d = pom.dim, n = d * d;
  std::vector<RVec> basis;
  auto try_add = [&](RVec v, double scale) {
    for (const auto& b : basis) v -= b.dot(v) * b;
    for (const auto& b : basis) v -= b.dot(v) * b;  // second pass for stability
    double nv = v.norm();
    if (nv > 1e-9 * std::max(scale, 1e-300)) {
      basis.push_back(v / nv);
      return true;
    }
    return false;
  };
  for (const auto& o : pom.outcomes) {
    RVec s = superket(o);
    try_add(s, s.norm());
  }
  MeasurementSubspace ms;
  for (const auto& b : basis) ms.measured.push_back(from_superket(b, d));
  const size_t nmeas = basis.size();
  for (int i = 0; i < n && static_cast<int>(basis.size()) < n; ++i) {
    RVec e = RVec::Zero(n);
    e(i) = 1.0;
    try_add(e, 1.0);
  }
  for (size_t i = nmeas; i < basis.size(); ++i) ms.complement.push_back(from_superket(basis[i], d));
  return ms;
}

}  // namespace tomo
