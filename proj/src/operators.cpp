#include "tomo/operators.hpp"

#include <array>
#include <algorithm>
#include <cmath>

namespace tomo {

Mat identity(int d) { return Mat::Identity(d, d); }

Mat pauli_x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Mat pauli_y() {
  Mat m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}

Mat pauli_z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Mat hermitize(const Mat& a) { return 0.5 * (a + a.adjoint()); }

bool is_hermitian(const Mat& a, double tol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

Mat make_state(const Mat& a) {
  if (a.rows() != a.cols() || a.rows() < 1) throw InvalidState("state must be square and nonempty");
  Mat h = hermitize(a);
  double tr = h.trace().real();
  if (std::abs(tr - 1.0) > 1e-10) throw InvalidState("state trace differs from 1: " + std::to_string(tr));
  double mn = eigenvalues_h(h).minCoeff();
  if (mn < -1e-10) throw InvalidState("state has negative eigenvalue " + std::to_string(mn));
  return h;
}

bool is_state(const Mat& a, double tol) {
  if (a.rows() != a.cols() || a.rows() < 1) return false;
  if (!is_hermitian(a, 1e-9)) return false;
  if (std::abs(a.trace().real() - 1.0) > tol) return false;
  return eigenvalues_h(hermitize(a)).minCoeff() >= -tol;
}

Mat projector(const Vec& ket) { return ket * ket.adjoint(); }

Mat tensor(const Mat& a, const Mat& b) {
  Mat r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

Vec tensor(const Vec& a, const Vec& b) {
  Vec r(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) r.segment(i * b.size(), b.size()) = a(i) * b;
  return r;
}

Mat tensor_all(const std::vector<Mat>& ops) {
  if (ops.empty()) return identity(1);
  Mat r = ops.front();
  for (size_t i = 1; i < ops.size(); ++i) r = tensor(r, ops[i]);
  return r;
}

static void check_dims(const Mat& a, Dims dims) {
  if (dims.first < 1 || dims.second < 1 || a.rows() != a.cols() ||
      a.rows() != static_cast<Eigen::Index>(dims.first) * dims.second)
    throw DimensionMismatch("operator dimension does not match product of subsystem dims");
}

Mat partial_transpose(const Mat& a, int subsystem, Dims dims) {
  check_dims(a, dims);
  if (subsystem != 1 && subsystem != 2) throw DimensionMismatch("subsystem must be 1 or 2");
  const int da = dims.first, db = dims.second;
  Mat r(a.rows(), a.cols());
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < db; ++j)
      for (int k = 0; k < da; ++k)
        for (int l = 0; l < db; ++l) {
          // element <i j| a |k l>
          cplx v = a(i * db + j, k * db + l);
          if (subsystem == 1)
            r(k * db + j, i * db + l) = v;
          else
            r(i * db + l, k * db + j) = v;
        }
  return r;
}

Mat partial_trace(const Mat& a, int keep, Dims dims) {
  check_dims(a, dims);
  if (keep != 1 && keep != 2) throw DimensionMismatch("keep must be 1 or 2");
  const int da = dims.first, db = dims.second;
  if (keep == 1) {
    Mat r = Mat::Zero(da, da);
    for (int i = 0; i < da; ++i)
      for (int k = 0; k < da; ++k)
        for (int j = 0; j < db; ++j) r(i, k) += a(i * db + j, k * db + j);
    return r;
  }
  Mat r = Mat::Zero(db, db);
  for (int j = 0; j < db; ++j)
    for (int l = 0; l < db; ++l)
      for (int i = 0; i < da; ++i) r(j, l) += a(i * db + j, i * db + l);
  return r;
}

static Eigen::SelfAdjointEigenSolver<Mat> eig(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(a));
  if (es.info() != Eigen::Success) throw EigensolverFailure("Hermitian eigensolver failed");
  return es;
}

Mat hermitian_fn(const Mat& a, const std::function<double(double)>& f, double eig_floor) {
  auto es = eig(a);
  RVec ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    double x = ev(i);
    if (eig_floor > 0.0 && x < eig_floor) x = eig_floor;
    ev(i) = f(x);
  }
  const Mat& u = es.eigenvectors();
  return u * ev.cast<cplx>().asDiagonal() * u.adjoint();
}

Mat expm_h(const Mat& a) {
  return hermitian_fn(a, [](double x) { return std::exp(x); });
}

Mat logm_h(const Mat& a, double eig_floor) {
  return hermitian_fn(a, [](double x) { return std::log(x); }, eig_floor);
}

Mat inverse_h(const Mat& a, double eig_floor) {
  return hermitian_fn(a, [](double x) { return 1.0 / x; }, eig_floor);
}

Mat sqrtm_psd(const Mat& a) {
  return hermitian_fn(a, [](double x) { return x > 0 ? std::sqrt(x) : 0.0; });
}

RVec eigenvalues_h(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(a), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw EigensolverFailure("Hermitian eigensolver failed");
  return es.eigenvalues();
}

double trace_norm(const Mat& a) {
  if (is_hermitian(a, 1e-13)) return eigenvalues_h(a).cwiseAbs().sum();
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues().sum();
}

double trace_class_distance(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("trace distance: dimension mismatch");
  return 0.5 * eigenvalues_h(a - b).cwiseAbs().sum();
}

double von_neumann_entropy(const Mat& rho) {
  RVec ev = eigenvalues_h(rho);
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 0.0) s -= ev(i) * std::log(ev(i));
  return s;
}

double fidelity(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) throw DimensionMismatch("fidelity: dimension mismatch");
  Mat sa = sqrtm_psd(a);
  RVec ev = eigenvalues_h(sa * b * sa);
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 0.0) s += std::sqrt(ev(i));
  return std::min(1.0, s * s);
}

double purity(const Mat& rho) { return (rho * rho).trace().real(); }

std::array<double, 3> bloch_vector(const Mat& rho) {
  if (rho.rows() != 2) throw DimensionMismatch("Bloch vector requires a qubit operator");
  return {(rho * pauli_x()).trace().real(), (rho * pauli_y()).trace().real(), (rho * pauli_z()).trace().real()};
}

}  // namespace tomo
