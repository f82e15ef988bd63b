#include "support.hpp"

using namespace tomo;
using testing::kSeeds;
using testing::max_abs;

namespace {

Frequencies exact(const Pom& pom, const Mat& rho, double N = 1e6) {
  return Frequencies::from_probabilities(probabilities(pom, rho), N);
}

bool nondecreasing(const std::vector<double>& v, double tol = 1e-9) {
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1] - tol * std::max(1.0, std::abs(v[i - 1]))) return false;
  return true;
}

Pom z_basis() { return make_pom({projector(testing::ket({1, 0})), projector(testing::ket({0, 1}))}); }

Pom projective_basis(int d, RngStream& rng) {
  Mat u = haar_unitary(d, rng);
  std::vector<Mat> outs;
  for (int k = 0; k < d; ++k) outs.push_back(projector(u.col(k)));
  return make_pom(outs);
}

}  // namespace

TEST_CASE("likelihood and R operator") {
  Pom tr = build_standard("trine");
  Frequencies f = Frequencies::from_counts({6, 2, 1});
  CHECK(log_likelihood(f, tr, identity(2) / 2.0) == doctest::Approx(9.0 * std::log(1.0 / 3.0)));
  Mat r = r_operator(f, tr, identity(2) / 2.0);
  Mat manual = 3.0 * (6.0 / 9 * tr.outcomes[0] + 2.0 / 9 * tr.outcomes[1] + 1.0 / 9 * tr.outcomes[2]);
  CHECK(max_abs(r - manual) < 1e-14);
  CHECK((r * identity(2) / 2.0).trace().real() == doctest::Approx(1.0));
  CHECK(max_abs(r_operator(Frequencies::from_counts({5}), make_pom({identity(2)}), identity(2) / 2.0) -
                identity(2)) < 1e-14);
  Pom tet = build_standard("tetrahedron");
  CHECK(log_likelihood(Frequencies::from_counts({1, 1, 1, 1}), tet, identity(2) / 2.0) ==
        doctest::Approx(4.0 * std::log(0.25)));

  // Uniform efficiency shifts the likelihood by a constant.
  Pom lossy = apply_efficiency(tet, 0.6 * RMat::Identity(4, 4));
  Frequencies g = Frequencies::from_counts({5, 3, 1, 2});
  RngStream rng(4);
  Mat a = hs_random_state(2, rng), b = hs_random_state(2, rng);
  double da = log_likelihood(g, lossy, a, true) - log_likelihood(g, tet, a);
  double db = log_likelihood(g, lossy, b, true) - log_likelihood(g, tet, b);
  CHECK(da == doctest::Approx(db).epsilon(1e-12));
}

TEST_CASE("linear inversion") {
  Pom tet = build_standard("tetrahedron");
  CHECK(max_abs(linear_inversion(Frequencies::from_counts({1, 1, 1, 1}), tet) - identity(2) / 2.0) < 1e-14);
  RngStream rng(2);
  Mat rho = testing::interior_state(2, rng);
  CHECK(max_abs(linear_inversion(exact(tet, rho), tet) - rho) < 1e-10);
  // Boundary truth, few copies: the linear estimate may leave the state space.
  Mat li = linear_inversion(Frequencies::from_counts({3, 0, 0, 0}), tet);
  CHECK(eigenvalues_h(li).minCoeff() < 0.0);
}

TEST_CASE("ml_dg fixtures") {
  Pom tet = build_standard("tetrahedron");
  RngStream rng(7);
  Mat rho = testing::interior_state(2, rng);
  auto r = ml_dg(exact(tet, rho), tet, {.precision = 1e-10});
  CHECK(r.converged);
  CHECK(trace_class_distance(r.estimator, linear_inversion(exact(tet, rho), tet)) < 1e-6);

  // Trine: compare the fitted Bloch vector with a dense grid search on the disk.
  Pom tr = build_standard("trine");
  Frequencies f = Frequencies::from_counts({6, 2, 1});
  auto t = ml_dg(f, tr, {.precision = 1e-9});
  CHECK(t.converged);
  double best = -1e300;
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 400; ++j) {
      double x = -1 + i / 200.0, z = -1 + j / 200.0;
      if (x * x + z * z > 1) continue;
      Mat s = (identity(2) + x * pauli_x() + z * pauli_z()) / 2.0;
      auto p = probabilities(tr, s);
      if (*std::min_element(p.begin(), p.end()) <= 0.0) continue;
      best = std::max(best, log_likelihood(f, tr, s));
    }
  CHECK(log_likelihood(f, tr, t.estimator) >= best - 1e-6);

  auto b = ml_dg(Frequencies::from_counts({10, 0}), z_basis(), {.max_iter = 2000});
  CHECK(trace_class_distance(b.estimator, projector(testing::ket({1, 0}))) < 1e-3);
}

TEST_CASE("ml_cg fixtures") {
  Pom tet = build_standard("tetrahedron");
  RngStream rng(8);
  Mat rho = testing::interior_state(2, rng);
  auto dg = ml_dg(exact(tet, rho), tet, {.precision = 1e-10});
  auto cg = ml_cg(exact(tet, rho), tet, {.precision = 1e-10});
  CHECK(cg.converged);
  CHECK(trace_class_distance(cg.estimator, dg.estimator) < 1e-6);

  Mat plus_i = projector(testing::ket({1, cplx(0, 1)}));
  RngStream data(1, 5);
  auto counts = sample_counts(probabilities(tet, plus_i), 1000, data);
  auto r = ml_cg(Frequencies::from_counts(counts), tet, {.precision = 1e-7});
  CHECK(r.converged);
  CHECK(r.iterations < 200);

  for (double xi : {0.0, 1.0}) {
    auto x = ml_cg(exact(tet, rho), tet, {.precision = 1e-9, .xi = xi});
    CHECK(trace_class_distance(x.estimator, dg.estimator) < 1e-6);
  }
}

TEST_CASE("MLME fixtures") {
  Pom tr = build_standard("trine");
  Frequencies f = Frequencies::from_counts({6, 2, 1});
  // The MLME point is pure here, so the exponential parametrization only
  // approaches it; the Bloch vector is what the fixture pins down.
  auto a = mlme_scheme_a(f, tr, {.max_iter = 20000});
  auto ba = bloch_vector(a.estimator);
  CHECK(std::abs(ba[0] - 0.194) < 1e-2);
  CHECK(std::abs(ba[1]) < 1e-2);
  CHECK(std::abs(ba[2] - 0.981) < 1e-2);
  auto n = mlme_new(f, tr);
  auto bn = bloch_vector(n.estimator);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(bn[k] - ba[k]) < 5e-3);

  // sigma_y eigenstate is invisible to the trine.
  Mat yplus = projector(testing::ket({1, cplx(0, 1)}));
  auto y = mlme_scheme_a(exact(tr, yplus), tr);
  CHECK(max_abs(y.estimator - identity(2) / 2.0) < 5e-3);

  auto big = mlme_new(f, tr, {.lambda = 1e3});
  CHECK(max_abs(big.estimator - identity(2) / 2.0) < 1e-3);

  Pom tet = build_standard("tetrahedron");
  RngStream rng(3);
  auto c = sample_counts(probabilities(tet, hs_random_state(2, rng)), 500, rng);
  auto ic_a = mlme_scheme_a(Frequencies::from_counts(c), tet);
  auto ic_ml = ml_dg(Frequencies::from_counts(c), tet);
  CHECK(trace_class_distance(ic_a.estimator, ic_ml.estimator) < 2e-3);
}

TEST_CASE("Scheme B") {
  Pom tr = build_standard("trine");
  Frequencies f = Frequencies::from_counts({6, 2, 1});
  auto a = mlme_scheme_a(f, tr, {.max_iter = 5000});
  auto b = mlme_scheme_b(f, tr, {.max_iter = 5000});
  CHECK(trace_class_distance(a.estimator, b.estimator) < 1e-6);

  Pom rnd = build_random(2, 3, 17);
  Frequencies m = Frequencies::from_counts({3100, 1900, 0});
  auto r = mlme_scheme_b(m, rnd, {.missing_outcome = 2});
  auto p = probabilities(rnd, r.estimator);
  auto fr = m.freqs();
  CHECK(p[0] / fr[0] == doctest::Approx(p[1] / fr[1]).epsilon(1e-6));

  // Highest entropy among likelihood maximizers reached from random starts.
  RngStream rng(5, 3);
  double ll_b = log_likelihood(m, rnd, r.estimator);
  double worst_gap = 0.0;
  for (int k = 0; k < 50; ++k) {
    auto naive = ml_dg(m, rnd, {.max_iter = 20000, .start = hs_random_state(2, rng)});
    if (log_likelihood(m, rnd, naive.estimator) < ll_b - 1e-3) continue;
    worst_gap = std::max(worst_gap, von_neumann_entropy(naive.estimator) - r.entropy);
  }
  CHECK(worst_gap <= 1e-4);
}

TEST_CASE("MLME entropy and likelihood against lambda") {
  Pom hom = homodyne_pom(5, default_homodyne_settings());
  REQUIRE(hom.size() == 20);
  RngStream rng(6);
  Mat truth = Mat::Zero(5, 5);
  truth.topLeftCorner(3, 3) = hs_random_state(3, rng);
  auto p = probabilities(hom, truth);
  double s = 0;
  for (double x : p) s += x;
  for (double& x : p) x /= s;
  auto c = sample_counts(p, 2000, rng);
  Frequencies f = Frequencies::from_counts(c);
  double prev_s = -1, prev_l = 1e300;
  for (double lam : {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
    auto r = mlme_new(f, hom, {.lambda = lam, .precision = 1e-8, .max_iter = 100000}, true);
    double ll = log_likelihood(f, hom, r.estimator, true);
    CHECK(r.entropy >= prev_s - 1e-6);
    CHECK(ll <= prev_l + 1e-6);
    prev_s = r.entropy;
    prev_l = ll;
  }
}

TEST_CASE("HML fixtures") {
  auto r = hml(Frequencies::from_counts({3, 1}), z_basis(), {.precision = 1e-10, .beta = 0.5});
  CHECK(r.converged);
  RVec ev = eigenvalues_h(r.estimator);
  CHECK(ev(1) == doctest::Approx(0.7).epsilon(1e-8));
  CHECK(ev(0) == doctest::Approx(0.3).epsilon(1e-8));
  auto u = hml(Frequencies::from_counts({4, 4, 4}), build_standard("trine"), {.precision = 1e-10});
  CHECK(max_abs(u.estimator - identity(2) / 2.0) < 1e-6);
  CHECK_THROWS(hml(Frequencies::from_counts({3, 1}), z_basis(), {.beta = 0.0}));
}

TEST_CASE("estimator errors") {
  Pom tet = build_standard("tetrahedron");
  CHECK_THROWS_AS(ml_dg(Frequencies::from_counts({1, 2}), tet), DimensionMismatch);
  CHECK_THROWS(ml_dg(Frequencies::from_counts({0, 0, 0, 0}), tet));
  CHECK(classical_max_entropy(Frequencies::from_counts({6, 2, 1}), build_standard("trine")).feasible == false);
  auto ok = classical_max_entropy(Frequencies::from_counts({4, 3, 3}), build_standard("trine"));
  CHECK(ok.feasible);
}

TEST_CASE("property: monotone ascent and certificates") {
  Pom ps = build_standard("product_sic:2");
  Pom tet = build_standard("tetrahedron");
  for (auto seed : kSeeds) {
    CAPTURE(seed);
    RngStream rng(seed, 10);
    for (int k = 0; k < 2; ++k) {
      const Pom& pom = k ? ps : tet;
      Mat truth = hs_random_state(pom.dim, rng);
      Frequencies f = Frequencies::from_counts(sample_counts(probabilities(pom, truth), 2000, rng));
      EstimationConfig cfg{.precision = 1e-7};
      auto dg = ml_dg(f, pom, cfg);
      auto dgq = ml_dg(f, pom, {.precision = 1e-7, .line_search = LineSearch::quadratic10});
      auto cg = ml_cg(f, pom, cfg);
      auto h = hml(f, pom, {.precision = 1e-7, .beta = 0.5});
      for (auto* r : {&dg, &dgq, &cg}) {
        CHECK(nondecreasing(r->loglik_trace));
        if (r->converged) CHECK(ml_residual(f, pom, r->estimator) <= 1e-7 * 1.0001);
      }
      CHECK(nondecreasing(h.loglik_trace));
      if (h.converged) CHECK(hml_residual(f, pom, h.estimator, 0.5) <= 1e-7 * 1.0001);
      auto me = mlme_new(f, pom, {.precision = 1e-6});
      if (me.converged) CHECK(mlme_residual(f, pom, me.estimator, 0.0) <= 1e-6 * 1.0001);
      Pom tr = build_standard("trine");
      Frequencies ft = Frequencies::from_counts(sample_counts(probabilities(tr, hs_random_state(2, rng)), 500, rng));
      auto mt = mlme_new(ft, tr, {.precision = 1e-6});
      CHECK(mt.converged);
      CHECK(mlme_residual(ft, tr, mt.estimator, 1e-3) <= 1e-6 * 1.0001);
    }
  }
}

TEST_CASE("property: plateau membership") {
  Pom tr = build_standard("trine");
  for (auto seed : kSeeds) {
    CAPTURE(seed);
    RngStream rng(seed, 11);
    // Interior trine data so the ML plateau is a segment inside the ball.
    Mat truth = testing::interior_state(2, rng, 0.2);
    Frequencies f = Frequencies::from_counts(sample_counts(probabilities(tr, truth), 3000, rng));
    auto ml = ml_dg(f, tr, {.precision = 1e-10});
    auto me = mlme_scheme_a(f, tr, {.precision = 1e-9});
    auto nw = mlme_new(f, tr, {.lambda = 1e-6, .precision = 1e-9});
    auto pm = probabilities(tr, ml.estimator);
    for (const auto& r : {me, nw}) {
      auto pe = probabilities(tr, r.estimator);
      for (size_t j = 0; j < pm.size(); ++j) CHECK(std::abs(pe[j] - pm[j]) < 1e-5);
      CHECK(r.entropy >= ml.entropy - 1e-9);
    }
  }
}

TEST_CASE("property: HML full rank and add-beta") {
  for (auto seed : kSeeds) {
    CAPTURE(seed);
    RngStream rng(seed, 12);
    for (int d : {2, 3, 4}) {
      Pom pom = projective_basis(d, rng);
      std::vector<double> n(d);
      double N = 0;
      for (int k = 0; k < d; ++k) N += (n[k] = rng.uniform_int(0, 20));
      if (N == 0) n[0] = N = 1;
      const double beta = 0.5;
      auto r = hml(Frequencies::from_counts(n), pom, {.precision = 1e-10, .beta = beta});
      CHECK(r.converged);
      CHECK(eigenvalues_h(r.estimator).minCoeff() >= beta / (2 * (N + d * beta)));
      auto p = probabilities(pom, r.estimator);
      for (int k = 0; k < d; ++k) CHECK(p[k] == doctest::Approx((n[k] + beta) / (N + d * beta)).epsilon(1e-6));
    }
  }
}

TEST_CASE("property: noiseless consistency") {
  Pom ps = build_standard("product_sic:2");
  for (auto seed : kSeeds) {
    CAPTURE(seed);
    RngStream rng(seed, 13);
    Mat truth = testing::interior_state(4, rng);
    Frequencies f = exact(ps, truth);
    CHECK(trace_class_distance(ml_dg(f, ps, {.precision = 1e-10}).estimator, truth) < 1e-6);
    CHECK(trace_class_distance(ml_cg(f, ps, {.precision = 1e-10}).estimator, truth) < 1e-6);
    CHECK(trace_class_distance(mlme_new(f, ps, {.precision = 1e-10}).estimator, truth) < 1e-6);
    CHECK(trace_class_distance(hml(f, ps, {.precision = 1e-9, .beta = 1e-6}).estimator, truth) < 1e-6);
  }
}
