#include <cmath>

#include "support.hpp"

using namespace tomo;
using testing::kSeeds;
using testing::max_abs;

namespace {

ExperimentSpec tetra_spec(long long N, int runs, std::uint64_t seed) {
  ExperimentSpec s;
  RngStream rng(seed, 50);
  s.truth = testing::interior_state(2, rng, 0.1);
  s.pom = build_standard("tetrahedron");
  s.N = N;
  s.runs = runs;
  s.seed = seed;
  s.include_timing = false;
  return s;
}

}  // namespace

TEST_CASE("sample counts") {
  RngStream rng(1);
  auto c = sample_counts({1.0, 0.0, 0.0}, 100, rng);
  CHECK(c == std::vector<double>{100, 0, 0});

  auto u = sample_counts({0.25, 0.25, 0.25, 0.25}, 1000000, rng);
  const double sigma = std::sqrt(1e6 * 0.25 * 0.75);
  double total = 0.0;
  for (double v : u) {
    CHECK(std::abs(v - 250000.0) < 5 * sigma);
    total += v;
  }
  CHECK(total == 1000000.0);

  auto h = sample_counts({0.25, 0.25}, 100000, rng);
  const double det = h[0] + h[1];
  CHECK(std::abs(det - 50000.0) < 5 * std::sqrt(1e5 * 0.25));
  CHECK(std::abs(h[0] - h[1]) < 5 * std::sqrt(det));

  RngStream a(9, 3), b(9, 3);
  CHECK(sample_counts({0.3, 0.7}, 500, a) == sample_counts({0.3, 0.7}, 500, b));
}

TEST_CASE("random states") {
  RngStream rng(2);
  // nu = 0: equal weights over four Haar kets.
  for (int k = 0; k < 20; ++k) {
    Mat r = random_state(4, 0.0, rng);
    CHECK(r.trace().real() == doctest::Approx(1.0));
    CHECK(eigenvalues_h(r).minCoeff() >= -1e-12);
    CHECK(purity(r) <= 1.0 + 1e-12);
  }
  std::vector<double> p;
  for (int k = 0; k < 100; ++k) p.push_back(purity(random_state(4, 40.0, rng)));
  CHECK(testing::median(p) >= 0.95);
  RngStream a(5), b(5);
  CHECK(max_abs(random_state(3, 2.0, a) - random_state(3, 2.0, b)) == 0.0);
}

TEST_CASE("estimator dispatch") {
  Pom tet = build_standard("tetrahedron");
  RngStream rng(3);
  Mat truth = testing::interior_state(2, rng);
  Frequencies f = Frequencies::from_probabilities(probabilities(tet, truth), 1e6);
  for (const char* id : {"ml_dg", "ml_cg", "mlme_a", "mlme_b", "mlme_new", "hml", "li"}) {
    CAPTURE(id);
    auto r = run_estimator(id, f, tet, {});
    CHECK(trace_class_distance(r.estimator, truth) < 1e-3);
  }
  CHECK_THROWS_AS(run_estimator("nope", f, tet, {}), ConfigError);
}

TEST_CASE("batches") {
  auto one = run_batch(tetra_spec(1000, 1, 4));
  REQUIRE(one.records.size() == 1);
  CHECK(one.records[0].ok);

  auto a = tetra_spec(500, 12, 7);
  auto b = a;
  b.threads = 3;
  std::string ca = batch_csv(run_batch(a));
  CHECK(ca == batch_csv(run_batch(a)));
  CHECK(ca == batch_csv(run_batch(b)));
  CHECK(ca.rfind("run_id,estimator,N,iterations,residual,distance,entropy,wall_ms\n", 0) == 0);

  auto lo = run_batch(tetra_spec(100, 50, 8)), hi = run_batch(tetra_spec(10000, 50, 8));
  CHECK(hi.mean_distance < lo.mean_distance);
  CHECK(lo.failures == 0);
}

TEST_CASE("QPT sampling provider") {
  Mat E = choi_from_kraus(cnot_channel());
  Pom pom = build_standard("product_sic:2");
  auto in = sic_inputs(2);
  auto p1 = qpt_sampling_provider(E, pom, 1000, 4, 4, 3), p2 = qpt_sampling_provider(E, pom, 1000, 4, 4, 3);
  for (int k = 0; k < 3; ++k) {
    auto c = p1(in[k]);
    CHECK(c == p2(in[k]));
    double s = 0.0;
    for (double v : c) s += v;
    CHECK(s == 1000.0);
  }
}

TEST_CASE("property: distance scales as the inverse square root of N") {
  for (auto seed : kSeeds) {
    CAPTURE(seed);
    std::vector<double> lx, ly;
    for (long long N : {100LL, 1000LL, 10000LL}) {
      auto r = run_batch(tetra_spec(N, 200, seed));
      lx.push_back(std::log10(double(N)));
      ly.push_back(std::log10(r.mean_distance));
    }
    double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3, sxy = 0, sxx = 0;
    for (int k = 0; k < 3; ++k) {
      sxy += (lx[k] - mx) * (ly[k] - my);
      sxx += (lx[k] - mx) * (lx[k] - mx);
    }
    double slope = sxy / sxx;
    INFO("slope " << slope);
    CHECK(slope >= -0.65);
    CHECK(slope <= -0.35);
  }
}

TEST_CASE("property: batch output is a function of the seed") {
  for (auto seed : kSeeds) {
    CAPTURE(seed);
    auto s = tetra_spec(300, 5, seed);
    auto x = run_batch(s), y = run_batch(s);
    for (size_t k = 0; k < x.records.size(); ++k) CHECK(x.records[k].distance == y.records[k].distance);
    auto other = s;
    other.seed = seed + 10;
    other.truth = s.truth;
    CHECK(batch_csv(run_batch(other)) != batch_csv(x));
  }
}
