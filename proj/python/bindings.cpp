#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/stl.h>

#include "tomo/tomo.hpp"

namespace py = pybind11;
using namespace tomo;

namespace {

py::dict estimation_dict(const EstimationResult& r) {
  py::dict d;
  d["estimator"] = r.estimator;
  d["iterations"] = r.iterations;
  d["residual"] = r.residual;
  d["entropy"] = r.entropy;
  d["converged"] = r.converged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_tomo, m) {
  auto base = py::register_exception<Error>(m, "TomoError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<Pom>(m, "Pom")
      .def(py::init([](std::vector<Mat> outcomes) { return make_pom(std::move(outcomes)); }))
      .def_readonly("outcomes", &Pom::outcomes)
      .def_readonly("dim", &Pom::dim)
      .def_readonly("complete", &Pom::complete)
      .def("__len__", &Pom::size);

  m.def("build_standard", py::overload_cast<const std::string&>(&build_standard), py::arg("id"));
  m.def("probabilities", &probabilities, py::arg("pom"), py::arg("rho"));
  m.def("gram_rank", [](const Pom& p) { return gram_matrix(p).rank; });

  m.def("trace_class_distance", &trace_class_distance);
  m.def("von_neumann_entropy", &von_neumann_entropy);
  m.def("bloch_vector", &bloch_vector);
  m.def("random_state", [](int d, std::uint64_t seed) {
    RngStream rng(seed);
    return hs_random_state(d, rng);
  }, py::arg("dim"), py::arg("seed") = 1);

  m.def(
      "estimate_state",
      [](const std::vector<double>& counts, const Pom& pom, const std::string& estimator, double precision,
         double lambda, double beta) {
        EstimationConfig cfg;
        cfg.precision = precision;
        cfg.lambda = lambda;
        cfg.beta = beta;
        return estimation_dict(run_estimator(estimator, Frequencies::from_counts(counts), pom, cfg));
      },
      py::arg("counts"), py::arg("pom"), py::arg("estimator") = "mlme_new", py::arg("precision") = 1e-7,
      py::arg("lambda_") = 1e-3, py::arg("beta") = 0.5);
  m.def("classical_max_entropy_feasible",
        [](const std::vector<double>& counts, const Pom& pom) {
          return classical_max_entropy(Frequencies::from_counts(counts), pom).feasible;
        });

  m.def("witness_census", [](int threads) {
    IcCensus c = enumerate_ic_sets(v_list(0), threads, false);
    return py::make_tuple(c.candidates, c.ic_count, c.classes);
  }, py::arg("threads") = 1);

  m.def("channel_choi", [](const std::string& id) { return choi_from_kraus(channel_from_id(id)); });
  m.def("channel_entropy", &channel_entropy, py::arg("E"), py::arg("din"));
  m.def("choi_distance", &choi_distance);
  m.def(
      "estimate_process",
      [](const Mat& E_true, int n_inputs, double N) {
        Pom pom = build_standard("product_sic:2");
        auto in = sic_inputs(2);
        in.resize(std::min<size_t>(in.size(), n_inputs));
        QptResult r = mlme_qpt(qpt_exact_data(E_true, in, pom, N, 4, 4));
        py::dict d;
        d["E"] = r.E;
        d["iterations"] = r.iterations;
        d["max_tp_defect"] = r.max_tp_defect;
        return d;
      },
      py::arg("E_true"), py::arg("n_inputs"), py::arg("N") = 1e6);

  m.def("reference_state", &reference_state, py::arg("kind"), py::arg("param"), py::arg("dsub"));
  m.def("wigner", &wigner_fock, py::arg("rho"), py::arg("x"), py::arg("p"));
  m.def("nonclassicality_depth", [](const Mat& rho) {
    auto r = nonclassicality_depth(rho);
    return py::make_tuple(r.tau, r.half_width);
  });
}
