// tomo: command-line driver for state, process, witness and CV analyses.
#include <cmath>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "tomo/cv.hpp"
#include "tomo/entanglement.hpp"
#include "tomo/io.hpp"
#include "tomo/process_est.hpp"
#include "tomo/sim.hpp"
#include "tomo/state_est.hpp"

using namespace tomo;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::string out = "-";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
};

const char* kEstimatorKeys[] = {"estimator", "epsilon", "lambda", "precision", "max_iter", "line_search",
                                "xi", "beta", "exact_gradient", "missing_outcome"};

std::set<std::string> keys(const std::string& section, std::initializer_list<const char*> own,
                           bool estimator_keys = false) {
  std::set<std::string> s{"seed"};
  for (const char* k : own) s.insert(section + "." + k);
  if (estimator_keys)
    for (const char* k : kEstimatorKeys) s.insert(section + "." + k);
  return s;
}

EstimationConfig estimation_config(const Config& c, const std::string& sec) {
  EstimationConfig e;
  e.epsilon = c.num(sec + ".epsilon", e.epsilon);
  e.lambda = c.num(sec + ".lambda", e.lambda);
  e.precision = c.num(sec + ".precision", e.precision);
  e.max_iter = static_cast<int>(c.integer(sec + ".max_iter", e.max_iter));
  e.xi = c.num(sec + ".xi", e.xi);
  e.beta = c.num(sec + ".beta", e.beta);
  e.exact_gradient = c.flag(sec + ".exact_gradient", false);
  e.missing_outcome = static_cast<int>(c.integer(sec + ".missing_outcome", -1));
  std::string ls = c.str(sec + ".line_search", "none");
  if (ls == "none") e.line_search = LineSearch::none;
  else if (ls == "quadratic3") e.line_search = LineSearch::quadratic3;
  else if (ls == "quadratic10") e.line_search = LineSearch::quadratic10;
  else throw ConfigError("unknown line_search: " + ls);
  return e;
}

std::uint64_t seed_of(const Config& c, const Globals& g) {
  if (g.seed_set) return g.seed;
  return static_cast<std::uint64_t>(c.integer("seed", 1));
}

std::vector<double> parse_counts(const std::string& s) {
  Config tmp;
  tmp.set("x", s);
  return tmp.list("x");
}

json result_json(const EstimationResult& r, const Frequencies& f, const Pom& pom) {
  json j;
  j["estimator"] = matrix_to_json(r.estimator);
  j["iterations"] = r.iterations;
  j["residual"] = r.residual;
  j["converged"] = r.converged;
  j["entropy"] = r.entropy;
  j["loglik"] = log_likelihood(f, pom, r.estimator, !pom.complete);
  j["zero_prob_warnings"] = r.zero_prob_warnings;
  if (pom.dim == 2) {
    auto b = bloch_vector(r.estimator);
    j["bloch"] = {b[0], b[1], b[2]};
  }
  return j;
}

Pom pom_from_id(const std::string& id) {
  try {
    return build_standard(id);
  } catch (const InvalidPom& e) {
    throw ConfigError(e.what());
  } catch (const std::logic_error&) {
    throw ConfigError("bad POM id: " + id);
  }
}

Mat truth_from_spec(const std::string& spec, int dim, RngStream& rng) {
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  double param = 0.0;
  if (colon != std::string::npos) {
    Config tmp;
    tmp.set(spec, spec.substr(colon + 1));
    param = tmp.num(spec, 0.0);
  }
  if (kind == "random") return random_state(dim, param, rng);
  if (kind == "hs") return hs_random_state(dim, rng);
  if (kind == "mixed") return identity(dim) / static_cast<double>(dim);
  if (kind == "werner") {
    if (dim != 4) throw ConfigError("werner truth needs a two-qubit POM");
    Vec psi = Vec::Zero(4);
    psi(1) = 1.0 / std::sqrt(2.0);
    psi(2) = -1.0 / std::sqrt(2.0);
    return param * projector(psi) + (1.0 - param) * identity(4) / 4.0;
  }
  throw ConfigError("unknown truth: " + spec);
}

int cmd_estimate_state(const Config& c, const Globals& g) {
  const std::string s = "state";
  c.reject_unknown(keys(s, {"pom", "counts", "truth", "N", "classical_me"}, true));
  Pom pom = pom_from_id(c.require(s + ".pom"));
  EstimationConfig ec = estimation_config(c, s);
  const auto seed = seed_of(c, g);
  ec.seed = seed;
  Frequencies f;
  json out;
  if (c.has(s + ".counts")) {
    f = Frequencies::from_counts(parse_counts(c.require(s + ".counts")));
    if (f.counts.size() != pom.size()) throw ConfigError("counts length differs from the POM size");
  } else {
    RngStream rng(seed, 0x7472757468);
    Mat truth = truth_from_spec(c.str(s + ".truth", "random:2"), pom.dim, rng);
    long long N = c.integer(s + ".N", 1000);
    if (N < 1) throw ConfigError("N must be at least 1");
    f = Frequencies::from_counts(sample_counts(probabilities(pom, truth), N, rng));
    out["truth"] = matrix_to_json(truth);
  }
  const std::string id = c.str(s + ".estimator", "ml_dg");
  EstimationResult r = run_estimator(id, f, pom, ec);
  out["result"] = result_json(r, f, pom);
  out["estimator_id"] = id;
  out["counts"] = f.counts;
  out["seed"] = seed;
  if (c.flag(s + ".classical_me", false)) {
    MaxEntResult me = classical_max_entropy(f, pom);
    out["classical_me"] = {{"feasible", me.feasible}, {"mismatch", me.mismatch}, {"iterations", me.iterations}};
  }
  write_output(g.out, out.dump(2) + "\n");
  return 0;
}

int cmd_estimate_process(const Config& c, const Globals& g) {
  const std::string s = "process";
  c.reject_unknown(keys(s, {"channel", "prior", "inputs", "pom", "N", "strategy", "rounds", "lambda", "epsilon",
                            "precision", "max_iter", "mpl_starts", "mpl_max_iter", "hybrid_threshold", "selection",
                            "stop_threshold"}));
  const std::string id = c.require(s + ".channel");
  Channel ch = channel_from_id(id);
  const int n = static_cast<int>(std::lround(std::log2(ch.din)));
  if ((1 << n) != ch.din || ch.din != ch.dout) throw ConfigError("process estimation needs a qubit channel");
  const std::string prior_id = c.str(s + ".prior", id.rfind("cnot", 0) == 0 ? "cnot" : id);
  Channel prior = channel_from_id(prior_id);
  if (prior.din != ch.din || prior.dout != ch.dout) throw ConfigError("prior and channel dimensions differ");
  const std::string in_kind = c.str(s + ".inputs", "sic");
  std::vector<Mat> pool;
  if (in_kind == "sic") pool = sic_inputs(n);
  else if (in_kind == "pauli") pool = pauli_inputs(n);
  else throw ConfigError("unknown input set: " + in_kind);
  Pom pom = pom_from_id(c.str(s + ".pom", "product_sic:" + std::to_string(n)));
  if (pom.dim != ch.dout) throw ConfigError("POM dimension differs from the channel output");

  StrategyConfig sc;
  sc.mlme.lambda = c.num(s + ".lambda", sc.mlme.lambda);
  sc.mlme.epsilon = c.num(s + ".epsilon", sc.mlme.epsilon);
  sc.mlme.precision = c.num(s + ".precision", sc.mlme.precision);
  sc.mlme.max_iter = static_cast<int>(c.integer(s + ".max_iter", sc.mlme.max_iter));
  sc.projected.lambda = sc.mlme.lambda;
  sc.projected.epsilon = sc.mlme.epsilon;
  sc.rounds = static_cast<int>(c.integer(s + ".rounds", 0));
  sc.stop_threshold = c.num(s + ".stop_threshold", 0.0);
  sc.hybrid_threshold = c.num(s + ".hybrid_threshold", sc.hybrid_threshold);
  sc.mpl.starts = static_cast<int>(c.integer(s + ".mpl_starts", sc.mpl.starts));
  sc.mpl.max_iter = static_cast<int>(c.integer(s + ".mpl_max_iter", sc.mpl.max_iter));
  const std::string sel = c.str(s + ".selection", "max_distance");
  if (sel == "max_distance") sc.selection = SelectionMode::max_distance_to_previous;
  else if (sel == "min_prior") sc.selection = SelectionMode::min_distance_to_prior;
  else throw ConfigError("unknown selection: " + sel);
  const auto seed = seed_of(c, g);
  sc.mpl.seed = seed;
  QptStrategy kind = parse_strategy(c.str(s + ".strategy", "none"));

  Mat E_true = choi_from_kraus(ch);
  const long long N = c.integer(s + ".N", 0);
  InputProvider provider;
  if (N <= 0) {
    provider = [&](const Mat& input) { return probabilities(pom, apply_channel(E_true, input, ch.din, ch.dout)); };
  } else {
    provider = qpt_sampling_provider(E_true, pom, N, ch.din, ch.dout, seed);
  }
  auto rounds = run_strategy(kind, provider, pool, pom, choi_from_kraus(prior), ch.din, ch.dout, sc);
  std::ostringstream os;
  os << "round,L,distance,delta,loglik_max\n" << std::setprecision(10);
  for (size_t r = 0; r < rounds.size(); ++r) {
    const auto& rec = rounds[r];
    os << r + 1 << ',' << rec.L << ',' << choi_distance(rec.estimator, E_true, ch.din) << ','
       << rec.step_distance << ',' << rec.loglik << '\n';
  }
  write_output(g.out, os.str());
  return 0;
}

int cmd_detect_entanglement(const Config& c, const Globals& g) {
  const std::string s = "entanglement";
  c.reject_unknown(keys(s, {"truth", "N", "adaptive", "first", "separable_check"}, true));
  const auto seed = seed_of(c, g);
  RngStream rng(seed, 0x7472757468);
  Mat truth = truth_from_spec(c.str(s + ".truth", "werner:0.5"), 4, rng);
  const long long N = c.integer(s + ".N", 0);
  auto bases = build_six_bases();
  BasisProvider provider = [&](int b) {
    auto p = probabilities(witness_pom(bases[b]), truth);
    if (N <= 0) return p;
    return sample_counts(p, N, rng);
  };
  AdaptiveOptions opt;
  opt.adaptive = c.flag(s + ".adaptive", true);
  opt.first = static_cast<int>(c.integer(s + ".first", 0));
  if (opt.first < 0 || opt.first >= static_cast<int>(bases.size())) throw ConfigError("first must index one of the six bases");
  opt.separable_check = c.flag(s + ".separable_check", false);
  opt.estimator = estimation_config(c, s);
  opt.estimator.seed = seed;
  AdaptiveResult r = adaptive_witness_measure(provider, bases, opt);
  json out;
  out["detected"] = r.detected;
  out["bases_used"] = r.bases_used;
  out["order"] = r.order;
  out["margins"] = r.margins;
  out["separable_certificate"] = r.separable_certificate;
  if (r.final_estimator) out["final_estimator"] = matrix_to_json(*r.final_estimator);
  out["seed"] = seed;
  write_output(g.out, out.dump(2) + "\n");
  return 0;
}

int cmd_witness_scan(const Config& c, const Globals& g) {
  const std::string s = "witness";
  c.reject_unknown(keys(s, {"variant", "rows"}));
  const int variant = static_cast<int>(c.integer(s + ".variant", 7));
  if (variant < 0 || variant >= v_list_count()) throw ConfigError("variant out of range");
  const bool rows = c.flag(s + ".rows", true);
  IcCensus cen = enumerate_ic_sets(v_list(variant), g.threads, rows);
  const auto settings = all_settings();
  std::ostringstream os;
  os << std::setprecision(12);
  if (rows) {
    os << "index,settings,rank,singular_values\n";
    for (size_t i = 0; i < cen.rows.size(); ++i) {
      const auto& r = cen.rows[i];
      os << i << ',';
      for (int k = 0; k < 6; ++k) {
        const auto& st = settings[r.settings[k]];
        os << (k ? " " : "") << st.u1 << st.u2 << st.a;
      }
      os << ',' << r.rank << ',';
      for (size_t k = 0; k < r.singular_values.size(); ++k) os << (k ? " " : "") << r.singular_values[k];
      os << '\n';
    }
  }
  write_output(g.out, os.str());
  std::cerr << "candidates=" << cen.candidates << " ic=" << cen.ic_count << " classes=" << cen.classes << '\n';
  return 0;
}

int cmd_cv(const Config& c, const Globals& g) {
  const std::string s = "cv";
  c.reject_unknown(keys(s, {"state", "param", "dsub", "depth", "radius", "points", "tau_points", "pom", "pom_dsub"}));
  const int d = static_cast<int>(c.integer(s + ".dsub", 12));
  if (d < 1) throw ConfigError("dsub must be positive");
  const std::string kind = c.str(s + ".state", "vacuum");
  Mat rho = reference_state(kind, c.num(s + ".param", 0.0), d);
  json out;
  out["state"] = kind;
  out["dsub"] = d;
  out["w00"] = wigner_fock(rho, 0.0, 0.0);
  out["parity_w00"] = 2.0 * (rho * parity_operator(d)).trace().real();
  if (c.flag(s + ".depth", true)) {
    DepthGrid grid;
    grid.radius = c.num(s + ".radius", grid.radius);
    grid.points = static_cast<int>(c.integer(s + ".points", grid.points));
    grid.tau_points = static_cast<int>(c.integer(s + ".tau_points", grid.tau_points));
    DepthResult dr = nonclassicality_depth(rho, grid);
    out["depth"] = {{"tau", dr.tau}, {"half_width", dr.half_width}};
  }
  const std::string pk = c.str(s + ".pom", "none");
  if (pk != "none") {
    const int pd = static_cast<int>(c.integer(s + ".pom_dsub", d));
    Pom p;
    if (pk == "homodyne") p = homodyne_pom(pd, default_homodyne_settings());
    else if (pk == "sh") p = sh_pom(pd);
    else throw ConfigError("unknown cv pom: " + pk);
    int rank = gram_matrix(p).rank;
    out["pom"] = {{"kind", pk}, {"dsub", pd}, {"outcomes", p.size()}, {"gram_rank", rank},
                  {"ic", rank == pd * pd}};
  }
  write_output(g.out, out.dump(2) + "\n");
  return 0;
}

int cmd_benchmark(const Config& c, const Globals& g) {
  const std::string s = "benchmark";
  c.reject_unknown(keys(s, {"pom", "truth", "N", "runs", "timing"}, true));
  ExperimentSpec spec;
  spec.pom = pom_from_id(c.str(s + ".pom", "tetrahedron"));
  spec.seed = seed_of(c, g);
  RngStream rng(spec.seed, 0x7472757468);
  spec.truth = truth_from_spec(c.str(s + ".truth", "random:2"), spec.pom.dim, rng);
  spec.estimator = c.str(s + ".estimator", "ml_dg");
  spec.config = estimation_config(c, s);
  spec.N = c.integer(s + ".N", 1000);
  spec.runs = static_cast<int>(c.integer(s + ".runs", 10));
  spec.threads = g.threads;
  spec.include_timing = c.flag(s + ".timing", true);
  static const std::set<std::string> ids{"ml_dg", "ml_cg", "mlme_a", "mlme_b", "mlme_new", "hml", "ml_imperfect", "li"};
  if (!ids.count(spec.estimator)) throw ConfigError("unknown estimator id: " + spec.estimator);
  BatchResult b = run_batch(spec);
  write_output(g.out, batch_csv(b));
  std::cerr << "mean_distance=" << b.mean_distance << " failures=" << b.failures << '\n';
  return b.failures == spec.runs ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum tomography toolkit"};
  Globals g;
  app.add_option("--config", g.config, "Config file (key = value with [sections])");
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed overriding the config");
  app.add_option("--out", g.out, "Output path, '-' for stdout");
  app.add_option("--threads", g.threads, "Worker cap")->check(CLI::PositiveNumber);
  app.require_subcommand(1, 1);
  using Cmd = int (*)(const Config&, const Globals&);
  std::vector<std::pair<CLI::App*, Cmd>> cmds = {
      {app.add_subcommand("estimate-state", "Single-state estimation"), cmd_estimate_state},
      {app.add_subcommand("estimate-process", "Process tomography rounds"), cmd_estimate_process},
      {app.add_subcommand("detect-entanglement", "Adaptive witness measurement"), cmd_detect_entanglement},
      {app.add_subcommand("witness-scan", "Census of six-setting witness sets"), cmd_witness_scan},
      {app.add_subcommand("cv", "Continuous-variable diagnostics"), cmd_cv},
      {app.add_subcommand("benchmark", "Monte Carlo batch to CSV"), cmd_benchmark},
  };
  for (auto& [sub, fn] : cmds) sub->fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  g.seed_set = seed_opt->count() > 0;
  try {
    Config cfg = g.config.empty() ? Config{} : Config::load(g.config);
    for (auto& [sub, fn] : cmds)
      if (sub->parsed()) return fn(cfg, g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
