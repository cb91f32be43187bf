#include "sdmd/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdmd/coef.hpp"
#include "sdmd/core.hpp"
#include "sdmd/dictlearn.hpp"
#include "sdmd/errors.hpp"
#include "sdmd/threads.hpp"

namespace sdmd {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json base_report(const ExperimentConfig& cfg, const std::string& command) {
  json rep;
  rep["format"] = "sdmd-report/1";
  rep["command"] = command;
  rep["experiment"] = cfg.experiment;
  rep["seed"] = cfg.seed;
  rep["config"] = cfg.raw;
  rep["invariant_preflight"] = "pass";
  rep["outputs"] = json::object();
  rep["notes"] = json::array();
  return rep;
}

void note(json& rep, const std::string& text) { rep["notes"].push_back(text); }

void add_output(json& rep, const fs::path& dir, const std::string& name) {
  rep["outputs"][name] = git_blob_hash_file(dir / name);
}

// Wall clock goes only into the report, never into a CSV, so that result
// files are byte-stable across reruns.
json finish_report(json rep, const fs::path& dir, Clock::time_point start) {
  rep["wall_clock_s"] = std::chrono::duration<double>(Clock::now() - start).count();
  write_json_file(dir / "report.json", rep);
  return rep;
}

fs::path prepare(const ExperimentConfig& cfg) {
  if (cfg.threads > 0) set_thread_count(cfg.threads);
  run_invariant_preflight();
  fs::path dir(cfg.output);
  fs::create_directories(dir);
  return dir;
}

SnapshotEnsemble obtain_data(const ExperimentConfig& cfg, json& rep) {
  if (!cfg.data_dir.empty()) {
    note(rep, "data imported from " + cfg.data_dir);
    return import_ensemble(fs::path(cfg.data_dir));
  }
  return generate_ensemble(cfg.model, cfg.sampler, cfg.evolve, cfg.seed);
}

double model_param(const SdeModel& model, const std::string& key) {
  if (!model.params.contains(key))
    throw ConfigError("model '" + model.name + "' has no parameter '" + key + "'");
  return model.params.at(key).get<double>();
}

// Generator-based methods need drift/diffusion evaluators; either the analytic
// model provides them or they come from a coefficient fit on the data.
SdeModel effective_model(const ExperimentConfig& cfg, const SnapshotEnsemble& ens, json& rep,
                         const fs::path& dir) {
  if (cfg.coefficients == "estimated") {
    auto est = CoefficientEstimate::fit(ens, cfg.coef);
    write_json_file(dir / "coefficients.json", est.to_json());
    add_output(rep, dir, "coefficients.json");
    rep["coefficients"] = est.metadata();
    return est.as_model();
  }
  return cfg.model;
}

void require_drift(const SdeModel& model, const std::string& method) {
  if (!model.drift)
    throw ConfigError("method '" + method +
                      "' needs drift/diffusion coefficients, which model '" + model.name +
                      "' does not provide autonomously; set \"coefficients\": \"estimated\"");
}

bool is_dl_method(const std::string& method) { return method.size() > 3 && method.ends_with("-dl"); }

struct MethodRun {
  std::string method;
  SpectralResult spec;
  KoopmanApproximation op;
  DictionaryPtr dict;
  std::optional<TrainResult> trained;
};

// gamma_override >= 0 pins the ridge (compare runs share one resolved value
// across the fixed methods); otherwise cfg.gamma applies.
MethodRun run_method(const std::string& method, const ExperimentConfig& cfg,
                     const SnapshotEnsemble& ens, const SdeModel& model, double gamma_override,
                     const Mat* score_points, const Vec* score_reference) {
  MethodRun run;
  run.method = method;
  const double gamma = gamma_override >= 0.0 ? gamma_override : cfg.gamma;

  if (is_dl_method(method)) {
    TrainConfig tc = cfg.train;
    tc.method = parse_dl_method(method);
    if (gamma_override >= 0.0) tc.gamma = gamma_override;
    if (tc.method != DlMethod::EdmdDl) require_drift(model, method);
    run.trained = train(ens, model, tc, score_points, score_reference);
    run.spec = run.trained->spectrum;
    run.op = run.trained->op;
    run.dict = run.trained->dict;
    return run;
  }

  if (cfg.dictionary.is_null())
    throw ConfigError("method '" + method + "' needs a dictionary block");
  run.dict = make_dictionary(cfg.dictionary, ens.dim());
  const CMat psi_x = evaluate_dictionary(*run.dict, ens.x);
  if (method == "sdmd") {
    require_drift(model, method);
    const CMat psi_p = generator_matrix(*run.dict, model, ens.x);
    GramPair gp = make_gram(psi_x, psi_p, ens.delta_t, gamma);
    run.op = sdmd_operator(gp);
    run.spec = spectrum(gp);
  } else if (method == "edmd") {
    const CMat psi_y = evaluate_dictionary(*run.dict, ens.y);
    run.op = edmd_operator(psi_x, psi_y, ens.delta_t, gamma);
    const CMat g = normalized_gram(psi_x);
    run.spec = operator_spectrum(run.op, &g);
  } else if (method == "gedmd") {
    require_drift(model, method);
    const CMat psi_p = generator_matrix(*run.dict, model, ens.x);
    run.op = gedmd_operator(psi_x, psi_p, gamma);
    run.op.delta_t = ens.delta_t;
    const CMat g = normalized_gram(psi_x);
    run.spec = operator_spectrum(run.op, &g);
  } else {
    throw ConfigError("unknown method '" + method +
                      "'; expected sdmd, edmd, gedmd, sdmd-dl, edmd-dl or gedmd-dl");
  }
  return run;
}

std::string mode_label(const ModeIndex& m) {
  return "(" + std::to_string(m.l) + "," + std::to_string(m.n) + ")";
}

// One row per requested reference mode, in the order they were configured.
// Matching is greedy nearest-estimate, easiest reference first.
json write_matching_csv(const std::vector<ModeIndex>& modes, const std::vector<Cplx>& refs,
                        const SpectralResult& spec, const fs::path& dir,
                        const std::string& name) {
  const ModeMatch match = match_modes(spec.lambda, refs);
  std::vector<int> est_of(refs.size(), -1);
  for (const auto& p : match.pairs) est_of[static_cast<std::size_t>(p.ref_index)] = p.est_index;

  std::ostringstream os;
  os << "l,n,ref_re,ref_im,est_re,est_im,abs_err\n";
  json summary = json::array();
  double max_err = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    os << modes[i].l << ',' << modes[i].n << ',' << format_g17(refs[i].real()) << ','
       << format_g17(refs[i].imag());
    json row = {{"mode", mode_label(modes[i])},
                {"ref", {refs[i].real(), refs[i].imag()}}};
    if (est_of[i] >= 0) {
      const Cplx est = spec.lambda[static_cast<std::size_t>(est_of[i])];
      const double err = std::abs(est - refs[i]);
      os << ',' << format_g17(est.real()) << ',' << format_g17(est.imag()) << ','
         << format_g17(err) << '\n';
      row["est"] = {est.real(), est.imag()};
      row["abs_err"] = err;
      max_err = std::max(max_err, err);
    } else {
      os << ",nan,nan,nan\n";
      row["est"] = nullptr;
    }
    summary.push_back(std::move(row));
  }
  atomic_write_file(dir / name, os.str());
  return json{{"per_mode", summary},
              {"max_abs_err", max_err},
              {"unmatched", match.unmatched_refs.size()}};
}

// Leading eigenfunctions sampled on a regular lattice, for heatmap plots.
// Rows iterate y within x; columns: x, y, then re/im per mode.
void export_eigenfunction_grid(const Dictionary& dict, const SpectralResult& spec,
                               const json& grid, const fs::path& dir, const std::string& name) {
  const int nx = grid.value("nx", 100);
  const int ny = grid.value("ny", 100);
  if (nx < 2 || ny < 2) throw ConfigError("eigenfunction_grid: nx and ny must be >= 2");
  Mat bounds(2, 2);
  if (grid.contains("bounds")) {
    const auto& b = grid.at("bounds");
    if (!b.is_array() || b.size() != 2) throw ConfigError("eigenfunction_grid: bounds must be 2x2");
    for (int a = 0; a < 2; ++a)
      for (int s = 0; s < 2; ++s) bounds(a, s) = b.at(a).at(s).get<double>();
  } else {
    throw ConfigError("eigenfunction_grid: bounds required");
  }

  const int n_modes = std::min<int>(6, static_cast<int>(spec.mu.size()));
  Mat pts(static_cast<std::int64_t>(nx) * ny, 2);
  std::int64_t r = 0;
  for (int i = 0; i < nx; ++i) {
    const double x = bounds(0, 0) + (bounds(0, 1) - bounds(0, 0)) * i / (nx - 1);
    for (int j = 0; j < ny; ++j, ++r) {
      pts(r, 0) = x;
      pts(r, 1) = bounds(1, 0) + (bounds(1, 1) - bounds(1, 0)) * j / (ny - 1);
    }
  }

  Mat table(pts.rows(), 2 + 2 * n_modes);
  table.leftCols(2) = pts;
  std::vector<std::string> headers = {"x", "y"};
  for (int k = 0; k < n_modes; ++k) {
    const CVec phi = koopman_eigenfunction_eval(dict, spec.coeffs.col(k), pts);
    table.col(2 + 2 * k) = phi.real();
    table.col(3 + 2 * k) = phi.imag();
    headers.push_back("mode" + std::to_string(k) + "_re");
    headers.push_back("mode" + std::to_string(k) + "_im");
  }
  write_matrix_csv(dir / name, headers, table);
}

json eigenvalue_digest(const SpectralResult& spec, int count = 10) {
  json out = json::array();
  const int n = std::min<int>(count, static_cast<int>(spec.mu.size()));
  for (int i = 0; i < n; ++i)
    out.push_back({{"mu", {spec.mu[i].real(), spec.mu[i].imag()}},
                   {"lambda", {spec.lambda[i].real(), spec.lambda[i].imag()}}});
  return out;
}

double ls_slope(const std::vector<double>& logx, const std::vector<double>& logy) {
  const std::size_t n = logx.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += logx[i];
    my += logy[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (logx[i] - mx) * (logx[i] - mx);
    sxy += (logx[i] - mx) * (logy[i] - my);
  }
  return sxy / sxx;
}

void require_ou(const ExperimentConfig& cfg, const std::string& who) {
  if (cfg.model.name != "ou")
    throw ConfigError(who + " requires the ou model (closed-form moments)");
  if (cfg.dictionary.is_null() || cfg.dictionary.value("family", "") != "monomial")
    throw ConfigError(who + " requires a monomial dictionary");
}

// ---------------------------------------------------------------------------
// convergence-m: empirical Gram error against exact uniform moments.

json convergence_m(const ExperimentConfig& cfg, const fs::path& dir, json& rep) {
  require_ou(cfg, "convergence-m");
  if (cfg.sampler.kind != SamplerSpec::Kind::UniformRandom)
    throw ConfigError("convergence-m requires the uniform-random sampler");
  if (!cfg.sweep.contains("m_values")) throw ConfigError("convergence-m: sweep.m_values required");
  const auto m_values = cfg.sweep.at("m_values").get<std::vector<std::int64_t>>();
  const int trials = cfg.sweep.value("trials", 50);
  if (m_values.empty() || trials < 1)
    throw ConfigError("convergence-m: need at least one m value and one trial");

  const double theta = model_param(cfg.model, "theta");
  const double mu0 = model_param(cfg.model, "mu0");
  const double sigma = model_param(cfg.model, "sigma");
  const double lo = cfg.sampler.bounds(0, 0);
  const double hi = cfg.sampler.bounds(0, 1);
  // E[x^p] under Uniform(lo, hi); p = -1 contributes only with factor zero.
  auto mom = [&](int p) -> double {
    if (p < 0) return 0.0;
    return (std::pow(hi, p + 1) - std::pow(lo, p + 1)) / ((hi - lo) * (p + 1));
  };

  const auto dict = make_dictionary(cfg.dictionary, 1);
  const int n = dict->size();
  Mat g_exact(n, n), h_exact(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      g_exact(j, k) = mom(j + k);
      // A x^k = theta mu0 k x^{k-1} - theta k x^k + (sigma^2/2) k (k-1) x^{k-2}
      h_exact(j, k) = theta * mu0 * k * mom(j + k - 1) - theta * k * mom(j + k) +
                      0.5 * sigma * sigma * k * (k - 1) * mom(j + k - 2);
    }
  }

  // The oracle operator uses the exact moment Grams with one fixed ridge;
  // the empirical operators reuse that ridge so the error measures sampling
  // alone.
  const double gamma_ref =
      cfg.gamma >= 0.0 ? cfg.gamma : default_gamma(g_exact.cast<Cplx>());
  GramPair gp_ref;
  gp_ref.g = g_exact.cast<Cplx>();
  gp_ref.h = h_exact.cast<Cplx>();
  gp_ref.m = 1;
  gp_ref.gamma = gamma_ref;
  gp_ref.delta_t = cfg.evolve.delta_t;
  const CMat k_ref = sdmd_operator(gp_ref).k;

  std::ostringstream os;
  os << "m,trial,g_err,h_err,k_err\n";
  json summary = json::array();
  std::vector<double> mean_g(m_values.size(), 0.0), mean_h(m_values.size(), 0.0),
      mean_k(m_values.size(), 0.0);
  for (std::size_t a = 0; a < m_values.size(); ++a) {
    SamplerSpec sampler = cfg.sampler;
    sampler.count = m_values[a];
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t seed =
          derive_seed(cfg.seed, 0x636D0000ull + (static_cast<std::uint64_t>(a) << 10) +
                                    static_cast<std::uint64_t>(t));
      const Mat x = initial_states(sampler, seed);
      const CMat psi = evaluate_dictionary(*dict, x);
      const CMat psi_p = generator_matrix(*dict, cfg.model, x);
      GramPair gp;
      gp.g = normalized_gram(psi);
      gp.h = normalized_cross(psi, psi_p);
      gp.m = m_values[a];
      gp.gamma = gamma_ref;
      gp.delta_t = cfg.evolve.delta_t;
      const double g_err = (gp.g - gp_ref.g).norm();
      const double h_err = (gp.h - gp_ref.h).norm();
      const double k_err = (sdmd_operator(gp).k - k_ref).norm();
      mean_g[a] += g_err;
      mean_h[a] += h_err;
      mean_k[a] += k_err;
      os << m_values[a] << ',' << t << ',' << format_g17(g_err) << ',' << format_g17(h_err)
         << ',' << format_g17(k_err) << '\n';
    }
    mean_g[a] /= trials;
    mean_h[a] /= trials;
    mean_k[a] /= trials;
    summary.push_back({{"m", m_values[a]},
                       {"mean_g_err", mean_g[a]},
                       {"mean_h_err", mean_h[a]},
                       {"mean_k_err", mean_k[a]}});
  }
  atomic_write_file(dir / "convergence_m.csv", os.str());
  add_output(rep, dir, "convergence_m.csv");

  json ratios = json::array();
  for (std::size_t a = 0; a + 1 < m_values.size(); ++a)
    ratios.push_back({{"m_from", m_values[a]},
                      {"m_to", m_values[a + 1]},
                      {"factor", static_cast<double>(m_values[a + 1]) / m_values[a]},
                      {"g_ratio", mean_g[a + 1] / mean_g[a]},
                      {"h_ratio", mean_h[a + 1] / mean_h[a]},
                      {"k_ratio", mean_k[a + 1] / mean_k[a]}});
  rep["summary"] = summary;
  rep["ratios"] = ratios;
  rep["trials"] = trials;
  rep["gamma"] = gamma_ref;
  return rep;
}

// ---------------------------------------------------------------------------
// convergence-dt: Taylor truncation error of the exact conditional moment
// E[x_t^2 | x], which is available in closed form for the OU process.

json convergence_dt(const ExperimentConfig& cfg, const fs::path& dir, json& rep) {
  require_ou(cfg, "convergence-dt");
  if (!cfg.sweep.contains("dt_values")) throw ConfigError("convergence-dt: sweep.dt_values required");
  const auto dts = cfg.sweep.at("dt_values").get<std::vector<double>>();
  if (dts.size() < 2) throw ConfigError("convergence-dt: need at least two dt values");
  if (cfg.dictionary.value("max_degree", 0) < 2)
    throw ConfigError("convergence-dt: monomial max_degree must be >= 2 (observable is x^2)");

  const double theta = model_param(cfg.model, "theta");
  const double mu0 = model_param(cfg.model, "mu0");
  const double sigma = model_param(cfg.model, "sigma");
  const auto dict = make_dictionary(cfg.dictionary, 1);
  const int idx = 2;  // graded order on R: 1, x, x^2

  const Mat x = initial_states(cfg.sampler, cfg.seed);
  const std::int64_t m = x.rows();
  Vec a1(m), a2(m);
  for (std::int64_t i = 0; i < m; ++i) {
    a1(i) = generator_action(*dict, cfg.model, x.row(i).transpose())(idx).real();
    a2(i) = generator_action_second(*dict, cfg.model, x.row(i).transpose())(idx).real();
  }

  std::ostringstream os;
  os << "delta_t,residual1,residual2\n";
  std::vector<double> logdt, logr1, logr2;
  json rows = json::array();
  for (double dt : dts) {
    double r1 = 0.0, r2 = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double xi = x(i, 0);
      const double mt = mu0 + (xi - mu0) * std::exp(-theta * dt);
      const double vt = sigma * sigma * (1.0 - std::exp(-2.0 * theta * dt)) / (2.0 * theta);
      const double exact = mt * mt + vt;
      const double t1 = xi * xi + dt * a1(i);
      const double t2 = t1 + 0.5 * dt * dt * a2(i);
      r1 += std::abs(exact - t1);
      r2 += std::abs(exact - t2);
    }
    r1 /= static_cast<double>(m);
    r2 /= static_cast<double>(m);
    os << format_g17(dt) << ',' << format_g17(r1) << ',' << format_g17(r2) << '\n';
    logdt.push_back(std::log(dt));
    logr1.push_back(std::log(r1));
    logr2.push_back(std::log(r2));
    rows.push_back({{"delta_t", dt}, {"residual1", r1}, {"residual2", r2}});
  }
  atomic_write_file(dir / "convergence_dt.csv", os.str());
  add_output(rep, dir, "convergence_dt.csv");
  rep["rows"] = rows;
  rep["slope_first_order"] = ls_slope(logdt, logr1);
  rep["slope_second_order"] = ls_slope(logdt, logr2);
  return rep;
}

// ---------------------------------------------------------------------------
// convergence-N: leading nontrivial eigenvalue error as the dictionary grows.

// With analytic coefficients the first OU eigenfunction lies in every
// monomial dictionary, so only conditioning noise would remain (and grow).
// The sweep therefore defaults to the data-driven semigroup estimate, whose
// finite-difference bias gives a meaningful, dictionary-stable error floor.
json convergence_n(const ExperimentConfig& cfg, const fs::path& dir, json& rep) {
  require_ou(cfg, "convergence-N");
  if (!cfg.sweep.contains("degrees")) throw ConfigError("convergence-N: sweep.degrees required");
  const auto degrees = cfg.sweep.at("degrees").get<std::vector<int>>();
  if (degrees.empty()) throw ConfigError("convergence-N: sweep.degrees is empty");
  const int trials = cfg.sweep.value("trials", 8);
  if (trials < 1) throw ConfigError("convergence-N: trials must be >= 1");
  if (cfg.method != "sdmd" && cfg.method != "edmd")
    throw ConfigError("convergence-N supports the sdmd and edmd methods");

  const std::vector<Cplx> ref = analytic_generator_eigs(cfg.model, {{0, 1}});

  std::ostringstream os;
  os << "degree,n_basis,trial,lambda1_re,lambda1_im,abs_err\n";
  json rows = json::array();
  std::vector<double> errs;
  for (std::size_t a = 0; a < degrees.size(); ++a) {
    json spec_json = cfg.dictionary;
    spec_json["max_degree"] = degrees[a];
    const auto dict = make_dictionary(spec_json, 1);
    double mean_err = 0.0;
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t seed =
          derive_seed(cfg.seed, 0x634E0000ull + (static_cast<std::uint64_t>(a) << 10) +
                                    static_cast<std::uint64_t>(t));
      const SnapshotEnsemble ens = generate_ensemble(cfg.model, cfg.sampler, cfg.evolve, seed);
      const CMat psi = evaluate_dictionary(*dict, ens.x);
      SpectralResult res;
      if (cfg.method == "sdmd") {
        const CMat psi_p = generator_matrix(*dict, cfg.model, ens.x);
        res = spectrum(make_gram(psi, psi_p, ens.delta_t, cfg.gamma));
      } else {
        const CMat psi_y = evaluate_dictionary(*dict, ens.y);
        const KoopmanApproximation op = edmd_operator(psi, psi_y, ens.delta_t, cfg.gamma);
        const CMat g = normalized_gram(psi);
        res = operator_spectrum(op, &g);
      }
      const ModeMatch match = match_modes(res.lambda, ref);
      const Cplx est = res.lambda[static_cast<std::size_t>(match.pairs.at(0).est_index)];
      mean_err += match.pairs.at(0).abs_error;
      os << degrees[a] << ',' << dict->size() << ',' << t << ',' << format_g17(est.real())
         << ',' << format_g17(est.imag()) << ',' << format_g17(match.pairs.at(0).abs_error)
         << '\n';
    }
    mean_err /= trials;
    errs.push_back(mean_err);
    rows.push_back({{"degree", degrees[a]}, {"mean_abs_err", mean_err}});
  }
  atomic_write_file(dir / "convergence_N.csv", os.str());
  add_output(rep, dir, "convergence_N.csv");

  bool nonincreasing = true;
  for (std::size_t i = 0; i + 1 < errs.size(); ++i)
    if (errs[i + 1] > 1.2 * errs[i]) nonincreasing = false;
  rep["rows"] = rows;
  rep["trials"] = trials;
  rep["method"] = cfg.method;
  rep["nonincreasing_within_jitter"] = nonincreasing;
  return rep;
}

Vec snapshot_times(const SnapshotEnsemble& ens) {
  Vec t(ens.size());
  for (std::int64_t i = 0; i < ens.size(); ++i) t(i) = ens.delta_t * static_cast<double>(i);
  return t;
}

}  // namespace

json run_simulate(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  const fs::path dir = prepare(cfg);
  json rep = base_report(cfg, "simulate");

  const SnapshotEnsemble ens = generate_ensemble(cfg.model, cfg.sampler, cfg.evolve, cfg.seed);
  export_ensemble(ens, dir);
  add_output(rep, dir, "ensemble_x.csv");
  add_output(rep, dir, "ensemble_y.csv");
  if (ens.latent_input) add_output(rep, dir, "ensemble_input.csv");
  add_output(rep, dir, "ensemble.json");
  rep["n_pairs"] = ens.size();
  rep["dim"] = ens.dim();
  rep["delta_t"] = ens.delta_t;
  return finish_report(std::move(rep), dir, start);
}

json run_spectrum(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  const fs::path dir = prepare(cfg);
  json rep = base_report(cfg, "spectrum");

  const SnapshotEnsemble ens = obtain_data(cfg, rep);
  if (cfg.data_dir.empty()) {
    export_ensemble(ens, dir);
    add_output(rep, dir, "ensemble_x.csv");
    add_output(rep, dir, "ensemble_y.csv");
    add_output(rep, dir, "ensemble.json");
  }
  const SdeModel model = effective_model(cfg, ens, rep, dir);

  const MethodRun run = run_method(cfg.method, cfg, ens, model, -1.0, nullptr, nullptr);
  export_spectral_csv(run.spec, dir, "spectrum");
  add_output(rep, dir, "spectrum_eigenvalues.csv");
  add_output(rep, dir, "spectrum_eigenvectors.csv");
  if (run.trained) {
    write_train_trace_csv(run.trained->trace, dir / "train_trace.csv");
    add_output(rep, dir, "train_trace.csv");
    write_json_file(dir / "dictionary.json", run.trained->dict->to_json());
    add_output(rep, dir, "dictionary.json");
  }

  rep["method"] = cfg.method;
  rep["gamma"] = run.spec.gamma;
  rep["n_modes"] = run.spec.mu.size();
  rep["eigenvalues"] = eigenvalue_digest(run.spec);

  if (!cfg.reference_modes.empty()) {
    try {
      const auto refs = analytic_generator_eigs(cfg.model, cfg.reference_modes);
      rep["matching"] =
          write_matching_csv(cfg.reference_modes, refs, run.spec, dir, "matched_modes.csv");
      add_output(rep, dir, "matched_modes.csv");
    } catch (const NotAvailableError& e) {
      note(rep, std::string("reference modes skipped: ") + e.what());
    }
  }

  if (!cfg.eigenfunction_grid.is_null()) {
    if (ens.dim() != 2) {
      note(rep, "eigenfunction_grid skipped: only 2-d state spaces are plotted");
    } else {
      const Dictionary& d =
          run.trained ? static_cast<const Dictionary&>(*run.trained->dict) : *run.dict;
      export_eigenfunction_grid(d, run.spec, cfg.eigenfunction_grid, dir, "eigenfunctions.csv");
      add_output(rep, dir, "eigenfunctions.csv");
    }
  }
  return finish_report(std::move(rep), dir, start);
}

json run_convergence(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  const fs::path dir = prepare(cfg);
  json rep = base_report(cfg, "convergence");
  if (cfg.experiment == "convergence-m")
    rep = convergence_m(cfg, dir, rep);
  else if (cfg.experiment == "convergence-dt")
    rep = convergence_dt(cfg, dir, rep);
  else if (cfg.experiment == "convergence-N")
    rep = convergence_n(cfg, dir, rep);
  else
    throw ConfigError("convergence needs experiment convergence-m, convergence-dt or convergence-N");
  return finish_report(std::move(rep), dir, start);
}

json run_compare(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  const fs::path dir = prepare(cfg);
  json rep = base_report(cfg, "compare");
  if (cfg.methods.size() < 2) throw ConfigError("compare needs at least two methods");

  const SnapshotEnsemble ens = obtain_data(cfg, rep);
  const SdeModel model = effective_model(cfg, ens, rep, dir);

  // Fixed-dictionary methods share one resolved ridge so their operators obey
  // the exact semigroup/generator identity; the learned-dictionary methods
  // resolve theirs from the network Gram instead.
  double fixed_gamma = cfg.gamma;
  const bool any_fixed =
      std::any_of(cfg.methods.begin(), cfg.methods.end(), [](const std::string& m) {
        return !is_dl_method(m);
      });
  if (any_fixed && fixed_gamma < 0.0) {
    if (cfg.dictionary.is_null()) throw ConfigError("compare with fixed methods needs a dictionary");
    const auto dict = make_dictionary(cfg.dictionary, ens.dim());
    fixed_gamma = default_gamma(normalized_gram(evaluate_dictionary(*dict, ens.x)));
    note(rep, "shared gamma resolved from the fixed dictionary Gram");
  }

  const bool score = ens.latent_input.has_value();
  const Mat* spts = score ? &ens.x : nullptr;
  const Vec* sref = score ? &*ens.latent_input : nullptr;

  std::vector<MethodRun> runs;
  json per_method = json::array();
  for (const auto& method : cfg.methods) {
    const double g = is_dl_method(method) ? cfg.gamma : fixed_gamma;
    MethodRun run = run_method(method, cfg, ens, model, g, is_dl_method(method) ? spts : nullptr,
                               is_dl_method(method) ? sref : nullptr);
    const std::string stem = "spectrum_" + method;
    export_spectral_csv(run.spec, dir, stem);
    add_output(rep, dir, stem + "_eigenvalues.csv");
    add_output(rep, dir, stem + "_eigenvectors.csv");
    json entry = {{"method", method},
                  {"gamma", run.spec.gamma},
                  {"n_modes", run.spec.mu.size()},
                  {"eigenvalues", eigenvalue_digest(run.spec, 6)}};
    if (run.trained) {
      write_train_trace_csv(run.trained->trace, dir / ("trace_" + method + ".csv"));
      add_output(rep, dir, "trace_" + method + ".csv");
      if (run.trained->trace.selected_epoch >= 0) {
        entry["selected_epoch"] = run.trained->trace.selected_epoch;
        entry["selected_score"] = run.trained->trace.selected_score;
      }
    }
    per_method.push_back(std::move(entry));
    runs.push_back(std::move(run));
  }
  rep["methods"] = per_method;

  // Aligned eigenvalue table: analytic references when available, otherwise
  // the first method's leading modes serve as the anchor.
  std::vector<Cplx> refs;
  std::vector<std::string> ref_cols;
  if (!cfg.reference_modes.empty()) {
    try {
      refs = analytic_generator_eigs(cfg.model, cfg.reference_modes);
      for (const auto& m : cfg.reference_modes) ref_cols.push_back(mode_label(m));
    } catch (const NotAvailableError& e) {
      note(rep, std::string("analytic references unavailable: ") + e.what());
    }
  }
  if (refs.empty()) {
    const auto& anchor = runs.front().spec.lambda;
    const std::size_t n = std::min<std::size_t>(10, anchor.size());
    refs.assign(anchor.begin(), anchor.begin() + static_cast<std::ptrdiff_t>(n));
    note(rep, "eigenvalue table anchored to method '" + runs.front().method + "'");
  }

  std::ostringstream os;
  os << "ref_re,ref_im";
  for (const auto& r : runs) os << ',' << r.method << "_re," << r.method << "_im," << r.method << "_err";
  os << '\n';
  std::vector<std::vector<int>> est_of(runs.size(), std::vector<int>(refs.size(), -1));
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const ModeMatch match = match_modes(runs[k].spec.lambda, refs);
    for (const auto& p : match.pairs) est_of[k][static_cast<std::size_t>(p.ref_index)] = p.est_index;
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    os << format_g17(refs[i].real()) << ',' << format_g17(refs[i].imag());
    for (std::size_t k = 0; k < runs.size(); ++k) {
      if (est_of[k][i] >= 0) {
        const Cplx est = runs[k].spec.lambda[static_cast<std::size_t>(est_of[k][i])];
        os << ',' << format_g17(est.real()) << ',' << format_g17(est.imag()) << ','
           << format_g17(std::abs(est - refs[i]));
      } else {
        os << ",nan,nan,nan";
      }
    }
    os << '\n';
  }
  atomic_write_file(dir / "compare_eigenvalues.csv", os.str());
  add_output(rep, dir, "compare_eigenvalues.csv");

  const auto find_run = [&](const std::string& m) -> const MethodRun* {
    for (const auto& r : runs)
      if (r.method == m) return &r;
    return nullptr;
  };
  const MethodRun* sd = find_run("sdmd");
  const MethodRun* ge = find_run("gedmd");
  if (sd && ge) {
    const CMat expected =
        CMat::Identity(ge->op.k.rows(), ge->op.k.cols()) + Cplx(ens.delta_t, 0.0) * ge->op.k;
    rep["semigroup_generator_identity_gap"] = (sd->op.k - expected).cwiseAbs().maxCoeff();
  }

  if (score) {
    std::ostringstream ss;
    ss << "method,selected_epoch,selected_score,final_score\n";
    for (const auto& r : runs) {
      if (!r.trained) continue;
      const auto& tr = r.trained->trace;
      ss << r.method << ',' << tr.selected_epoch << ',' << format_g17(tr.selected_score) << ','
         << format_g17(tr.epochs.empty() ? kNaN : tr.epochs.back().score) << '\n';
    }
    atomic_write_file(dir / "compare_similarity.csv", ss.str());
    add_output(rep, dir, "compare_similarity.csv");
  }
  return finish_report(std::move(rep), dir, start);
}

json run_neuralmass(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  const fs::path dir = prepare(cfg);
  json rep = base_report(cfg, "neuralmass");
  if (!cfg.model.has_input())
    throw ConfigError("neuralmass requires a model with an exogenous input");

  EvolveSpec ev = cfg.evolve;
  ev.n_snapshots = static_cast<int>(std::llround(cfg.duration / ev.delta_t));
  if (ev.n_snapshots < 2) throw ConfigError("neuralmass: duration too short for delta_t");

  SnapshotEnsemble ens;
  if (!cfg.data_dir.empty()) {
    note(rep, "data imported from " + cfg.data_dir);
    ens = import_ensemble(fs::path(cfg.data_dir));
    if (!ens.latent_input) throw ConfigError("neuralmass: imported data has no input series");
  } else {
    ens = generate_ensemble(cfg.model, cfg.sampler, ev, cfg.seed);
  }
  rep["n_pairs"] = ens.size();

  const Vec t = snapshot_times(ens);
  {
    Mat table(ens.size(), 2);
    table.col(0) = t;
    table.col(1) = *ens.latent_input;
    write_matrix_csv(dir / "latent_input.csv", {"t", "input"}, table);
    add_output(rep, dir, "latent_input.csv");
  }

  // The true drift depends on the hidden input, so the autonomous surrogate
  // is always estimated from the data.
  if (cfg.coefficients != "estimated")
    note(rep, "coefficients are estimated regardless of the config: the input-driven drift "
              "has no autonomous form");
  const auto est = CoefficientEstimate::fit(ens, cfg.coef);
  write_json_file(dir / "coefficients.json", est.to_json());
  add_output(rep, dir, "coefficients.json");
  rep["coefficients"] = est.metadata();
  const SdeModel model = est.as_model();

  std::vector<std::string> methods = cfg.methods;
  if (methods.empty()) methods = {"sdmd-dl", "edmd-dl"};
  for (const auto& m : methods)
    if (!is_dl_method(m))
      throw ConfigError("neuralmass methods must be learned-dictionary variants, got '" + m + "'");

  json per_method = json::array();
  std::ostringstream sim;
  sim << "method,selected_epoch,selected_score,final_score\n";
  double sdmd_score = kNaN, edmd_score = kNaN;
  for (const auto& method : methods) {
    TrainConfig tc = cfg.train;
    tc.method = parse_dl_method(method);
    const TrainResult tr = train(ens, model, tc, &ens.x, &*ens.latent_input);

    // Eigenfunction series come from the best-scoring epoch when one exists
    // (the generator losses are non-convex and can drift past their best fit),
    // otherwise from the final state.
    const bool use_selected = tr.selected_dict && tr.selected_spectrum.has_value();
    const NetworkDictionary& d = use_selected ? *tr.selected_dict : *tr.dict;
    const SpectralResult& spec = use_selected ? *tr.selected_spectrum : tr.spectrum;

    Mat series = Mat::Zero(ens.size(), 3);
    series.col(0) = t;
    std::vector<std::string> headers = {"t", "phi2", "phi3"};
    try {
      if (spec.mu.size() > 1) series.col(1) = eigenfunction_series(d, spec, 1, ens.x);
      if (spec.mu.size() > 2) series.col(2) = eigenfunction_series(d, spec, 2, ens.x);
    } catch (const Error& e) {
      note(rep, method + std::string(": degenerate eigenfunction series: ") + e.what());
    }
    std::string tag = method;
    std::replace(tag.begin(), tag.end(), '-', '_');
    write_matrix_csv(dir / ("phi_" + tag + ".csv"), headers, series);
    add_output(rep, dir, "phi_" + tag + ".csv");

    const auto& trace = tr.trace;
    const double final_score = trace.epochs.empty() ? kNaN : trace.epochs.back().score;
    const double best_score = trace.selected_score;
    sim << method << ',' << trace.selected_epoch << ',' << format_g17(best_score) << ','
        << format_g17(final_score) << '\n';
    if (method == "sdmd-dl") {
      sdmd_score = best_score;
      write_train_trace_csv(trace, dir / "trace_sdmd_dl.csv");
      add_output(rep, dir, "trace_sdmd_dl.csv");
    }
    if (method == "edmd-dl") edmd_score = best_score;
    per_method.push_back({{"method", method},
                          {"gamma", trace.gamma},
                          {"selected_epoch", trace.selected_epoch},
                          {"selected_score", best_score},
                          {"final_score", final_score},
                          {"eigenvalues", eigenvalue_digest(spec, 6)}});
  }
  atomic_write_file(dir / "similarity.csv", sim.str());
  add_output(rep, dir, "similarity.csv");

  rep["methods"] = per_method;
  json flags;
  if (std::isfinite(sdmd_score)) flags["similarity_soft_target"] = sdmd_score >= 0.8;
  if (std::isfinite(sdmd_score) && std::isfinite(edmd_score)) {
    flags["sdmd_not_below_edmd"] = sdmd_score >= edmd_score;
    if (sdmd_score < edmd_score)
      note(rep, "similarity ordering flag: sdmd-dl scored below edmd-dl on this run");
  }
  rep["flags"] = flags;
  return finish_report(std::move(rep), dir, start);
}

}  // namespace sdmd
