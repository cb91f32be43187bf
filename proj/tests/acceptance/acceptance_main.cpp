// Acceptance gate: one numbered criterion per invocation, each a frozen
// benchmark configuration with explicit tolerances and a wall-clock budget.
// Prints a single PASS/FAIL line; the exit status mirrors it.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "sdmd/coef.hpp"
#include "sdmd/config.hpp"
#include "sdmd/core.hpp"
#include "sdmd/experiments.hpp"
#include "sdmd/io.hpp"
#include "sdmd/rng.hpp"

using namespace sdmd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? " ok" : " FAILED");
  }
  void info(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

fs::path fresh_dir(const fs::path& base, const std::string& tag) {
  const fs::path dir = base / tag;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json run_preset(const std::string& experiment, const fs::path& out, std::uint64_t seed,
                const json& overrides = json::object()) {
  // parse_config deep-merges the named preset under the user document
  json doc = overrides;
  doc["experiment"] = experiment;
  doc["output"] = out.string();
  doc["seed"] = seed;
  const ExperimentConfig cfg = parse_config(doc);
  if (cfg.experiment == "neural-mass") return run_neuralmass(cfg);
  if (cfg.experiment.rfind("convergence", 0) == 0) return run_convergence(cfg);
  return run_spectrum(cfg);
}

double matched_err(const json& rep, std::size_t i) {
  const auto& row = rep.at("matching").at("per_mode").at(i);
  if (row.at("est").is_null()) return std::numeric_limits<double>::infinity();
  return row.at("abs_err").get<double>();
}

Cplx matched_est(const json& rep, std::size_t i) {
  const auto& e = rep.at("matching").at("per_mode").at(i).at("est");
  return {e.at(0).get<double>(), e.at(1).get<double>()};
}

// 1. OU spectrum from the fixed monomial dictionary with analytic
//    coefficients: the first six generator eigenvalues land on 0..-5.
Outcome criterion1(const fs::path& dir) {
  Outcome out;
  const json rep = run_preset("ou", dir, 1);
  for (int n = 0; n <= 5; ++n) {
    const double tol = n <= 3 ? 0.1 : 0.2;
    const double err = matched_err(rep, static_cast<std::size_t>(n));
    out.require(err <= tol, "|lambda_" + std::to_string(n) + " + " + std::to_string(n) +
                                "| = " + fmt(err) + " <= " + fmt(tol));
  }
  return out;
}

// 2. OU with a learned dictionary (N = 20) on short-burst trajectory data and
//    estimated coefficients: first four eigenvalues within the tabulated spread.
Outcome criterion2(const fs::path& dir) {
  Outcome out;
  const json overrides = {{"method", "sdmd-dl"},
                          {"sampler", {{"count", 10}}},
                          {"evolve", {{"substeps", 1000}, {"n_snapshots", 200}}},
                          {"coefficients", "estimated"}};
  const json rep = run_preset("ou", dir, 4, overrides);
  const double tol[4] = {0.01, 0.25, 0.7, 1.0};
  for (int n = 0; n <= 3; ++n) {
    const double err = matched_err(rep, static_cast<std::size_t>(n));
    out.require(err <= tol[n], "|lambda_" + std::to_string(n + 1) + " - (" +
                                   std::to_string(-n) + ")| = " + fmt(err) +
                                   " <= " + fmt(tol[n]));
  }
  return out;
}

// 3. Stuart-Landau phase ladder: rotation at 0.75 n, decay nonpositive up to
//    tolerance, and n <-> -n conjugate symmetry.
Outcome criterion3(const fs::path& dir) {
  Outcome out;
  const json rep = run_preset("stuart-landau", dir, 1);
  // preset reference order: n = -5..-1, 1..5
  const auto index_of = [](int n) { return static_cast<std::size_t>(n < 0 ? n + 5 : n + 4); };
  double worst_im = 0.0, worst_re = -1.0, worst_conj = 0.0;
  for (int n = 1; n <= 5; ++n) {
    const Cplx ep = matched_est(rep, index_of(n));
    const Cplx em = matched_est(rep, index_of(-n));
    for (const auto& [e, sign] : {std::pair{ep, 1}, std::pair{em, -1}}) {
      worst_im = std::max(worst_im, std::abs(e.imag() - 0.75 * sign * n));
      worst_re = std::max(worst_re, e.real());
    }
    worst_conj = std::max(worst_conj, std::abs(ep - std::conj(em)));
  }
  out.require(worst_im <= 0.1, "max |Im lambda_n - 0.75 n| = " + fmt(worst_im) + " <= 0.1");
  out.require(worst_re <= 0.02, "max Re lambda_n = " + fmt(worst_re) + " <= 0.02");
  out.require(worst_conj <= 1e-6, "conjugate-pair gap = " + fmt(worst_conj) + " <= 1e-6");
  return out;
}

// 4. Triple-well metastability: leading semigroup eigenvalue at 1, two
//    slow real modes, and a second eigenfunction separating the deep wells.
Outcome criterion4(const fs::path& dir) {
  Outcome out;
  const json rep = run_preset("triple-well", dir, 2);
  const auto& eigs = rep.at("eigenvalues");
  const auto mu = [&](int i) {
    return Cplx(eigs.at(i).at("mu").at(0).get<double>(), eigs.at(i).at("mu").at(1).get<double>());
  };
  out.require(std::abs(mu(0) - Cplx(1.0)) <= 1e-3, "|mu_1 - 1| = " + fmt(std::abs(mu(0) - Cplx(1.0))));
  for (int i : {1, 2}) {
    const Cplx m = mu(i);
    out.require(std::abs(m.imag()) <= 0.05,
                "|Im mu_" + std::to_string(i + 1) + "| = " + fmt(std::abs(m.imag())));
    out.require(m.real() > 0.80 && m.real() < 1.0,
                "Re mu_" + std::to_string(i + 1) + " = " + fmt(m.real()) + " in (0.80, 1)");
  }

  const CsvTable grid = read_matrix_csv(dir / "eigenfunctions.csv");
  double phi_left = 0.0, phi_right = 0.0, dl = 1e30, dr = 1e30;
  for (Eigen::Index r = 0; r < grid.values.rows(); ++r) {
    const double x = grid.values(r, 0), y = grid.values(r, 1);
    const double v = grid.values(r, 4);  // mode1_re
    const double ddl = std::hypot(x + 1.0, y), ddr = std::hypot(x - 1.0, y);
    if (ddl < dl) { dl = ddl; phi_left = v; }
    if (ddr < dr) { dr = ddr; phi_right = v; }
  }
  out.require(phi_left * phi_right < 0.0, "phi_2(-1,0) = " + fmt(phi_left) + " vs phi_2(1,0) = " +
                                              fmt(phi_right) + " opposite signs");
  return out;
}

// 5. Monte-Carlo concentration: quadrupling the sample count roughly halves
//    the gram-matrix errors against the closed-form moment oracle.
Outcome criterion5(const fs::path& dir) {
  Outcome out;
  const json rep = run_preset("convergence-m", dir, 1);
  for (const auto& row : rep.at("ratios")) {
    const std::string tag = std::to_string(row.at("m_from").get<long long>()) + "->" +
                            std::to_string(row.at("m_to").get<long long>());
    for (const char* key : {"g_ratio", "h_ratio"}) {
      const double r = row.at(key).get<double>();
      out.require(r >= 0.35 && r <= 0.65, std::string(key) + " " + tag + " = " + fmt(r));
    }
  }
  return out;
}

// 6. Taylor truncation order on the exact OU conditional moment of x^2:
//    first order decays like dt^2, with the second-order term like dt^3.
Outcome criterion6(const fs::path& dir) {
  Outcome out;
  const json rep = run_preset("convergence-dt", dir, 1);
  const double s1 = rep.at("slope_first_order").get<double>();
  const double s2 = rep.at("slope_second_order").get<double>();
  out.require(s1 >= 1.8 && s1 <= 2.2, "first-order slope = " + fmt(s1) + " in [1.8, 2.2]");
  out.require(s2 >= 2.7 && s2 <= 3.3, "second-order slope = " + fmt(s2) + " in [2.7, 3.3]");
  return out;
}

// 7. Exact algebra on small instances.
Outcome criterion7(const fs::path&) {
  Outcome out;

  // semigroup estimate vs generator estimate, shared ridge
  {
    const SdeModel m = make_ou(1.0, 0.0, 0.1);
    const auto d = make_monomial(1, 4);
    Rng rng(41);
    Mat x(200, 1);
    for (int i = 0; i < 200; ++i) x(i, 0) = 4.0 * rng.uniform() - 2.0;
    const CMat psi = evaluate_dictionary(*d, x);
    const CMat psi_p = generator_matrix(*d, m, x);
    const GramPair gp = make_gram(psi, psi_p, 0.1);
    const CMat expected =
        CMat::Identity(5, 5) + Cplx(0.1, 0.0) * gedmd_operator(psi, psi_p, gp.gamma).k;
    const double gap = (sdmd_operator(gp).k - expected).cwiseAbs().maxCoeff();
    out.require(gap <= 1e-12, "K = I + dt A gap = " + fmt(gap));

    // constant eigenpair: some mode has mu = 1 with coefficients on the
    // constant alone
    const SpectralResult res = spectrum(gp);
    double best = 1e30;
    int at = -1;
    for (std::size_t i = 0; i < res.mu.size(); ++i)
      if (std::abs(res.mu[i] - Cplx(1.0)) < best) {
        best = std::abs(res.mu[i] - Cplx(1.0));
        at = static_cast<int>(i);
      }
    out.require(best <= 1e-10, "|mu_const - 1| = " + fmt(best));
    CVec v = res.coeffs.col(at);
    v /= v(0);
    const double off = v.tail(4).cwiseAbs().maxCoeff();
    out.require(off <= 1e-10, "constant-mode off-component = " + fmt(off));
  }

  // conversion round-trip
  {
    const std::vector<Cplx> lam = {{0.0, 0.0}, {-2.3, 1.7}, {-0.01, -4.0}};
    double worst = 0.0;
    for (EigConversion conv : {EigConversion::Linearized, EigConversion::Exponential}) {
      const auto back = semigroup_to_generator(generator_to_semigroup(lam, 0.05, conv), 0.05, conv);
      for (std::size_t i = 0; i < lam.size(); ++i)
        worst = std::max(worst, std::abs(back[i] - lam[i]));
    }
    out.require(worst <= 1e-14, "lambda <-> mu round-trip = " + fmt(worst));
  }

  // three-point instance with exact rational entries
  {
    const SdeModel m = make_ou(1.0, 0.0, 0.1);
    const auto d = make_monomial(1, 1);
    Mat x(3, 1);
    x << -1.0, 0.0, 1.0;
    const CMat psi = evaluate_dictionary(*d, x);
    const CMat psi_p = generator_matrix(*d, m, x);
    const GramPair gp = make_gram(psi, psi_p, 0.1, 0.0);
    CMat g_ref(2, 2), h_ref(2, 2);
    g_ref << 1.0, 0.0, 0.0, 2.0 / 3.0;
    h_ref << 0.0, 0.0, 0.0, -2.0 / 3.0;
    const double g_gap = (gp.g - g_ref).cwiseAbs().maxCoeff();
    const double h_gap = (gp.h - h_ref).cwiseAbs().maxCoeff();
    out.require(g_gap <= 1e-12, "hand G gap = " + fmt(g_gap));
    out.require(h_gap <= 1e-12, "hand H gap = " + fmt(h_gap));
    const SpectralResult res = spectrum(gp);
    const double e0 = std::abs(res.lambda[0]);
    const double e1 = std::abs(res.lambda[1] - Cplx(-1.0));
    out.require(e0 <= 1e-12 && e1 <= 1e-12,
                "hand spectrum {0, -1} gaps = {" + fmt(e0) + ", " + fmt(e1) + "}");
  }
  return out;
}

// 8. Drift/diffusion estimation from 1e5 pooled OU pairs.
Outcome criterion8(const fs::path&) {
  Outcome out;
  const SdeModel m = make_ou(1.0, 0.0, 0.1);
  SamplerSpec sampler;
  sampler.bounds = Mat{{-2.0, 2.0}};
  sampler.count = 100000;
  EvolveSpec ev;
  ev.delta_t = 0.01;
  ev.substeps = 10;
  const SnapshotEnsemble ens = generate_ensemble(m, sampler, ev, 1);

  CoefConfig cfg;
  cfg.bins_per_axis = 20;
  cfg.seed = 1;
  const CoefficientEstimate est = CoefficientEstimate::fit(ens, cfg);

  double max_drift_err = 0.0;
  for (int i = 0; i <= 300; ++i) {
    const double x = -1.5 + 3.0 * i / 300.0;
    max_drift_err = std::max(max_drift_err,
                             std::abs(est.drift(Vec::Constant(1, x))(0) + x));
  }
  out.require(max_drift_err <= 0.1,
              "max |b_hat(x) + x| on [-1.5, 1.5] = " + fmt(max_drift_err) + " <= 0.1");

  double mean_sigma = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double x = -1.0 + 2.0 * i / 200.0;
    mean_sigma += est.diffusion(Vec::Constant(1, x))(0, 0);
  }
  mean_sigma /= 201.0;
  out.require(std::abs(mean_sigma - 0.1) <= 0.02,
              "mean sigma_hat on [-1, 1] = " + fmt(mean_sigma) + " within 20% of 0.1");
  return out;
}

// 9. Neural-mass property run at desk scale: the pipeline completes on 60k
//    points and emits similarity scores for both learned-dictionary methods.
//    The score level and ordering are reported as soft flags, not failures.
Outcome criterion9(const fs::path& dir) {
  Outcome out;
  const json rep = run_preset("neural-mass", dir, 1);
  out.require(rep.at("n_pairs").get<long long>() == 60000, "60000 snapshot pairs");

  double sdmd_score = std::numeric_limits<double>::quiet_NaN();
  double edmd_score = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : rep.at("methods")) {
    const double s = row.at("selected_score").get<double>();
    if (row.at("method") == "sdmd-dl") sdmd_score = s;
    if (row.at("method") == "edmd-dl") edmd_score = s;
  }
  out.require(std::isfinite(sdmd_score), "sdmd-dl similarity emitted (" + fmt(sdmd_score) + ")");
  out.require(std::isfinite(edmd_score), "edmd-dl similarity emitted (" + fmt(edmd_score) + ")");
  out.info(std::string("soft flag |corr| >= 0.8: ") +
           (sdmd_score >= 0.8 ? "met" : "not met"));
  out.info(std::string("soft flag sdmd-dl >= edmd-dl: ") +
           (sdmd_score >= edmd_score ? "met" : "not met"));
  return out;
}

// 10. Same-seed reruns produce byte-identical result CSVs, including across
//     different worker counts. The long learned-dictionary configurations are
//     covered at reduced scale; the code path is the same.
Outcome criterion10(const fs::path& base) {
  Outcome out;

  struct Case {
    std::string name;
    std::string experiment;
    json overrides;
    int threads_a, threads_b;
  };
  const std::vector<Case> cases = {
      {"ou", "ou", json::object(), 1, 4},
      {"stuart-landau", "stuart-landau", json::object(), 1, 1},
      {"convergence-dt", "convergence-dt", json::object(), 1, 1},
      {"convergence-m", "convergence-m", {{"sweep", {{"trials", 5}}}}, 1, 4},
      {"ou-dl",
       "ou",
       {{"method", "sdmd-dl"},
        {"sampler", {{"count", 10}}},
        {"evolve", {{"substeps", 100}, {"n_snapshots", 50}}},
        {"train", {{"outer_epochs", 10}}}},
       1, 4},
      {"triple-well-dl",
       "triple-well",
       {{"sampler", {{"grid_counts", {10, 10}}}}, {"train", {{"outer_epochs", 5}}}},
       1, 1},
      {"neural-mass-short",
       "neural-mass",
       {{"duration", 5.0}, {"train", {{"outer_epochs", 5}}}},
       1, 1},
  };

  for (const auto& c : cases) {
    const fs::path da = fresh_dir(base, c.name + "_a");
    const fs::path db = fresh_dir(base, c.name + "_b");
    json ova = c.overrides, ovb = c.overrides;
    ova["threads"] = c.threads_a;
    ovb["threads"] = c.threads_b;
    run_preset(c.experiment, da, 1, ova);
    run_preset(c.experiment, db, 1, ovb);

    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(da))
      if (e.path().extension() == ".csv") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    bool same = !names.empty();
    std::string first_diff;
    for (const auto& n : names) {
      if (!fs::exists(db / n) || git_blob_hash_file(da / n) != git_blob_hash_file(db / n)) {
        same = false;
        first_diff = n;
        break;
      }
    }
    out.require(same, c.name + " rerun (" + std::to_string(names.size()) + " csv files" +
                          (first_diff.empty() ? "" : ", differs: " + first_diff) + ")");
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria for the spectral estimation suite"};
  int criterion = 0;
  std::string out_base;
  app.add_option("--criterion", criterion, "criterion number, 1-10")
      ->required()
      ->check(CLI::Range(1, 10));
  app.add_option("--out", out_base, "work directory (default: system temp)");
  CLI11_PARSE(app, argc, argv);

  const fs::path base = out_base.empty()
                            ? fs::temp_directory_path() / "sdmd_acceptance"
                            : fs::path(out_base);
  const fs::path dir = fresh_dir(base, "criterion" + std::to_string(criterion));

  // wall-clock budgets, seconds; part of the criterion statements
  const double budgets[10] = {30, 300, 120, 600, 120, 60, 1, 120, 900, 900};

  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (criterion) {
      case 1: out = criterion1(dir); break;
      case 2: out = criterion2(dir); break;
      case 3: out = criterion3(dir); break;
      case 4: out = criterion4(dir); break;
      case 5: out = criterion5(dir); break;
      case 6: out = criterion6(dir); break;
      case 7: out = criterion7(dir); break;
      case 8: out = criterion8(dir); break;
      case 9: out = criterion9(dir); break;
      case 10: out = criterion10(dir); break;
    }
  } catch (const std::exception& e) {
    out.pass = false;
    out.info(std::string("exception: ") + e.what());
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (elapsed > budgets[criterion - 1]) {
    out.pass = false;
    out.info("over budget: " + fmt(elapsed) + " s > " + fmt(budgets[criterion - 1]) + " s");
  }

  std::printf("criterion %d: %s (%s) [%.1f s]\n", criterion, out.pass ? "PASS" : "FAIL",
              out.detail.c_str(), elapsed);
  return out.pass ? 0 : 1;
}
