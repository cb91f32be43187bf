#include "sdmd/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdmd/errors.hpp"
#include "sdmd/models.hpp"
#include "sdmd/rng.hpp"
#include "sdmd/threads.hpp"

namespace sdmd {

namespace {

// A^* B / m accumulated over fixed row blocks with a pairwise tree reduction,
// so the summation order never depends on the worker count.
CMat block_cross(const CMat& a, const CMat& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("cross product: row mismatch");
  const std::int64_t m = a.rows();
  if (m == 0) throw InvalidArgument("cross product: empty data");
  const std::int64_t block = 1024;
  std::vector<CMat> parts(block_count(m, block), CMat::Zero(a.cols(), b.cols()));
  parallel_blocks(m, block, [&](std::int64_t lo, std::int64_t hi, int idx) {
    parts[idx] = a.middleRows(lo, hi - lo).adjoint() * b.middleRows(lo, hi - lo);
  });
  return tree_reduce(std::move(parts)) / double(m);
}

Eigen::LLT<CMat> cholesky_or_throw(const CMat& g, double gamma) {
  CMat reg = g + gamma * CMat::Identity(g.rows(), g.cols());
  Eigen::LLT<CMat> llt(reg);
  if (llt.info() != Eigen::Success)
    throw SingularGramError(
        "regularized Gram matrix is not positive definite; increase gamma (current gamma = " +
        format_g17(gamma) + ")");
  return llt;
}

double resolve_gamma(const CMat& g, double gamma) {
  return gamma < 0 ? default_gamma(g) : gamma;
}

bool order_less(const Cplx& a, const Cplx& b) {
  const double ra = std::abs(a), rb = std::abs(b);
  if (ra != rb) return ra > rb;
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() < b.imag();
}

}  // namespace

double default_gamma(const CMat& g) {
  return 1e-8 * g.trace().real() / double(g.rows());
}

CMat normalized_cross(const CMat& a, const CMat& b) { return block_cross(a, b); }

CMat normalized_gram(const CMat& psi_x) { return hermitize(block_cross(psi_x, psi_x)); }

GramPair make_gram(const CMat& psi_x, const CMat& psi_prime_x, double delta_t, double gamma) {
  if (psi_x.rows() != psi_prime_x.rows() || psi_x.cols() != psi_prime_x.cols())
    throw InvalidArgument("make_gram: Psi_X and Psi'_X must have identical shapes");
  if (psi_x.rows() < 1) throw InvalidArgument("make_gram: no samples");
  GramPair gp;
  gp.m = psi_x.rows();
  gp.delta_t = delta_t;
  gp.g = hermitize(block_cross(psi_x, psi_x));
  gp.h = block_cross(psi_x, psi_prime_x);
  gp.gamma = resolve_gamma(gp.g, gamma);
  cholesky_or_throw(gp.g, gp.gamma);  // fail loudly at construction
  return gp;
}

KoopmanApproximation sdmd_operator(const GramPair& gp) {
  auto llt = cholesky_or_throw(gp.g, gp.gamma);
  KoopmanApproximation op;
  op.k = CMat::Identity(gp.g.rows(), gp.g.cols()) + gp.delta_t * llt.solve(gp.h);
  op.kind = "sdmd-semigroup";
  op.delta_t = gp.delta_t;
  op.gamma = gp.gamma;
  return op;
}

KoopmanApproximation edmd_operator(const CMat& psi_x, const CMat& psi_y, double delta_t,
                                   double gamma) {
  if (psi_x.rows() != psi_y.rows() || psi_x.cols() != psi_y.cols())
    throw InvalidArgument("edmd_operator: Psi_X and Psi_Y must have identical shapes");
  const CMat g = hermitize(block_cross(psi_x, psi_x));
  const CMat h = block_cross(psi_x, psi_y);
  KoopmanApproximation op;
  op.gamma = resolve_gamma(g, gamma);
  op.k = cholesky_or_throw(g, op.gamma).solve(h);
  op.kind = "edmd-semigroup";
  op.delta_t = delta_t;
  return op;
}

KoopmanApproximation gedmd_operator(const CMat& psi_x, const CMat& psi_prime_x, double gamma) {
  if (psi_x.rows() != psi_prime_x.rows() || psi_x.cols() != psi_prime_x.cols())
    throw InvalidArgument("gedmd_operator: Psi_X and Psi'_X must have identical shapes");
  const CMat g = hermitize(block_cross(psi_x, psi_x));
  const CMat h = block_cross(psi_x, psi_prime_x);
  KoopmanApproximation op;
  op.gamma = resolve_gamma(g, gamma);
  op.k = cholesky_or_throw(g, op.gamma).solve(h);
  op.kind = "gedmd-generator";
  op.delta_t = 0.0;
  return op;
}

std::vector<Cplx> semigroup_to_generator(const std::vector<Cplx>& mu, double delta_t,
                                         EigConversion conv) {
  if (!(delta_t > 0)) throw InvalidArgument("eigenvalue conversion needs delta_t > 0");
  std::vector<Cplx> out;
  out.reserve(mu.size());
  for (const Cplx& m : mu) {
    if (conv == EigConversion::Linearized) {
      out.push_back((m - 1.0) / delta_t);
    } else {
      if (m == Cplx(0.0, 0.0))
        throw DomainError("cannot convert semigroup eigenvalue 0 with the exponential rule");
      out.push_back(std::log(m) / delta_t);
    }
  }
  return out;
}

std::vector<Cplx> generator_to_semigroup(const std::vector<Cplx>& lambda, double delta_t,
                                         EigConversion conv) {
  if (!(delta_t > 0)) throw InvalidArgument("eigenvalue conversion needs delta_t > 0");
  std::vector<Cplx> out;
  out.reserve(lambda.size());
  for (const Cplx& l : lambda)
    out.push_back(conv == EigConversion::Linearized ? Cplx(1.0, 0.0) + delta_t * l
                                                    : std::exp(delta_t * l));
  return out;
}

namespace {

// Shared post-processing: normalize, phase-fix, order by descending |mu|.
SpectralResult finalize_spectrum(std::vector<Cplx> mu, std::vector<Cplx> lambda, CMat vecs,
                                 const CMat* g_for_norm, EigConversion conv,
                                 const std::string& source, double delta_t, double gamma) {
  const int n = static_cast<int>(mu.size());
  for (int j = 0; j < n; ++j) {
    CVec v = vecs.col(j);
    double s = 0.0;
    if (g_for_norm) s = std::real(Cplx(v.adjoint() * (*g_for_norm) * v));
    if (s > 1e-14) {
      v /= std::sqrt(s);
    } else if (v.norm() > 0) {
      v /= v.norm();  // Gram-null direction; fall back to the 2-norm
    }
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    const Cplx top = v(imax);
    if (std::abs(top) > 0) v *= std::conj(top) / std::abs(top);
    vecs.col(j) = v;
  }
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return order_less(mu[a], mu[b]); });
  SpectralResult res;
  res.mu.resize(n);
  res.lambda.resize(n);
  res.coeffs.resize(vecs.rows(), n);
  for (int j = 0; j < n; ++j) {
    res.mu[j] = mu[idx[j]];
    res.lambda[j] = lambda[idx[j]];
    res.coeffs.col(j) = vecs.col(idx[j]);
  }
  res.conversion = conv == EigConversion::Linearized ? "linearized" : "exponential";
  res.source = source;
  res.delta_t = delta_t;
  res.gamma = gamma;
  return res;
}

}  // namespace

SpectralResult spectrum(const GramPair& gp, EigConversion conv) {
  if (!(gp.delta_t > 0)) throw InvalidArgument("spectrum: GramPair lacks delta_t");
  auto llt = cholesky_or_throw(gp.g, gp.gamma);
  const CMat l = llt.matrixL();
  // B = L^{-1} H L^{-*} shares the generalized eigenvalues of (H, G + gamma I).
  const CMat y = l.triangularView<Eigen::Lower>().solve(gp.h);
  const CMat b = l.triangularView<Eigen::Lower>().solve(y.adjoint()).adjoint();
  Eigen::ComplexEigenSolver<CMat> es(b);
  if (es.info() != Eigen::Success) throw NumericalError("spectrum: eigensolver failed");
  const int n = static_cast<int>(gp.g.rows());
  std::vector<Cplx> lam(n), mu(n);
  for (int j = 0; j < n; ++j) {
    lam[j] = es.eigenvalues()(j);
    mu[j] = Cplx(1.0, 0.0) + gp.delta_t * lam[j];
  }
  if (conv == EigConversion::Exponential) {
    std::vector<Cplx> lam_exp = semigroup_to_generator(mu, gp.delta_t, conv);
    lam = std::move(lam_exp);
  }
  CMat vecs = CMat(llt.matrixU()).triangularView<Eigen::Upper>().solve(es.eigenvectors());
  return finalize_spectrum(std::move(mu), std::move(lam), std::move(vecs), &gp.g, conv,
                           "sdmd-semigroup", gp.delta_t, gp.gamma);
}

SpectralResult operator_spectrum(const KoopmanApproximation& op, const CMat* g_for_norm,
                                 EigConversion conv) {
  if (!(op.delta_t > 0))
    throw InvalidArgument("operator_spectrum: operator lacks delta_t metadata");
  Eigen::ComplexEigenSolver<CMat> es(op.k);
  if (es.info() != Eigen::Success) throw NumericalError("operator_spectrum: eigensolver failed");
  const int n = static_cast<int>(op.k.rows());
  std::vector<Cplx> mu(n), lam(n);
  if (op.kind == "gedmd-generator") {
    for (int j = 0; j < n; ++j) lam[j] = es.eigenvalues()(j);
    mu = generator_to_semigroup(lam, op.delta_t, conv);
  } else {
    for (int j = 0; j < n; ++j) mu[j] = es.eigenvalues()(j);
    lam = semigroup_to_generator(mu, op.delta_t, conv);
  }
  return finalize_spectrum(std::move(mu), std::move(lam), CMat(es.eigenvectors()), g_for_norm,
                           conv, op.kind, op.delta_t, op.gamma);
}

ModeMatch match_modes(const std::vector<Cplx>& estimates, const std::vector<Cplx>& references) {
  std::vector<int> order(references.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(references[a]) < std::abs(references[b]);
  });
  std::vector<bool> used(estimates.size(), false);
  ModeMatch match;
  for (int r : order) {
    int best = -1;
    double best_d = 0.0;
    for (std::size_t e = 0; e < estimates.size(); ++e) {
      if (used[e]) continue;
      const double d = std::abs(estimates[e] - references[r]);
      if (best < 0 || d < best_d) {
        best = static_cast<int>(e);
        best_d = d;
      }
    }
    if (best < 0) {
      match.unmatched_refs.push_back(r);
    } else {
      used[best] = true;
      match.pairs.push_back({r, best, best_d});
    }
  }
  return match;
}

CVec koopman_eigenfunction_eval(const Dictionary& dict, const CVec& coeffs, const Mat& X) {
  if (coeffs.size() != dict.size())
    throw InvalidArgument("koopman_eigenfunction_eval: coefficient length mismatch");
  return evaluate_dictionary(dict, X) * coeffs;
}

void export_spectral_csv(const SpectralResult& res, const std::filesystem::path& dir,
                         const std::string& stem) {
  const int n = static_cast<int>(res.mu.size());
  Mat eig(n, 5);
  for (int j = 0; j < n; ++j) {
    eig(j, 0) = j;
    eig(j, 1) = res.mu[j].real();
    eig(j, 2) = res.mu[j].imag();
    eig(j, 3) = res.lambda[j].real();
    eig(j, 4) = res.lambda[j].imag();
  }
  write_matrix_csv(dir / (stem + "_eigenvalues.csv"),
                   {"index", "mu_re", "mu_im", "lambda_re", "lambda_im"}, eig);
  Mat vec(res.coeffs.size(), 4);
  Eigen::Index row = 0;
  for (int j = 0; j < n; ++j)
    for (Eigen::Index b = 0; b < res.coeffs.rows(); ++b, ++row) {
      vec(row, 0) = j;
      vec(row, 1) = static_cast<double>(b);
      vec(row, 2) = res.coeffs(b, j).real();
      vec(row, 3) = res.coeffs(b, j).imag();
    }
  write_matrix_csv(dir / (stem + "_eigenvectors.csv"), {"mode", "basis", "coeff_re", "coeff_im"},
                   vec);
}

namespace {

void write_complex_matrix_csv(const std::filesystem::path& path, const CMat& m) {
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    header.push_back("c" + std::to_string(j) + "_re");
    header.push_back("c" + std::to_string(j) + "_im");
  }
  Mat flat(m.rows(), 2 * m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      flat(i, 2 * j) = m(i, j).real();
      flat(i, 2 * j + 1) = m(i, j).imag();
    }
  write_matrix_csv(path, header, flat);
}

CMat read_complex_matrix_csv(const std::filesystem::path& path) {
  const CsvTable t = read_matrix_csv(path);
  if (t.values.cols() % 2 != 0) throw Error("complex CSV must have re/im column pairs");
  CMat m(t.values.rows(), t.values.cols() / 2);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = Cplx(t.values(i, 2 * j), t.values(i, 2 * j + 1));
  return m;
}

}  // namespace

void export_gram(const GramPair& gp, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  write_complex_matrix_csv(dir / (stem + "_g.csv"), gp.g);
  write_complex_matrix_csv(dir / (stem + "_h.csv"), gp.h);
  json meta = {{"format", "sdmd-gram/1"},
               {"m", gp.m},
               {"gamma", gp.gamma},
               {"delta_t", gp.delta_t},
               {"n", gp.g.rows()},
               {"content_hashes",
                {{stem + "_g.csv", git_blob_hash_file(dir / (stem + "_g.csv"))},
                 {stem + "_h.csv", git_blob_hash_file(dir / (stem + "_h.csv"))}}}};
  write_json_file(dir / (stem + ".json"), meta);
}

GramPair import_gram(const std::filesystem::path& dir, const std::string& stem) {
  const json meta = read_json_file(dir / (stem + ".json"));
  if (meta.value("format", "") != "sdmd-gram/1")
    throw Error("import_gram: unknown metadata format");
  GramPair gp;
  gp.m = meta.at("m").get<std::int64_t>();
  gp.gamma = meta.at("gamma").get<double>();
  gp.delta_t = meta.at("delta_t").get<double>();
  gp.g = read_complex_matrix_csv(dir / (stem + "_g.csv"));
  gp.h = read_complex_matrix_csv(dir / (stem + "_h.csv"));
  const auto n = meta.at("n").get<Eigen::Index>();
  if (gp.g.rows() != n || gp.g.cols() != n || gp.h.rows() != n || gp.h.cols() != n)
    throw Error("import_gram: matrix shape mismatch");
  return gp;
}

void run_invariant_preflight() {
  auto fail = [](const std::string& what) {
    throw InvariantFailure("invariant preflight failed: " + what);
  };

  // Closed-form three-point instance: dictionary {1, x} on {-1, 0, 1} under
  // the unit-rate mean-reverting model gives G = diag(1, 2/3), H = diag(0, -2/3),
  // K(dt = 0.1) = diag(1, 0.9) and generator spectrum {0, -1}.
  const SdeModel ou = make_ou(1.0, 0.0, 0.5);
  const DictionaryPtr dict = make_monomial(1, 1);
  Mat pts(3, 1);
  pts << -1.0, 0.0, 1.0;
  const CMat psi = evaluate_dictionary(*dict, pts);
  const CMat psi_prime = generator_matrix(*dict, ou, pts);
  const GramPair gp = make_gram(psi, psi_prime, 0.1, 0.0);
  CMat g_ref(2, 2), h_ref(2, 2);
  g_ref << 1.0, 0.0, 0.0, 2.0 / 3.0;
  h_ref << 0.0, 0.0, 0.0, -2.0 / 3.0;
  if ((gp.g - g_ref.cast<Cplx>()).cwiseAbs().maxCoeff() > 1e-14 ||
      (gp.h - h_ref.cast<Cplx>()).cwiseAbs().maxCoeff() > 1e-14)
    fail("three-point Gram pair");

  const KoopmanApproximation k_op = sdmd_operator(gp);
  const KoopmanApproximation a_op = gedmd_operator(psi, psi_prime, 0.0);
  const CMat identity_gap =
      k_op.k - (CMat::Identity(2, 2) + gp.delta_t * a_op.k);
  if (identity_gap.cwiseAbs().maxCoeff() > 1e-12) fail("sdmd/gedmd identity");

  const SpectralResult sr = spectrum(gp);
  if (std::abs(sr.lambda[0] - Cplx(0.0, 0.0)) > 1e-12 ||
      std::abs(sr.lambda[1] - Cplx(-1.0, 0.0)) > 1e-12)
    fail("three-point generator spectrum");

  // Constant eigenpair and route consistency on a seeded synthetic instance.
  Rng rng(derive_seed(20240901u, 7u));
  Mat xs(40, 1);
  for (int i = 0; i < 40; ++i) xs(i, 0) = -2.0 + 4.0 * rng.uniform();
  const DictionaryPtr poly = make_monomial(1, 3);
  const CMat px = evaluate_dictionary(*poly, xs);
  const CMat pp = generator_matrix(*poly, ou, xs);
  const GramPair gp2 = make_gram(px, pp, 0.05);
  const KoopmanApproximation k2 = sdmd_operator(gp2);
  CVec e0 = CVec::Zero(poly->size());
  e0(0) = 1.0;
  if ((k2.k * e0 - e0).cwiseAbs().maxCoeff() > 1e-10) fail("constant eigenpair");

  const SpectralResult route_a = spectrum(gp2);
  const SpectralResult route_b = operator_spectrum(k2, &gp2.g);
  const ModeMatch mm = match_modes(route_b.mu, route_a.mu);
  if (!mm.unmatched_refs.empty()) fail("spectral route consistency (unmatched modes)");
  for (const auto& p : mm.pairs)
    if (p.abs_error > 1e-10) fail("spectral route consistency (eigenvalue gap)");
}

}  // namespace sdmd
