#pragma once

#include <string>
#include <vector>

#include "sdmd/dictionary.hpp"
#include "sdmd/io.hpp"
#include "sdmd/linalg.hpp"

namespace sdmd {

// Empirical Gram pair over m samples:
//   G = Psi_X^* Psi_X / m,  H = Psi_X^* Psi'_X / m
// where Psi'_X holds generator actions. Construction verifies that
// G + gamma I admits a Cholesky factorization.
struct GramPair {
  CMat g, h;
  std::int64_t m = 0;
  double gamma = 0.0;
  double delta_t = 0.0;
};

// Relative ridge used when no explicit gamma is given: 1e-8 * trace(G) / N.
double default_gamma(const CMat& g);

// gamma < 0 requests the default rule above.
GramPair make_gram(const CMat& psi_x, const CMat& psi_prime_x, double delta_t,
                   double gamma = -1.0);

// A^* B / m with a thread-count-independent reduction; the gram variant
// hermitizes the result. These are the building blocks behind make_gram,
// exposed for oracles and reports.
CMat normalized_cross(const CMat& a, const CMat& b);
CMat normalized_gram(const CMat& psi_x);

struct KoopmanApproximation {
  CMat k;            // N x N matrix acting on coefficient rows
  std::string kind;  // "sdmd-semigroup" | "edmd-semigroup" | "gedmd-generator"
  double delta_t = 0.0;
  double gamma = 0.0;
};

// K = I + delta_t (G + gamma I)^{-1} H  (Cholesky solve, never an inverse).
KoopmanApproximation sdmd_operator(const GramPair& gp);
// K = (Psi_X^* Psi_X / m + gamma I)^{-1} (Psi_X^* Psi_Y / m).
KoopmanApproximation edmd_operator(const CMat& psi_x, const CMat& psi_y, double delta_t,
                                   double gamma = -1.0);
// A = (Psi_X^* Psi_X / m + gamma I)^{-1} (Psi_X^* Psi'_X / m).
KoopmanApproximation gedmd_operator(const CMat& psi_x, const CMat& psi_prime_x,
                                    double gamma = -1.0);

enum class EigConversion { Linearized, Exponential };

struct SpectralResult {
  std::vector<Cplx> mu;      // semigroup eigenvalues, sorted by the canonical order
  std::vector<Cplx> lambda;  // generator eigenvalues, aligned with mu
  CMat coeffs;               // column j holds the coefficients of mode j
  std::string conversion;    // "linearized" | "exponential"
  std::string source;        // operator kind the spectrum came from
  double delta_t = 0.0;
  double gamma = 0.0;
};

// Generalized eigenproblem H v = lambda (G + gamma I) v via Cholesky whitening.
// mu = 1 + delta_t * lambda always (these are the eigenvalues of the sdmd
// operator); the conversion selects how lambda is reported:
//   Linearized:  lambda is the generalized eigenvalue itself,
//   Exponential: lambda = log(mu) / delta_t.
// Modes are ordered by descending |mu| (ties: descending Re, ascending Im),
// eigenvectors carry unit empirical norm v^* G v = 1 with the
// largest-magnitude coefficient rotated to the positive real axis.
SpectralResult spectrum(const GramPair& gp, EigConversion conv = EigConversion::Linearized);

// Spectrum of an already-built operator matrix; the optional Gram factor is
// used for eigenvector normalization when available.
SpectralResult operator_spectrum(const KoopmanApproximation& op, const CMat* g_for_norm,
                                 EigConversion conv = EigConversion::Linearized);

// Semigroup <-> generator conversions.
std::vector<Cplx> semigroup_to_generator(const std::vector<Cplx>& mu, double delta_t,
                                         EigConversion conv);
std::vector<Cplx> generator_to_semigroup(const std::vector<Cplx>& lambda, double delta_t,
                                         EigConversion conv);

// Greedy nearest-distance pairing: references are visited in ascending |ref|,
// each estimate is used at most once.
struct ModeMatch {
  struct Pair {
    int ref_index;
    int est_index;
    double abs_error;
  };
  std::vector<Pair> pairs;           // one per reference, in visit order
  std::vector<int> unmatched_refs;   // references left without an estimate
};
ModeMatch match_modes(const std::vector<Cplx>& estimates, const std::vector<Cplx>& references);

// phi(x_i) = sum_j coeffs_j psi_j(x_i) for each row of X.
CVec koopman_eigenfunction_eval(const Dictionary& dict, const CVec& coeffs, const Mat& X);

// CSV exports. Spectral results write two files:
//   <stem>_eigenvalues.csv   index, mu_re, mu_im, lambda_re, lambda_im
//   <stem>_eigenvectors.csv  mode, basis, coeff_re, coeff_im
void export_spectral_csv(const SpectralResult& res, const std::filesystem::path& dir,
                         const std::string& stem);
// Gram pairs write <stem>_g.csv / <stem>_h.csv (re/im column pairs) and a
// JSON sidecar with m, gamma, delta_t.
void export_gram(const GramPair& gp, const std::filesystem::path& dir,
                 const std::string& stem);
GramPair import_gram(const std::filesystem::path& dir, const std::string& stem);

// Built-in consistency suite run by the experiment drivers before any fit:
// exact constant eigenpair, sdmd/gedmd identity, and agreement of the two
// spectral routes on a synthetic instance. Throws InvariantFailure.
void run_invariant_preflight();

}  // namespace sdmd
