#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sdmd/io.hpp"
#include "sdmd/models.hpp"

namespace sdmd {

// A finite set of scalar observables psi_1..psi_N on R^d. Values are complex
// so that oscillatory families fit the same interface; real families simply
// carry zero imaginary parts.
class Dictionary {
 public:
  virtual ~Dictionary() = default;

  int size() const { return n_; }
  int dim() const { return dim_; }
  const std::string& family() const { return family_; }

  virtual CVec eval(const Vec& x) const = 0;
  // (j, p) = d psi_j / d x_p
  virtual CMat jacobian(const Vec& x) const = 0;
  // (j, p * dim + q) = d^2 psi_j / d x_p d x_q
  virtual CMat hessian(const Vec& x) const = 0;

  // Mixed partial d^alpha psi_j; alpha holds per-axis orders, |alpha| <= 4.
  // Only families reporting has_fourth_order() support it.
  virtual Cplx derivative(int j, const Vec& x, const std::vector<int>& alpha) const;
  virtual bool has_fourth_order() const { return false; }
  virtual bool complex_valued() const { return false; }

  virtual json describe() const = 0;

 protected:
  Dictionary(std::string family, int dim, int n) : family_(std::move(family)), dim_(dim), n_(n) {}
  void check_point(const Vec& x) const;

  // Helpers for families that define everything through derivative().
  CVec eval_via_derivative(const Vec& x) const;
  CMat jacobian_via_derivative(const Vec& x) const;
  CMat hessian_via_derivative(const Vec& x) const;

  std::string family_;
  int dim_ = 0;
  int n_ = 0;
};

using DictionaryPtr = std::shared_ptr<const Dictionary>;

// All monomials of total degree <= max_degree, graded lexicographic order
// (constant first, then degree 1, ...).
DictionaryPtr make_monomial(int dim, int max_degree);

// Physicists' Hermite polynomials H_0..H_max_order of (x - center) / scale, 1D.
DictionaryPtr make_hermite(int max_order, double center, double scale);

// Tensor complex exponentials on (r, angle): radial harmonics on [r_min, r_max]
// times angular harmonics, |k| <= radial_max, |n| <= angular_max. Ordered with
// n outermost; the (n = 0, k = 0) element is the constant function.
DictionaryPtr make_fourier(int angular_max, int radial_max, double r_min, double r_max);

// Isotropic Gaussian bumps exp(-|x - c|^2 / (2 w^2)), one column per center.
DictionaryPtr make_gaussian_rbf(const Mat& centers, const Vec& widths);

// Builds one of the fixed families above from a JSON spec {"family": ...}.
DictionaryPtr make_dictionary(const json& spec, int state_dim);

// Psi_X: row i holds psi(x_i)^T for row i of X.
CMat evaluate_dictionary(const Dictionary& dict, const Mat& X);

// Generator action (A psi_j)(x) = b . grad psi_j + 0.5 tr(sigma sigma^T Hess psi_j).
CVec generator_action(const Dictionary& dict, const SdeModel& model, const Vec& x);
// Drift-only variant for deterministic dynamics.
CVec generator_action_deterministic(const Dictionary& dict, const SdeModel& model,
                                    const Vec& x);
// Second application (A(A psi_j))(x); requires fourth-order dictionary
// derivatives and the model derivative bundles.
CVec generator_action_second(const Dictionary& dict, const SdeModel& model, const Vec& x);

// Row-per-sample matrices of the above.
CMat generator_matrix(const Dictionary& dict, const SdeModel& model, const Mat& X);
CMat generator_matrix_deterministic(const Dictionary& dict, const SdeModel& model,
                                    const Mat& X);
CMat generator_matrix_second(const Dictionary& dict, const SdeModel& model, const Mat& X);

// Smallest eigenvalue of the empirical Gram over 10 N uniform samples in the
// given box; positive values certify empirical linear independence there.
double min_gram_eigenvalue(const Dictionary& dict, const Mat& bounds, std::uint64_t seed);

}  // namespace sdmd
