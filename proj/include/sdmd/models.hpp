#pragma once

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdmd/linalg.hpp"

namespace sdmd {

// Two-state Markov switching process driving an exogenous model input.
// stay_prob is the per-integration-step probability of keeping the level.
struct MarkovInputSpec {
  double low = 0.0;
  double high = 0.0;
  double stay_prob = 0.9999;
};

// Time-homogeneous SDE dx = b(x) dt + sigma(x) dW.
//
// Evaluators are plain callables so that estimated coefficients can stand in
// for analytic ones anywhere a model is accepted. The derivative bundles are
// optional; they are required only by the second-order generator action.
struct SdeModel {
  std::string name;
  int dim = 0;
  int noise_dim = 0;
  nlohmann::json params;  // resolved parameters, echoed into reports

  std::function<Vec(const Vec&)> drift;
  std::function<Mat(const Vec&)> diffusion;  // dim x noise_dim

  std::function<Mat(const Vec&)> drift_jacobian;              // (i,k) = d b_i / d x_k
  std::function<std::vector<Mat>(const Vec&)> drift_hessian;  // [i](k,l)
  std::function<Mat(const Vec&)> diffusion_squared;           // a = sigma sigma^T
  std::function<std::vector<Mat>(const Vec&)> diff2_jacobian;  // [p] = d a / d x_p
  std::function<std::vector<std::vector<Mat>>(const Vec&)> diff2_hessian;  // [p][q]

  // Exogenous two-state input; when set, simulation uses drift_with_input and
  // the autonomous drift member is absent.
  std::optional<MarkovInputSpec> input;
  std::function<Vec(const Vec&, double)> drift_with_input;

  bool has_input() const { return input.has_value(); }
  bool has_second_order_data() const {
    return static_cast<bool>(drift_jacobian) && static_cast<bool>(drift_hessian) &&
           static_cast<bool>(diff2_jacobian) && static_cast<bool>(diff2_hessian);
  }
  // sigma sigma^T, falling back to the product when no closed form is set.
  Mat diff2(const Vec& x) const;
};

// dx = theta (mu0 - x) dt + sigma dW on R.
SdeModel make_ou(double theta, double mu0, double sigma);

// Stuart-Landau oscillator in polar coordinates (r, angle):
//   dr     = (delta r - kappa r^3 + eps^2 / (2 r)) dt + eps dW_r
//   dangle = (gamma - beta r^2) dt + (eps / r) dW_a
// The eps^2/(2r) term is the Ito correction that makes this the exact polar
// form of the Cartesian oscillator below.
SdeModel make_stuart_landau_polar(double delta, double kappa, double eps, double gamma,
                                  double beta);

// Same oscillator in Cartesian coordinates with additive noise eps on both axes.
SdeModel make_stuart_landau_cartesian(double delta, double kappa, double eps, double gamma,
                                      double beta);

// Gradient system dx = -grad V(x) dt + sigma dW on R^2 with a two-deep/one-shallow
// well landscape.
SdeModel make_triple_well(double sigma);

struct NeuralMassParams {
  double Delta = 1.0;
  double J = 15.0;
  double sigma_r = 0.01;
  double sigma_v = 0.01;
  double input_low = -10.0;
  double input_high = -2.0;
  double stay_prob = 0.9999;
};

// Mean-field firing-rate model with a two-state switching input I(t):
//   dr = (Delta/pi + 2 r v) dt + sigma_r dW_r
//   dv = (v^2 + J r + I(t) - pi^2 r^2) dt + sigma_v dW_v
SdeModel make_neural_mass(const NeuralMassParams& p);

// Potential landscape used by make_triple_well, exposed for tests and plots.
double triple_well_value(double x, double y);
Vec triple_well_gradient(double x, double y);
Mat triple_well_hessian(double x, double y);
// third[a](b,c) = d^3 V / dx_a dx_b dx_c
std::vector<Mat> triple_well_third(double x, double y);

// Spectral mode label: n indexes angular / primary modes, l radial ladders.
struct ModeIndex {
  int l = 0;
  int n = 0;
};

// Known generator eigenvalues. Supported: "ou" (lambda_n = -n theta) and the
// Stuart-Landau forms (phase-diffusion ladder for l = 0, radial ladder for l > 0).
std::vector<Cplx> analytic_generator_eigs(const SdeModel& model,
                                          const std::vector<ModeIndex>& modes);

// Known eigenfunctions evaluated at `points` (one state per row).
CVec analytic_eigenfunction_eval(const SdeModel& model, const ModeIndex& mode,
                                 const Mat& points);

}  // namespace sdmd
